#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cpvi/langevin.hpp"
#include "cpvi/model.hpp"

namespace cpvi {

struct GridValueField {
    std::vector<double> nodes;  // uniform, strictly increasing, >= 5
    std::vector<double> values;
    double tau = 0.0;

    double spacing() const { return nodes[1] - nodes[0]; }
    void validate() const;
};

/// v = a2 x²/2 + a1 x + a0. i1/i2 carry the LQ memory integrals that give the
/// state-dependence of the control law (∂ₓE[u] = B·i2).
struct QuadraticValueField {
    double a0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double i1 = 0.0;
    double i2 = 0.0;
    double tau = 0.0;

    double value(double x) const { return 0.5 * a2 * x * x + a1 * x + a0; }
    double vx(double x) const { return a2 * x + a1; }
    double vxx() const { return a2; }
};

struct FieldDerivatives {
    std::vector<double> vx;
    std::vector<double> vxx;
};

/// Central differences inside, second-order one-sided stencils at both ends.
FieldDerivatives derivatives(const GridValueField& field);

struct RhsEstimate {
    double value = 0.0;
    double std_error = 0.0;  // sd(H_i)/√P
};

/// (1/P) Σ H(x,u_i,p,S) + λ·entropy − β·v.
RhsEstimate relaxed_value_rhs(double x, std::span<const double> particles, double p, double S,
                              double v, const ControlProblem& prob);

double classical_value_rhs(double x, double u, double p, double S, double v,
                           const ControlProblem& prob);

/// Euler step of the reduced LQ system at reference state 0, given the moments
/// (mean, var) of the control law there and its entropy term.
QuadraticValueField step_quadratic_moments(const QuadraticValueField& field, const LQProblem& lq,
                                           double mean, double var, double entropy, double dtau);

/// Same step with the moments read off the ensemble at x = 0.
QuadraticValueField step_quadratic(const QuadraticValueField& field, const LQProblem& lq,
                                   const ControlProblem& prob, std::span<const double> particles,
                                   double dtau);

enum class Mode { Relaxed, Classical };

/// v_j ← v_j + dτ·rhs_j.
GridValueField apply_rhs(const GridValueField& field, std::span<const double> rhs, double dtau);

/// Relaxed: one ensemble per node. Classical: one control per node.
GridValueField step_grid(const GridValueField& field, std::span<const ParticleEnsemble> ensembles,
                         const ControlProblem& prob, Mode mode, std::span<const double> controls,
                         double dtau);

/// Relaxed aggregates of a frozen policy at state x; `reward` already includes
/// the entropy bonus λ·Ent.
struct PolicyAggregate {
    double drift = 0.0;
    double diffusion_sq = 0.0;
    double reward = 0.0;
};
using FrozenPolicy = std::function<PolicyAggregate(double x)>;

/// Frozen state-independent particle law; for LQ problems the aggregates are
/// computed exactly from the sample moments.
FrozenPolicy frozen_ensemble_policy(const ControlProblem& prob, std::span<const double> particles);

/// Deterministic control per node (nearest node lookup).
FrozenPolicy frozen_control_policy(const ControlProblem& prob, std::span<const double> nodes,
                                   std::span<const double> controls);

struct RolloutOptions {
    double horizon = 0.0;  // 0: smallest T with e^{-βT} <= truncation_tol
    double dt = 1e-3;
    int n_paths = 200;
    double truncation_tol = 1e-6;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct RolloutEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double horizon = 0.0;
    double truncation_factor = 0.0;  // e^{-βT}
};

/// Euler–Maruyama simulation of dX = b̃dt + σ̃dW, left-endpoint discounted
/// reward, antithetic path pairs.
RolloutEstimate rollout_value(const ControlProblem& prob, const FrozenPolicy& policy, double x0,
                              const RolloutOptions& opts);

/// Relaxed: −βv + λ ln ∫ e^{H/λ} du. Classical: −βv + max_u H.
double hjb_residual_at(const ControlProblem& prob, Mode mode, double x, double v, double p, double S,
                       std::span<const double> u_grid);

std::vector<double> hjb_residual(const GridValueField& field, const ControlProblem& prob,
                                 std::span<const double> u_grid, Mode mode);

struct QuadraticFit {
    double c0 = 0.0;
    double c1 = 0.0;
    double a2 = 0.0;  // second derivative of the fitted parabola
    double max_residual = 0.0;
};

/// Least-squares fit v ≈ a2 x²/2 + c1 x + c0.
QuadraticFit quadratic_fit(std::span<const double> xs, std::span<const double> vs);

}  // namespace cpvi
