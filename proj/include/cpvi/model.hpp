#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpvi {

/// Scalar coefficient b(x,u), σ(x,u), f(x,u) or one of their u-derivatives.
using CoefficientFn = std::function<double(double x, double u)>;

struct Interval {
    double lo = -10.0;
    double hi = 10.0;
};

/// Linear-quadratic instance: b = Ax + Bu, σ = Cx, f = -(Mx²/2 + Nu²/2 + Px + Qu).
struct LQProblem {
    double A = -1.0;
    double B = 1.0;
    double C = 0.0;
    double M = 1.0;
    double N = 1.0;
    double P = 0.0;
    double Q = 0.0;
    double discount = 1.0;
    double temperature = 0.0;

    /// Throws DegenerateParameters unless M >= 0, N > 0, A < 0 and β - 2A - C² > 0.
    void validate() const;
};

struct ControlProblem {
    std::string name;
    CoefficientFn drift;
    CoefficientFn diffusion;
    CoefficientFn payoff;
    CoefficientFn drift_grad_u;
    CoefficientFn diffusion_grad_u;
    CoefficientFn payoff_grad_u;
    double discount = 1.0;
    double temperature = 0.0;
    int state_dim = 1;
    int control_dim = 1;
    Interval control_domain{};
    /// Present when the problem came from lq_to_general; switches ensemble
    /// statistics to Gaussian moment matching.
    std::optional<LQProblem> lq;

    bool lq_mode() const { return lq.has_value(); }
};

/// Checks the type invariants (β > 0, λ >= 0, u_min < u_max, all functions set).
void validate(const ControlProblem& prob);

/// Numeric backends only handle d = n = 1.
void require_scalar(const ControlProblem& prob);

/// Compares each supplied u-gradient with central differences of its base
/// function at every (x,u) pair; throws InvalidArgument on a mismatch larger
/// than rel_tol·max(1,|g|).
void validate_gradients(const ControlProblem& prob, std::span<const double> xs,
                        std::span<const double> us, double rel_tol = 1e-6);

double hamiltonian(const ControlProblem& prob, double x, double u, double p, double S);

/// ∂_u f + (∂_u b)p + σ(∂_u σ)S.
double grad_u_hamiltonian(const ControlProblem& prob, double x, double u, double p, double S);

/// Density ∝ exp(H(x,·,p,S)/λ) on u_grid, normalised by the trapezoid rule.
std::vector<double> gibbs_density(const ControlProblem& prob, double x, double p, double S,
                                  std::span<const double> u_grid);

struct RelaxedCoefficients {
    double drift = 0.0;         // b̃
    double diffusion_sq = 0.0;  // σ̃²
    double payoff = 0.0;        // f̃
};

/// Particle averages of b, σ² and f at state x.
RelaxedCoefficients relaxed_coefficients(const ControlProblem& prob, double x,
                                         std::span<const double> particles);

ControlProblem lq_to_general(const LQProblem& lq);

}  // namespace cpvi
