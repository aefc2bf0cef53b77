#pragma once

#include <vector>

#include "cpvi/model.hpp"

namespace cpvi {

/// Coefficient system of the LQ problem. v = a2 x²/2 + a1 x + a0,
/// I_k = ∫_0^τ e^{N(s-τ)} a_k^s ds, and (mu, var) are the moments of the
/// control law at the reference state x = 0.
struct LQState {
    double a1 = 0.0;
    double a2 = 0.0;
    double I1 = 0.0;
    double I2 = 0.0;
    double mu = 0.0;
    double var = 0.0;
    double tau = 0.0;
};

struct LQStationary {
    double a1_star = 0.0;
    double a2_star = 0.0;
    double I2_star = 0.0;
};

struct InitialCoeffs {
    double a1 = 0.0;
    double a2 = 0.0;
};

/// Coefficients of v⁰ = J(x, ρ⁰) for the constant Gaussian policy with mean mu0:
///   a2 = -M/(β-2A-C²),  a1 = -M·B·mu0/((β-A)(β-2A-C²)) - P/(β-A).
InitialCoeffs initial_coeffs(const LQProblem& lq, double mu0);

/// Constant term a0 of the same v⁰ (x-independent part of the discounted payoff,
/// including λ times the entropy of N(mu0, var0); var0 may be 0 when λ = 0).
double initial_constant(const LQProblem& lq, double mu0, double var0);

/// LQState at τ = 0 for an initial policy N(mu0, var0).
LQState initial_state(const LQProblem& lq, double mu0, double var0);

/// Time derivative of every component; the returned tau field is 1.
LQState lq_ode_rhs(const LQState& s, const LQProblem& lq);

/// Closed-form limits a2* (negative root) and a1*.
LQStationary stationary_coeffs(const LQProblem& lq);

struct OUMoments {
    double mean = 0.0;
    double var = 0.0;
};

/// Moments of du = (-N u + c)dτ + √(2λ)dB with frozen drift constant c.
OUMoments ou_moments(double N, double lam, double mu0, double var0, double drift_const, double tau);

/// ½ ln(2πe·var).
double gaussian_entropy(double var);

enum class Integrator { Euler, RK4 };

/// Integrates lq_ode_rhs from `init` to tau_max, recording every `cadence`
/// (τ = 0 and the final state are always included).
std::vector<LQState> integrate_oracle(const LQProblem& lq, const LQState& init, double tau_max,
                                      double dtau, double cadence,
                                      Integrator integrator = Integrator::Euler);

struct YZPoint {
    double tau = 0.0;
    double Y = 0.0;  // ±inf while the a1 gap is exactly zero
    double Z = 0.0;
    double a2 = 0.0;
    double I2 = 0.0;
    double a1_gap = 0.0;
    /// B(a2-N·I2)Z + B²(a2-N·I2)Y + A + B²I2: the factor multiplying (a1-ã1)²
    /// in the MC-II product of two coupled LQ runs.
    double coefficient = 0.0;
    /// coefficient·(a1-ã1)², finite even where the a1 gap crosses zero.
    double product = 0.0;
};

struct YZCertificate {
    std::vector<YZPoint> points;
    bool gap_crossed_zero = false;  // Y and Z are singular where the a1 gap changes sign
    double first_crossing = 0.0;
    bool all_nonpositive() const;
};

/// Ratio dynamics Y = ΔI1/Δa1, Z = e^{-Nτ}Δμ0/Δa1 for two runs that share a2
/// and I2, starting from Y0 = 0, Z0 = mu_gap/a1_gap0. The gaps (Δa1, ΔI1) obey a
/// linear system that is integrated directly, so Y and Z are read off as ratios
/// and stay defined when Δa1 passes through zero.
YZCertificate yz_certificate(const LQProblem& lq, double mu_gap, double a1_gap0, double tau_max,
                             double dtau);

}  // namespace cpvi
