#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cpvi/model.hpp"

namespace cpvi {

/// Standard normal draws from a stream identified by (master_seed, stream_index).
class NoiseStream {
public:
    NoiseStream() : NoiseStream(0, 0) {}
    NoiseStream(std::uint64_t master_seed, std::uint64_t stream_index);

    double next() { return normal_(engine_); }
    void fill(std::span<double> out);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

/// Samples representing π_τ(x, ·) at one state.
struct ParticleEnsemble {
    double state_x = 0.0;
    std::vector<double> particles;
    double tau = 0.0;
    NoiseStream noise;
};

inline constexpr double kParticleGuard = 1e8;

/// Euler–Maruyama step u ← u + ∇_uH·dτ + √(2λdτ)ξ, drawing ξ from the ensemble's stream.
void langevin_step(ParticleEnsemble& ens, double p, double S, const ControlProblem& prob,
                   double dtau, double guard = kParticleGuard);

/// Same step with caller-supplied draws (one per particle): used for common
/// random numbers across states and for synchronous coupling.
void langevin_step(ParticleEnsemble& ens, double p, double S, const ControlProblem& prob,
                   double dtau, std::span<const double> xi, double guard = kParticleGuard);

/// Gradient ascent step of the λ = 0 dynamics.
double deterministic_step(double u, double x, double p, double S, const ControlProblem& prob,
                          double dtau, double guard = kParticleGuard);

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // n-1 denominator
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    bool degenerate_spread = false;
};

Moments empirical_moments(std::span<const double> particles);

/// Gaussian entropy of the sample variance for LQ problems, kernel estimate otherwise.
double estimate_entropy(const ControlProblem& prob, std::span<const double> particles);

/// (1/P) Σ (∇_uH(u_i) − λ·score(u_i))².
double stationarity_residual(const ControlProblem& prob, double x, std::span<const double> particles,
                             double p, double S);

/// Advances both ensembles with identical draws taken from `shared`.
void synchronous_couple_step(ParticleEnsemble& a, ParticleEnsemble& b, double p_a, double S_a,
                             double p_b, double S_b, const ControlProblem& prob, double dtau,
                             NoiseStream& shared);

struct RestartDecision {
    double u = 0.0;
    bool restarted = false;
    double h_before = 0.0;
    double h_after = 0.0;
};

/// Argmax of H(x,·,p,S) over u_grid (golden-section refined); switch only if it
/// beats H(u_star) by more than tol.
RestartDecision sequential_restart(double u_star, double x, double p, double S,
                                   const ControlProblem& prob, std::span<const double> u_grid,
                                   double tol = 1e-6);

}  // namespace cpvi
