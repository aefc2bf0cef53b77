#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpvi/model.hpp"

namespace cpvi {

struct SeriesPoint {
    double tau = 0.0;
    std::string metric;
    double value = 0.0;
};

struct SummaryItem {
    std::string key;
    double value = 0.0;
    std::optional<double> tolerance;
    std::optional<bool> pass;
};

struct DiagnosticsReport {
    std::vector<SeriesPoint> series;
    std::vector<SummaryItem> summary;

    void record(double tau, std::string metric, double value);
    void note(std::string key, double value);
    void check(std::string key, double value, double tolerance, bool pass);
    /// True when every item carrying a pass flag passed.
    bool all_pass() const;
    const SummaryItem* find(const std::string& key) const;
};

/// Exact W2 between equal-weight empirical measures (larger sample reduced to
/// evenly spaced order statistics when sizes differ).
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

struct MonotonicityResult {
    bool pass = true;
    double max_violation = 0.0;
    double tolerance = 0.0;
};

/// samples[k][i]: value at probe i and sample time k. Violation is the largest
/// drop v(τ_k) − v(τ_{k+1}).
MonotonicityResult monotonicity_check(const std::vector<std::vector<double>>& samples,
                                      double tolerance);

struct ContractionResult {
    std::vector<double> gap;
    double fitted_rate = 0.0;
    bool rate_defined = false;
    bool bound_satisfied = true;
    double worst_ratio = 0.0;  // max gap(τ)/(e^{-βτ} gap(0))
};

/// From a precomputed gap series.
ContractionResult contraction_from_gaps(std::span<const double> taus, std::span<const double> gaps,
                                        double beta);

/// gap(τ) = RMS over probes of |v^τ − ṽ^τ|.
ContractionResult contraction_check(std::span<const double> taus,
                                    const std::vector<std::vector<double>>& run_a,
                                    const std::vector<std::vector<double>>& run_b, double beta);

/// Deterministic midpoint quantiles (k+½)/n of the Gibbs density on u_grid.
std::vector<double> gibbs_quantiles(const ControlProblem& prob, double x, double p, double S,
                                    std::span<const double> u_grid, std::size_t n);

double gibbs_distance(std::span<const double> particles, const ControlProblem& prob, double x,
                      double p, double S, std::span<const double> u_grid,
                      std::size_t n_target_samples);

enum class MCCondition { I, II, III, IV, V, VI };

std::string to_string(MCCondition c);

/// Coupled data on a uniform stencil of nodes: per node and particle, the
/// integrand (H − λ ln π)(u_i) of each run, plus both value fields.
struct CoupledBrackets {
    std::vector<double> xs;
    std::vector<std::vector<double>> bracket_a;
    std::vector<std::vector<double>> bracket_b;
    std::vector<double> v_a, v_b, vx_a, vx_b, vxx_a, vxx_b;
};

struct MCValue {
    double value = 0.0;
    double std_error = 0.0;
    // rounding error of the differenced brackets and fields; synchronously
    // coupled LQ runs differ by a pure shift, so the SE alone can collapse to ~0
    double roundoff = 0.0;
};

/// Inner-product quantity of the chosen condition at interior node j. I–III
/// need entropy terms and raise ModeMismatch when λ = 0.
MCValue mc_condition_value(MCCondition which, const CoupledBrackets& data, std::size_t j,
                           double temperature);

struct MCResult {
    double max_positive_excursion = 0.0;
    double worst_tau = 0.0;
    double se_at_worst = 0.0;
    double roundoff_at_worst = 0.0;
    bool within_noise = true;  // every positive value ≤ 3 SE + roundoff
};

MCResult mc_condition_check(std::span<const double> taus, std::span<const MCValue> series);

/// κ(x) = −max_u [f_uu + L|b_uu| + L²|σ_uu| + L σ_u² + 2ε̄] (n = 1). LQ problems
/// use their exact curvatures.
double eigen_condition_kappa(const ControlProblem& prob, double L, double eps_bar, double x,
                             std::span<const double> u_grid);

/// L(Δv_x² + L Δv_xx²)/ε̲.
double w2_constant_c0(double L, double dvx_sq, double dvxx_sq, double eps_under);

struct W2BoundResult {
    bool satisfied = true;
    std::vector<double> bound;
    std::vector<double> margin;  // bound − measured
};

/// measured[k] = E|u_τ − ũ_τ|² at taus[k]; pass iff measured ≤ bound + 3·se.
W2BoundResult w2_bound_check(std::span<const double> taus, std::span<const double> measured,
                             std::span<const double> measured_se, double gap0_sq, double kappa,
                             double beta, double C0);

}  // namespace cpvi
