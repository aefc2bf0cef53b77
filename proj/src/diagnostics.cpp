#include "cpvi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpvi/error.hpp"
#include "cpvi/quadrature.hpp"

namespace cpvi {

void DiagnosticsReport::record(double tau, std::string metric, double value) {
    series.push_back({tau, std::move(metric), value});
}

void DiagnosticsReport::note(std::string key, double value) {
    summary.push_back({std::move(key), value, std::nullopt, std::nullopt});
}

void DiagnosticsReport::check(std::string key, double value, double tolerance, bool pass) {
    summary.push_back({std::move(key), value, tolerance, pass});
}

bool DiagnosticsReport::all_pass() const {
    return std::all_of(summary.begin(), summary.end(),
                       [](const SummaryItem& s) { return !s.pass || *s.pass; });
}

const SummaryItem* DiagnosticsReport::find(const std::string& key) const {
    for (const auto& s : summary) {
        if (s.key == key) return &s;
    }
    return nullptr;
}

namespace {

std::vector<double> order_statistics(std::span<const double> s, std::size_t n) {
    std::vector<double> sorted(s.begin(), s.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() == n) return sorted;
    std::vector<double> out(n);
    const double m = static_cast<double>(sorted.size());
    for (std::size_t k = 0; k < n; ++k) {
        auto idx = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * m / static_cast<double>(n));
        out[k] = sorted[std::min(idx, sorted.size() - 1)];
    }
    return out;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double se_of_mean(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double n = static_cast<double>(v.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::EmptyInput, "W2 of an empty sample");
    const std::size_t n = std::min(a.size(), b.size());
    const std::vector<double> qa = order_statistics(a, n);
    const std::vector<double> qb = order_statistics(b, n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += (qa[k] - qb[k]) * (qa[k] - qb[k]);
    return std::sqrt(acc / static_cast<double>(n));
}

MonotonicityResult monotonicity_check(const std::vector<std::vector<double>>& samples,
                                      double tolerance) {
    if (samples.size() < 2) fail(ErrorCode::EmptyInput, "monotonicity needs at least 2 samples");
    MonotonicityResult out;
    out.tolerance = tolerance;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        if (samples[k].size() != samples[k + 1].size()) {
            fail(ErrorCode::SizeMismatch, "probe count changes between samples");
        }
        for (std::size_t i = 0; i < samples[k].size(); ++i) {
            out.max_violation = std::max(out.max_violation, samples[k][i] - samples[k + 1][i]);
        }
    }
    out.pass = out.max_violation <= tolerance;
    return out;
}

ContractionResult contraction_from_gaps(std::span<const double> taus, std::span<const double> gaps,
                                        double beta) {
    if (taus.size() != gaps.size()) fail(ErrorCode::SizeMismatch, "taus/gaps size mismatch");
    if (gaps.empty()) fail(ErrorCode::EmptyInput, "empty gap series");
    ContractionResult out;
    out.gap.assign(gaps.begin(), gaps.end());
    const double g0 = gaps[0];
    if (g0 == 0.0) {
        // identical initialisations: the bound holds trivially, no rate to fit
        out.bound_satisfied = std::all_of(gaps.begin(), gaps.end(), [](double g) { return g == 0.0; });
        return out;
    }
    if (g0 < 1e-6) fail(ErrorCode::DegenerateGap, "initial gap below 1e-6");

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        const double t = taus[k] - taus[0];
        const double bound = std::exp(-beta * t) * g0;
        out.worst_ratio = std::max(out.worst_ratio, gaps[k] / bound);
        if (gaps[k] > bound * (1.0 + 1e-3)) out.bound_satisfied = false;
        if (gaps[k] >= 1e-10) {
            const double y = std::log(gaps[k]);
            sx += t;
            sy += y;
            sxx += t * t;
            sxy += t * y;
            ++n;
        }
    }
    if (n >= 2) {
        const double dn = static_cast<double>(n);
        const double den = dn * sxx - sx * sx;
        if (den > 0.0) {
            out.fitted_rate = (dn * sxy - sx * sy) / den;
            out.rate_defined = true;
        }
    }
    return out;
}

ContractionResult contraction_check(std::span<const double> taus,
                                    const std::vector<std::vector<double>>& run_a,
                                    const std::vector<std::vector<double>>& run_b, double beta) {
    if (run_a.size() != run_b.size() || run_a.size() != taus.size()) {
        fail(ErrorCode::SizeMismatch, "trajectories are not sampled on the same cadence");
    }
    std::vector<double> gaps(taus.size());
    for (std::size_t k = 0; k < taus.size(); ++k) {
        if (run_a[k].size() != run_b[k].size() || run_a[k].empty()) {
            fail(ErrorCode::SizeMismatch, "probe sets differ");
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < run_a[k].size(); ++i) {
            const double d = run_a[k][i] - run_b[k][i];
            acc += d * d;
        }
        gaps[k] = std::sqrt(acc / static_cast<double>(run_a[k].size()));
    }
    return contraction_from_gaps(taus, gaps, beta);
}

std::vector<double> gibbs_quantiles(const ControlProblem& prob, double x, double p, double S,
                                    std::span<const double> u_grid, std::size_t n) {
    if (n == 0) fail(ErrorCode::EmptyInput, "no target samples requested");
    const std::vector<double> dens = gibbs_density(prob, x, p, S, u_grid);
    const std::vector<double> cdf = cumulative_trapezoid(u_grid, dens);
    const double total = cdf.back();
    std::vector<double> out(n);
    std::size_t k = 0;
    for (std::size_t m = 0; m < n; ++m) {
        const double q = (static_cast<double>(m) + 0.5) / static_cast<double>(n) * total;
        while (k + 2 < cdf.size() && cdf[k + 1] < q) ++k;
        // density is linear on the cell, so the CDF is quadratic: invert exactly
        const double du = u_grid[k + 1] - u_grid[k];
        const double d0 = dens[k];
        const double slope = (dens[k + 1] - d0) / du;
        const double r = q - cdf[k];
        double s;
        if (std::abs(slope) * du < 1e-12 * std::max(d0, 1e-300)) {
            s = d0 > 0.0 ? r / d0 : 0.0;
        } else {
            const double disc = std::max(0.0, d0 * d0 + 2.0 * slope * r);
            s = 2.0 * r / (d0 + std::sqrt(disc));
        }
        out[m] = u_grid[k] + std::clamp(s, 0.0, du);
    }
    return out;
}

double gibbs_distance(std::span<const double> particles, const ControlProblem& prob, double x,
                      double p, double S, std::span<const double> u_grid,
                      std::size_t n_target_samples) {
    const std::vector<double> target = gibbs_quantiles(prob, x, p, S, u_grid, n_target_samples);
    return wasserstein2_1d(particles, target);
}

std::string to_string(MCCondition c) {
    switch (c) {
        case MCCondition::I: return "MC-I";
        case MCCondition::II: return "MC-II";
        case MCCondition::III: return "MC-III";
        case MCCondition::IV: return "MC-IV";
        case MCCondition::V: return "MC-V";
        case MCCondition::VI: return "MC-VI";
    }
    return "MC-?";
}

MCValue mc_condition_value(MCCondition which, const CoupledBrackets& data, std::size_t j,
                           double temperature) {
    const bool relaxed_only =
        which == MCCondition::I || which == MCCondition::II || which == MCCondition::III;
    if (relaxed_only && !(temperature > 0.0)) {
        fail(ErrorCode::ModeMismatch, to_string(which) + " involves entropy terms but lambda = 0");
    }
    const std::size_t n = data.xs.size();
    if (data.bracket_a.size() != n || data.bracket_b.size() != n || data.v_a.size() != n ||
        data.v_b.size() != n || data.vx_a.size() != n || data.vx_b.size() != n ||
        data.vxx_a.size() != n || data.vxx_b.size() != n) {
        fail(ErrorCode::SizeMismatch, "coupled bracket data is ragged");
    }
    if (j >= n) fail(ErrorCode::InvalidArgument, "node index out of range");
    const std::size_t P = data.bracket_a[j].size();
    for (std::size_t k = 0; k < n; ++k) {
        if (data.bracket_a[k].size() != P || data.bracket_b[k].size() != P || P == 0) {
            fail(ErrorCode::SizeMismatch, "coupled ensembles differ in size");
        }
    }
    auto diff = [&](std::size_t node, std::size_t i) {
        return data.bracket_a[node][i] - data.bracket_b[node][i];
    };
    std::vector<double> d(P);
    double factor = 0.0;
    double field_scale = 0.0;
    double stencil_gain = 1.0;  // Σ|weights| of the difference stencil
    switch (which) {
        case MCCondition::I:
        case MCCondition::IV:
            for (std::size_t i = 0; i < P; ++i) d[i] = diff(j, i);
            factor = data.v_a[j] - data.v_b[j];
            field_scale = std::max(std::abs(data.v_a[j]), std::abs(data.v_b[j]));
            break;
        case MCCondition::II:
        case MCCondition::V: {
            if (j == 0 || j + 1 >= n) fail(ErrorCode::InvalidArgument, "first-order stencil needs an interior node");
            const double h = data.xs[j + 1] - data.xs[j];
            for (std::size_t i = 0; i < P; ++i) d[i] = (diff(j + 1, i) - diff(j - 1, i)) / (2.0 * h);
            factor = data.vx_a[j] - data.vx_b[j];
            field_scale = std::max(std::abs(data.vx_a[j]), std::abs(data.vx_b[j]));
            stencil_gain = 1.0 / h;
            break;
        }
        case MCCondition::III:
        case MCCondition::VI: {
            if (j == 0 || j + 1 >= n) fail(ErrorCode::InvalidArgument, "second-order stencil needs an interior node");
            const double h = data.xs[j + 1] - data.xs[j];
            for (std::size_t i = 0; i < P; ++i) {
                d[i] = (diff(j + 1, i) - 2.0 * diff(j, i) + diff(j - 1, i)) / (h * h);
            }
            factor = data.vxx_a[j] - data.vxx_b[j];
            field_scale = std::max(std::abs(data.vxx_a[j]), std::abs(data.vxx_b[j]));
            stencil_gain = 4.0 / (h * h);
            break;
        }
    }
    const double m = mean_of(d);
    double bracket_scale = 0.0;
    const std::size_t lo = j == 0 ? 0 : j - 1;
    for (std::size_t k = lo; k <= std::min(j + 1, n - 1); ++k) {
        for (std::size_t i = 0; i < P; ++i) {
            bracket_scale = std::max({bracket_scale, std::abs(data.bracket_a[k][i]), std::abs(data.bracket_b[k][i])});
        }
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double roundoff =
        16.0 * eps * (stencil_gain * bracket_scale * std::abs(factor) + std::abs(m) * field_scale);
    return {m * factor, se_of_mean(d, m) * std::abs(factor), roundoff};
}

MCResult mc_condition_check(std::span<const double> taus, std::span<const MCValue> series) {
    if (taus.size() != series.size()) fail(ErrorCode::SizeMismatch, "taus/series size mismatch");
    MCResult out;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double pos = std::max(0.0, series[k].value);
        if (pos > 3.0 * series[k].std_error + series[k].roundoff) out.within_noise = false;
        if (pos > out.max_positive_excursion) {
            out.max_positive_excursion = pos;
            out.worst_tau = taus[k];
            out.se_at_worst = series[k].std_error;
            out.roundoff_at_worst = series[k].roundoff;
        }
    }
    return out;
}

double eigen_condition_kappa(const ControlProblem& prob, double L, double eps_bar, double x,
                             std::span<const double> u_grid) {
    if (!(L > 0.0)) fail(ErrorCode::InvalidArgument, "L must be positive");
    if (!(eps_bar > 0.0)) fail(ErrorCode::InvalidArgument, "eps_bar must be positive");
    if (prob.lq_mode()) {
        // b and σ are linear/constant in u, f_uu = −N
        return prob.lq->N - 2.0 * eps_bar;
    }
    if (u_grid.empty()) fail(ErrorCode::EmptyInput, "empty control grid");
    double worst = -std::numeric_limits<double>::infinity();
    for (double u : u_grid) {
        const double e = 1e-4 * std::max(1.0, std::abs(u));
        const double f_uu = (prob.payoff_grad_u(x, u + e) - prob.payoff_grad_u(x, u - e)) / (2.0 * e);
        const double b_uu = (prob.drift_grad_u(x, u + e) - prob.drift_grad_u(x, u - e)) / (2.0 * e);
        const double s_uu =
            (prob.diffusion_grad_u(x, u + e) - prob.diffusion_grad_u(x, u - e)) / (2.0 * e);
        const double s_u = prob.diffusion_grad_u(x, u);
        const double total = f_uu + L * std::abs(b_uu) + L * L * std::abs(s_uu) + L * s_u * s_u + 2.0 * eps_bar;
        worst = std::max(worst, total);
    }
    return -worst;
}

double w2_constant_c0(double L, double dvx_sq, double dvxx_sq, double eps_under) {
    if (!(eps_under > 0.0)) fail(ErrorCode::InvalidArgument, "eps_under must be positive");
    return L * (dvx_sq + L * dvxx_sq) / eps_under;
}

W2BoundResult w2_bound_check(std::span<const double> taus, std::span<const double> measured,
                             std::span<const double> measured_se, double gap0_sq, double kappa,
                             double beta, double C0) {
    if (std::abs(kappa - beta) < 1e-12) fail(ErrorCode::KappaEqualsBeta, "kappa equals beta");
    if (taus.size() != measured.size() || measured.size() != measured_se.size()) {
        fail(ErrorCode::SizeMismatch, "w2 bound series size mismatch");
    }
    W2BoundResult out;
    out.bound.resize(taus.size());
    out.margin.resize(taus.size());
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const double t = taus[k] - taus[0];
        const double ek = std::exp(-2.0 * kappa * t);
        const double eb = std::exp(-2.0 * beta * t);
        out.bound[k] = ek * gap0_sq + (eb - ek) / (2.0 * (kappa - beta)) * C0;
        out.margin[k] = out.bound[k] - measured[k];
        if (measured[k] > out.bound[k] + 3.0 * measured_se[k]) out.satisfied = false;
    }
    return out;
}

}  // namespace cpvi
