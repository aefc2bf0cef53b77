#include "cpvi/value.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "cpvi/error.hpp"
#include "cpvi/kernels.hpp"
#include "cpvi/lq_oracle.hpp"
#include "cpvi/quadrature.hpp"

namespace cpvi {

void GridValueField::validate() const {
    if (nodes.size() < 5) fail(ErrorCode::InvalidArgument, "grid needs at least 5 nodes");
    if (values.size() != nodes.size()) fail(ErrorCode::SizeMismatch, "grid values/nodes size mismatch");
    require_strictly_increasing(nodes, "grid nodes");
    const double h = spacing();
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (std::abs((nodes[i] - nodes[i - 1]) - h) > 1e-12 * h) {
            fail(ErrorCode::InvalidArgument, "grid nodes are not uniformly spaced");
        }
    }
}

FieldDerivatives derivatives(const GridValueField& field) {
    field.validate();
    const std::size_t n = field.nodes.size();
    const double h = (field.nodes.back() - field.nodes.front()) / static_cast<double>(n - 1);
    const auto& v = field.values;
    FieldDerivatives d;
    d.vx.resize(n);
    d.vxx.resize(n);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        d.vx[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
        d.vxx[j] = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
    }
    d.vx[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d.vxx[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
    const std::size_t e = n - 1;
    d.vx[e] = (3.0 * v[e] - 4.0 * v[e - 1] + v[e - 2]) / (2.0 * h);
    d.vxx[e] = (2.0 * v[e] - 5.0 * v[e - 1] + 4.0 * v[e - 2] - v[e - 3]) / (h * h);
    return d;
}

RhsEstimate relaxed_value_rhs(double x, std::span<const double> particles, double p, double S,
                              double v, const ControlProblem& prob) {
    if (particles.empty()) fail(ErrorCode::EmptyEnsemble, "empty ensemble");
    const double n = static_cast<double>(particles.size());
    double sum = 0.0;
    for (double u : particles) sum += hamiltonian(prob, x, u, p, S);
    const double mean = sum / n;
    double ss = 0.0;
    for (double u : particles) {
        const double d = hamiltonian(prob, x, u, p, S) - mean;
        ss += d * d;
    }
    RhsEstimate out;
    out.value = mean - prob.discount * v;
    if (prob.temperature > 0.0) out.value += prob.temperature * estimate_entropy(prob, particles);
    out.std_error = particles.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return out;
}

double classical_value_rhs(double x, double u, double p, double S, double v,
                           const ControlProblem& prob) {
    return -prob.discount * v + hamiltonian(prob, x, u, p, S);
}

QuadraticValueField step_quadratic_moments(const QuadraticValueField& f, const LQProblem& lq,
                                           double mean, double var, double entropy, double dtau) {
    const double A = lq.A, B = lq.B, C = lq.C, M = lq.M, N = lq.N, P = lq.P, Q = lq.Q;
    const double beta = lq.discount;
    const double da2 = (C * C + 2.0 * A + 2.0 * B * B * f.i2 - beta) * f.a2 - M - N * B * B * f.i2 * f.i2;
    const double da1 = (A - beta) * f.a1 - P + (B * f.a1 - Q) * B * f.i2 + B * (f.a2 - N * f.i2) * mean;
    double da0 = -0.5 * N * (mean * mean + var) - Q * mean + B * mean * f.a1 - beta * f.a0;
    if (lq.temperature > 0.0) da0 += lq.temperature * entropy;
    QuadraticValueField out = f;
    out.a0 += dtau * da0;
    out.a1 += dtau * da1;
    out.a2 += dtau * da2;
    out.i1 += dtau * (-N * f.i1 + f.a1);
    out.i2 += dtau * (-N * f.i2 + f.a2);
    out.tau += dtau;
    return out;
}

QuadraticValueField step_quadratic(const QuadraticValueField& field, const LQProblem& lq,
                                   const ControlProblem& prob, std::span<const double> particles,
                                   double dtau) {
    if (particles.empty()) fail(ErrorCode::EmptyEnsemble, "empty ensemble");
    const double n = static_cast<double>(particles.size());
    double mean = 0.0;
    for (double u : particles) mean += u;
    mean /= n;
    double ss = 0.0;
    for (double u : particles) ss += (u - mean) * (u - mean);
    const double entropy = lq.temperature > 0.0 ? estimate_entropy(prob, particles) : 0.0;
    return step_quadratic_moments(field, lq, mean, ss / n, entropy, dtau);
}

GridValueField apply_rhs(const GridValueField& field, std::span<const double> rhs, double dtau) {
    if (rhs.size() != field.values.size()) fail(ErrorCode::SizeMismatch, "rhs/grid size mismatch");
    GridValueField out = field;
    for (std::size_t j = 0; j < rhs.size(); ++j) out.values[j] = field.values[j] + dtau * rhs[j];
    out.tau = field.tau + dtau;
    return out;
}

GridValueField step_grid(const GridValueField& field, std::span<const ParticleEnsemble> ensembles,
                         const ControlProblem& prob, Mode mode, std::span<const double> controls,
                         double dtau) {
    const FieldDerivatives d = derivatives(field);
    std::vector<double> rhs(field.nodes.size());
    if (mode == Mode::Relaxed) {
        std::vector<double> se(rhs.size());
        relaxed_rhs(ensembles, d.vx, d.vxx, field.values, prob, rhs, se, Execution::Serial);
    } else {
        classical_rhs(field.nodes, controls, d.vx, d.vxx, field.values, prob, rhs, Execution::Serial);
    }
    return apply_rhs(field, rhs, dtau);
}

FrozenPolicy frozen_ensemble_policy(const ControlProblem& prob, std::span<const double> particles) {
    if (particles.empty()) fail(ErrorCode::EmptyEnsemble, "empty ensemble");
    const double bonus = (prob.temperature > 0.0 && particles.size() > 1)
                             ? prob.temperature * estimate_entropy(prob, particles)
                             : 0.0;
    if (prob.lq_mode()) {
        const LQProblem lq = *prob.lq;
        const double n = static_cast<double>(particles.size());
        double m = 0.0;
        for (double u : particles) m += u;
        m /= n;
        double ss = 0.0;
        for (double u : particles) ss += (u - m) * (u - m);
        const double second = m * m + ss / n;
        return [lq, m, second, bonus](double x) {
            PolicyAggregate g;
            g.drift = lq.A * x + lq.B * m;
            g.diffusion_sq = lq.C * lq.C * x * x;
            g.reward = -(0.5 * lq.M * x * x + 0.5 * lq.N * second + lq.P * x + lq.Q * m) + bonus;
            return g;
        };
    }
    constexpr std::size_t kMaxSupport = 256;
    const std::size_t stride = std::max<std::size_t>(1, particles.size() / kMaxSupport);
    std::vector<double> support;
    for (std::size_t i = 0; i < particles.size(); i += stride) support.push_back(particles[i]);
    return [prob, support, bonus](double x) {
        const RelaxedCoefficients c = relaxed_coefficients(prob, x, support);
        return PolicyAggregate{c.drift, c.diffusion_sq, c.payoff + bonus};
    };
}

FrozenPolicy frozen_control_policy(const ControlProblem& prob, std::span<const double> nodes,
                                   std::span<const double> controls) {
    if (nodes.size() != controls.size() || nodes.empty()) {
        fail(ErrorCode::SizeMismatch, "one control per node required");
    }
    std::vector<double> xs(nodes.begin(), nodes.end());
    std::vector<double> us(controls.begin(), controls.end());
    return [prob, xs, us](double x) {
        const auto it = std::lower_bound(xs.begin(), xs.end(), x);
        std::size_t j = static_cast<std::size_t>(it - xs.begin());
        if (j == xs.size()) {
            j = xs.size() - 1;
        } else if (j > 0 && (x - xs[j - 1]) <= (xs[j] - x)) {
            --j;
        }
        const double u = us[j];
        const double s = prob.diffusion(x, u);
        return PolicyAggregate{prob.drift(x, u), s * s, prob.payoff(x, u)};
    };
}

RolloutEstimate rollout_value(const ControlProblem& prob, const FrozenPolicy& policy, double x0,
                              const RolloutOptions& opts) {
    if (opts.n_paths < 100) fail(ErrorCode::InvalidArgument, "rollout needs at least 100 paths");
    if (!(opts.dt > 0.0)) fail(ErrorCode::InvalidArgument, "rollout dt must be positive");
    const double beta = prob.discount;
    const double horizon =
        opts.horizon > 0.0 ? opts.horizon : std::log(1.0 / opts.truncation_tol) / beta;
    const double trunc = std::exp(-beta * horizon);
    if (trunc > opts.truncation_tol * (1.0 + 1e-12)) {
        fail(ErrorCode::HorizonTooShort,
             "e^{-beta T} = " + std::to_string(trunc) + " exceeds the truncation tolerance");
    }
    const long steps = std::lround(std::ceil(horizon / opts.dt));
    const int pairs = (opts.n_paths + 1) / 2;
    const double decay = std::exp(-beta * opts.dt);
    const double sqdt = std::sqrt(opts.dt);
    NoiseStream noise(opts.seed, opts.stream);

    std::vector<double> pair_means(static_cast<std::size_t>(pairs));
    for (int k = 0; k < pairs; ++k) {
        double xa = x0, xb = x0, acc_a = 0.0, acc_b = 0.0, disc = 1.0;
        for (long s = 0; s < steps; ++s) {
            const double xi = noise.next();
            const PolicyAggregate ga = policy(xa);
            const PolicyAggregate gb = policy(xb);
            acc_a += disc * ga.reward * opts.dt;
            acc_b += disc * gb.reward * opts.dt;
            xa += ga.drift * opts.dt + std::sqrt(ga.diffusion_sq) * sqdt * xi;
            xb += gb.drift * opts.dt - std::sqrt(gb.diffusion_sq) * sqdt * xi;
            disc *= decay;
        }
        pair_means[static_cast<std::size_t>(k)] = 0.5 * (acc_a + acc_b);
    }
    double mean = 0.0;
    for (double m : pair_means) mean += m;
    mean /= pairs;
    double ss = 0.0;
    for (double m : pair_means) ss += (m - mean) * (m - mean);
    RolloutEstimate out;
    out.estimate = mean;
    out.std_error = pairs > 1 ? std::sqrt(ss / (pairs - 1) / pairs) : 0.0;
    out.horizon = horizon;
    out.truncation_factor = trunc;
    return out;
}

double hjb_residual_at(const ControlProblem& prob, Mode mode, double x, double v, double p, double S,
                       std::span<const double> u_grid) {
    if (mode == Mode::Relaxed) {
        const double lam = prob.temperature;
        if (!(lam > 0.0)) fail(ErrorCode::TemperatureZero, "relaxed HJB residual needs lambda > 0");
        std::vector<double> g(u_grid.size());
        for (std::size_t i = 0; i < u_grid.size(); ++i) g[i] = hamiltonian(prob, x, u_grid[i], p, S) / lam;
        const double lse = log_trapezoid_exp(u_grid, g);
        if (!std::isfinite(lse)) fail(ErrorCode::NonNormalizable, "log-partition is not finite");
        return -prob.discount * v + lam * lse;
    }
    const ScalarMax best =
        refined_grid_max([&](double u) { return hamiltonian(prob, x, u, p, S); }, u_grid, 20);
    return -prob.discount * v + best.value;
}

std::vector<double> hjb_residual(const GridValueField& field, const ControlProblem& prob,
                                 std::span<const double> u_grid, Mode mode) {
    const FieldDerivatives d = derivatives(field);
    std::vector<double> out(field.nodes.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = hjb_residual_at(prob, mode, field.nodes[j], field.values[j], d.vx[j], d.vxx[j], u_grid);
    }
    return out;
}

QuadraticFit quadratic_fit(std::span<const double> xs, std::span<const double> vs) {
    if (xs.size() != vs.size()) fail(ErrorCode::SizeMismatch, "fit inputs differ in size");
    if (xs.size() < 3) fail(ErrorCode::EmptyInput, "quadratic fit needs at least 3 points");
    const double n = static_cast<double>(xs.size());
    double xbar = 0.0;
    for (double x : xs) xbar += x;
    xbar /= n;
    double scale = 0.0;
    for (double x : xs) scale = std::max(scale, std::abs(x - xbar));
    if (!(scale > 0.0)) fail(ErrorCode::DegenerateParameters, "fit abscissae coincide");

    // normal equations in the scaled basis {1, t, t²}
    std::array<std::array<double, 4>, 3> m{};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double t = (xs[i] - xbar) / scale;
        const std::array<double, 3> phi{1.0, t, t * t};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[r][c] += phi[r] * phi[c];
            m[r][3] += phi[r] * vs[i];
        }
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        }
        std::swap(m[col], m[piv]);
        if (m[col][col] == 0.0) fail(ErrorCode::DegenerateParameters, "singular quadratic fit");
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::array<double, 3> coef{};
    for (int r = 2; r >= 0; --r) {
        double s = m[r][3];
        for (int c = r + 1; c < 3; ++c) s -= m[r][c] * coef[c];
        coef[r] = s / m[r][r];
    }
    QuadraticFit fit;
    const double s2 = scale * scale;
    fit.a2 = 2.0 * coef[2] / s2;
    fit.c1 = coef[1] / scale - 2.0 * coef[2] * xbar / s2;
    fit.c0 = coef[0] - coef[1] * xbar / scale + coef[2] * xbar * xbar / s2;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double t = (xs[i] - xbar) / scale;
        const double r = vs[i] - (coef[0] + coef[1] * t + coef[2] * t * t);
        fit.max_residual = std::max(fit.max_residual, std::abs(r));
    }
    return fit;
}

}  // namespace cpvi
