#include "cpvi/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "cpvi/error.hpp"
#include "cpvi/lq_oracle.hpp"
#include "cpvi/problems.hpp"
#include "cpvi/quadrature.hpp"

namespace cpvi {

namespace {

constexpr std::uint64_t kCommonStream = 0;
constexpr std::uint64_t kRolloutStreamBase = 1ULL << 32;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double population_var(const std::vector<double>& u, double mean) {
    double ss = 0.0;
    for (double x : u) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(u.size());
}

}  // namespace

std::size_t RestartReport::fired() const {
    return static_cast<std::size_t>(
        std::count_if(decisions.begin(), decisions.end(), [](const RestartDecision& d) { return d.restarted; }));
}

CoupledSolver::CoupledSolver(const ExperimentConfig& resolved, Execution exec)
    : cfg_(resolved),
      prob_(build_problem(resolved)),
      lq_(config_lq(resolved)),
      exec_(exec),
      mode_(resolved.mode == "relaxed" ? Mode::Relaxed : Mode::Classical),
      quadratic_(resolved.backend == "quadratic"),
      frozen_(resolved.freeze_fields),
      dtau_(resolved.dtau),
      common_(resolved.master_seed, kCommonStream) {
    require_scalar(prob_);
    nodes_ = linspace(cfg_.x_min, cfg_.x_max, static_cast<std::size_t>(cfg_.nodes));
    u_grid_ = linspace(cfg_.u_min, cfg_.u_max, static_cast<std::size_t>(cfg_.u_nodes));
    probes_ = parse_probes(cfg_);
    init_controls();
    init_values();
}

std::vector<double> CoupledSolver::standard_draws(NoiseStream& s) const {
    // moment-matched: exact zero mean and unit (population) variance
    std::vector<double> z(static_cast<std::size_t>(cfg_.particles));
    s.fill(z);
    if (z.size() < 2) return std::vector<double>(z.size(), 0.0);
    double m = 0.0;
    for (double v : z) m += v;
    m /= static_cast<double>(z.size());
    const double sd = std::sqrt(population_var(z, m));
    for (double& v : z) v = (v - m) / sd;
    return z;
}

void CoupledSolver::init_controls() {
    const double mu0 = cfg_.mu0;
    const double sd0 = std::sqrt(*cfg_.var0);
    if (quadratic_) {
        if (mode_ == Mode::Relaxed) {
            origin_.state_x = 0.0;
            origin_.noise = NoiseStream(cfg_.master_seed, kCommonStream);
            origin_.particles = standard_draws(origin_.noise);
            for (double& u : origin_.particles) u = mu0 + sd0 * u;
        } else {
            origin_control_ = mu0;
        }
        return;
    }
    if (mode_ == Mode::Relaxed) {
        ensembles_.resize(nodes_.size());
        std::vector<double> shared;
        if (cfg_.common_noise) shared = standard_draws(common_);
        for (std::size_t j = 0; j < nodes_.size(); ++j) {
            auto& e = ensembles_[j];
            e.state_x = nodes_[j];
            e.noise = NoiseStream(cfg_.master_seed, j + 1);
            e.particles = cfg_.common_noise ? shared : standard_draws(e.noise);
            for (double& u : e.particles) u = mu0 + sd0 * u;
        }
        if (cfg_.common_noise) xi_.resize(static_cast<std::size_t>(cfg_.particles));
    } else {
        controls_.assign(nodes_.size(), mu0);
    }
    rhs_.assign(nodes_.size(), 0.0);
    rhs_se_.assign(nodes_.size(), 0.0);
}

void CoupledSolver::init_values() {
    gfield_.nodes = nodes_;
    gfield_.values.assign(nodes_.size(), 0.0);
    gfield_.tau = 0.0;
    qfield_ = QuadraticValueField{};
    if (cfg_.init == "zero") return;

    if (lq_) {
        const InitialCoeffs c = initial_coeffs(*lq_, cfg_.mu0);
        qfield_.a1 = c.a1;
        qfield_.a2 = c.a2;
        qfield_.a0 = initial_constant(*lq_, cfg_.mu0, *cfg_.var0);
    }
    if (cfg_.init == "closed_form") {
        for (std::size_t j = 0; j < nodes_.size(); ++j) gfield_.values[j] = qfield_.value(nodes_[j]);
        return;
    }

    RolloutOptions opts;
    opts.dt = cfg_.rollout_dt;
    opts.n_paths = static_cast<int>(cfg_.rollout_paths);
    opts.seed = cfg_.master_seed;
    auto policy_for = [&](std::size_t j) -> FrozenPolicy {
        if (mode_ == Mode::Relaxed) {
            return frozen_ensemble_policy(prob_, quadratic_ ? origin_.particles : ensembles_[j].particles);
        }
        if (quadratic_) {
            const std::vector<double> at{0.0}, u{origin_control_};
            return frozen_control_policy(prob_, at, u);
        }
        return frozen_control_policy(prob_, nodes_, controls_);
    };
    if (quadratic_) {
        // curvature and slope of J(·, ρ⁰) are closed-form; the level comes from simulation
        opts.stream = kRolloutStreamBase;
        const RolloutEstimate r = rollout_value(prob_, policy_for(0), 0.0, opts);
        qfield_.a0 = r.estimate;
        rollout_se_ = r.std_error;
        return;
    }
    const std::size_t n = nodes_.size();
    std::vector<RolloutEstimate> est(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic) if (exec_ == Execution::Parallel)
    for (long jj = 0; jj < count; ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        try {
            RolloutOptions o = opts;
            o.stream = kRolloutStreamBase + j;
            est[j] = rollout_value(prob_, policy_for(j), nodes_[j], o);
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (errors[j]) std::rethrow_exception(errors[j]);
        gfield_.values[j] = est[j].estimate;
        rollout_se_ = std::max(rollout_se_, est[j].std_error);
    }
}

void CoupledSolver::perturb_initial(double a1_offset, double mu_offset) {
    if (steps_ != 0) fail(ErrorCode::InvalidArgument, "perturb_initial after stepping");
    qfield_.a1 += a1_offset;
    for (std::size_t j = 0; j < nodes_.size(); ++j) gfield_.values[j] += a1_offset * nodes_[j];
    for (double& u : origin_.particles) u += mu_offset;
    origin_control_ += mu_offset;
    for (auto& e : ensembles_) {
        for (double& u : e.particles) u += mu_offset;
    }
    for (double& u : controls_) u += mu_offset;
}

double CoupledSolver::tau() const { return static_cast<double>(steps_) * dtau_; }

void CoupledSolver::step() {
    if (quadratic_) {
        const double p = qfield_.a1;
        const double S = qfield_.a2;
        QuadraticValueField next = qfield_;
        if (mode_ == Mode::Relaxed) {
            if (!frozen_) next = step_quadratic(qfield_, *lq_, prob_, origin_.particles, dtau_);
            langevin_step(origin_, p, S, prob_, dtau_);
        } else {
            if (!frozen_) next = step_quadratic_moments(qfield_, *lq_, origin_control_, 0.0, 0.0, dtau_);
            origin_control_ = deterministic_step(origin_control_, 0.0, p, S, prob_, dtau_);
        }
        qfield_ = next;
    } else {
        const FieldDerivatives d = derivatives(gfield_);
        if (mode_ == Mode::Relaxed) {
            if (!frozen_) relaxed_rhs(ensembles_, d.vx, d.vxx, gfield_.values, prob_, rhs_, rhs_se_, exec_);
            if (cfg_.common_noise) common_.fill(xi_);
            advance_ensembles(ensembles_, d.vx, d.vxx, prob_, dtau_, xi_, exec_);
        } else {
            if (!frozen_) classical_rhs(nodes_, controls_, d.vx, d.vxx, gfield_.values, prob_, rhs_, exec_);
            advance_controls(controls_, nodes_, d.vx, d.vxx, prob_, dtau_, exec_);
        }
        if (!frozen_) gfield_ = apply_rhs(gfield_, rhs_, dtau_);
    }
    ++steps_;
    qfield_.tau = tau();
    gfield_.tau = tau();
}

std::size_t CoupledSolver::node_index(double x) const {
    const double h = (cfg_.x_max - cfg_.x_min) / static_cast<double>(nodes_.size() - 1);
    const double pos = std::round((x - cfg_.x_min) / h);
    return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(nodes_.size() - 1)));
}

double CoupledSolver::snap(double x) const { return quadratic_ ? x : nodes_[node_index(x)]; }

double CoupledSolver::value(double x) const {
    return quadratic_ ? qfield_.value(x) : gfield_.values[node_index(x)];
}

double CoupledSolver::value_x(double x) const {
    if (quadratic_) return qfield_.vx(x);
    return derivatives(gfield_).vx[node_index(x)];
}

double CoupledSolver::value_xx(double x) const {
    if (quadratic_) return qfield_.vxx();
    return derivatives(gfield_).vxx[node_index(x)];
}

std::vector<double> CoupledSolver::controls_at(double x) const {
    if (quadratic_) {
        // the LQ control law at x is the law at 0 translated by B·I2·x
        const double shift = lq_->B * qfield_.i2 * x;
        if (mode_ == Mode::Classical) return {origin_control_ + shift};
        std::vector<double> out = origin_.particles;
        for (double& u : out) u += shift;
        return out;
    }
    const std::size_t j = node_index(x);
    if (mode_ == Mode::Classical) return {controls_[j]};
    return ensembles_[j].particles;
}

Stencil CoupledSolver::stencil(double x) const {
    Stencil s;
    const double h = (cfg_.x_max - cfg_.x_min) / static_cast<double>(nodes_.size() - 1);
    if (quadratic_) {
        for (int k = 0; k < 3; ++k) {
            const double xk = x + (k - 1) * h;
            s.xs[k] = xk;
            s.controls[k] = controls_at(xk);
            s.v[k] = qfield_.value(xk);
            s.vx[k] = qfield_.vx(xk);
            s.vxx[k] = qfield_.vxx();
        }
        return s;
    }
    std::size_t j = node_index(x);
    j = std::clamp<std::size_t>(j, 1, nodes_.size() - 2);
    const FieldDerivatives d = derivatives(gfield_);
    for (int k = 0; k < 3; ++k) {
        const std::size_t n = j + static_cast<std::size_t>(k) - 1;
        s.xs[k] = nodes_[n];
        s.controls[k] = controls_at(nodes_[n]);
        s.v[k] = gfield_.values[n];
        s.vx[k] = d.vx[n];
        s.vxx[k] = d.vxx[n];
    }
    return s;
}

Snapshot CoupledSolver::snapshot(bool with_hjb) const {
    Snapshot s;
    s.tau = tau();
    s.xs = nodes_;
    const std::size_t n = nodes_.size();
    if (quadratic_) {
        s.v.resize(n);
        s.vx.resize(n);
        s.vxx.assign(n, qfield_.vxx());
        for (std::size_t j = 0; j < n; ++j) {
            s.v[j] = qfield_.value(nodes_[j]);
            s.vx[j] = qfield_.vx(nodes_[j]);
        }
    } else {
        const FieldDerivatives d = derivatives(gfield_);
        s.v = gfield_.values;
        s.vx = d.vx;
        s.vxx = d.vxx;
    }
    if (with_hjb) {
        s.hjb.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            s.hjb[j] = hjb_residual_at(prob_, mode_, nodes_[j], s.v[j], s.vx[j], s.vxx[j], u_grid_);
        }
    }
    for (double x : probes_) {
        const double xs = snap(x);
        s.probe_x.push_back(xs);
        s.probe_v.push_back(value(xs));
        double se = 0.0;
        if (mode_ == Mode::Relaxed) {
            se = relaxed_value_rhs(xs, controls_at(xs), value_x(xs), value_xx(xs), value(xs), prob_).std_error;
        }
        s.probe_se.push_back(se);
    }
    if (lq_) {
        std::array<double, 8> c{};
        c[0] = s.tau;
        double x0 = 0.0;
        if (quadratic_) {
            c[1] = qfield_.a1;
            c[2] = qfield_.a2;
            c[3] = qfield_.i1;
            c[4] = qfield_.i2;
        } else {
            const QuadraticFit fit = quadratic_fit(nodes_, gfield_.values);
            c[1] = fit.c1;
            c[2] = fit.a2;
            c[3] = nan();
            c[4] = nan();
            x0 = snap(0.0);
        }
        const std::vector<double> u = controls_at(x0);
        if (mode_ == Mode::Relaxed) {
            const Moments m = empirical_moments(u);
            c[5] = m.mean;
            c[6] = m.var;
            c[7] = estimate_entropy(prob_, u);
        } else {
            c[5] = u[0];
            c[6] = 0.0;
            c[7] = nan();
        }
        s.coeffs = c;
    }
    return s;
}

RestartReport CoupledSolver::restart_controls() {
    if (quadratic_ || mode_ != Mode::Classical) {
        fail(ErrorCode::ModeMismatch, "sequential restart applies to classical grid runs");
    }
    const FieldDerivatives d = derivatives(gfield_);
    RestartReport r;
    r.tau = tau();
    r.xs = nodes_;
    r.values = gfield_.values;
    r.decisions.resize(nodes_.size());
    r.dv_at_restart.resize(nodes_.size());
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
        r.decisions[j] = sequential_restart(controls_[j], nodes_[j], d.vx[j], d.vxx[j], prob_, u_grid_);
        controls_[j] = r.decisions[j].u;
        r.dv_at_restart[j] = classical_value_rhs(nodes_[j], controls_[j], d.vx[j], d.vxx[j],
                                                 gfield_.values[j], prob_);
    }
    return r;
}

}  // namespace cpvi
