#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "cpvi/config.hpp"
#include "cpvi/kernels.hpp"
#include "cpvi/langevin.hpp"
#include "cpvi/model.hpp"
#include "cpvi/value.hpp"

namespace cpvi {

struct Snapshot {
    double tau = 0.0;
    std::vector<double> xs, v, vx, vxx, hjb;
    std::vector<double> probe_x, probe_v, probe_se;
    /// tau, a1, a2, I1, I2, mu, var, entropy (LQ problems only)
    std::optional<std::array<double, 8>> coeffs;
};

/// Three consecutive states around a probe with everything needed to form
/// the MC brackets: the control law at each state and the value field.
struct Stencil {
    std::array<double, 3> xs{};
    std::array<std::vector<double>, 3> controls;  // particles (relaxed) or one control
    std::array<double, 3> v{}, vx{}, vxx{};
};

struct RestartReport {
    double tau = 0.0;
    std::vector<double> xs;
    std::vector<RestartDecision> decisions;
    std::vector<double> dv_at_restart;  // classical rhs with the new control, pre-restart field
    std::vector<double> values;         // v at the restart instant
    std::size_t fired() const;
};

/// One coupled policy–value trajectory. Each step is Jacobi: the policy moves
/// against the pre-step value field and the value moves against the pre-step
/// policy.
class CoupledSolver {
public:
    explicit CoupledSolver(const ExperimentConfig& resolved, Execution exec = Execution::Parallel);

    /// Perturbs the τ = 0 state: adds a1_offset·x to v and mu_offset to every control.
    void perturb_initial(double a1_offset, double mu_offset);

    void step();

    double tau() const;
    long steps_taken() const { return steps_; }
    bool quadratic() const { return quadratic_; }
    Mode mode() const { return mode_; }
    const ExperimentConfig& config() const { return cfg_; }
    const ControlProblem& problem() const { return prob_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& u_grid() const { return u_grid_; }
    const QuadraticValueField& quadratic_field() const { return qfield_; }
    const GridValueField& grid_field() const { return gfield_; }
    double initial_rollout_se() const { return rollout_se_; }

    Snapshot snapshot(bool with_hjb = true) const;

    /// Nearest grid node (grid backend); exact x for the quadratic backend.
    double snap(double x) const;
    double value(double x) const;
    double value_x(double x) const;
    double value_xx(double x) const;
    /// Relaxed: particles of the control law at x. Classical: the single control.
    std::vector<double> controls_at(double x) const;
    Stencil stencil(double x) const;

    /// Sequential restart at every node (classical grid runs).
    RestartReport restart_controls();

private:
    void init_controls();
    void init_values();
    std::size_t node_index(double x) const;
    std::vector<double> standard_draws(NoiseStream& s) const;

    ExperimentConfig cfg_;
    ControlProblem prob_;
    std::optional<LQProblem> lq_;
    Execution exec_;
    Mode mode_;
    bool quadratic_;
    bool frozen_;
    double dtau_;
    long steps_ = 0;
    std::vector<double> nodes_;
    std::vector<double> u_grid_;
    std::vector<double> probes_;

    QuadraticValueField qfield_;
    ParticleEnsemble origin_;  // quadratic relaxed: the law at x = 0
    double origin_control_ = 0.0;

    GridValueField gfield_;
    std::vector<ParticleEnsemble> ensembles_;
    std::vector<double> controls_;
    NoiseStream common_;
    std::vector<double> xi_;
    std::vector<double> rhs_, rhs_se_;

    double rollout_se_ = 0.0;
};

}  // namespace cpvi
