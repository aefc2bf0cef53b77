#include "cpvi/kernels.hpp"

#include <exception>
#include <string>
#include <vector>

#include "cpvi/error.hpp"
#include "cpvi/value.hpp"

namespace cpvi {

namespace {

void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want) fail(ErrorCode::SizeMismatch, std::string(what) + ": size mismatch");
}

// Runs body(j) for every node, collecting exceptions per node, then rethrows
// the first one with the node index attached.
template <class Body>
void for_each_node(std::size_t n, std::span<const double> xs, Execution exec, Body body) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long>(n);
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
        for (long j = 0; j < count; ++j) {
            try {
                body(static_cast<std::size_t>(j));
            } catch (...) {
                errors[static_cast<std::size_t>(j)] = std::current_exception();
            }
        }
    } else {
        for (long j = 0; j < count; ++j) {
            try {
                body(static_cast<std::size_t>(j));
            } catch (...) {
                errors[static_cast<std::size_t>(j)] = std::current_exception();
            }
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!errors[j]) continue;
        const std::string where =
            "node " + std::to_string(j) + (j < xs.size() ? " (x=" + std::to_string(xs[j]) + ")" : "");
        try {
            std::rethrow_exception(errors[j]);
        } catch (const Error& e) {
            throw Error(e.code(), where + ": " + e.detail());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::InvalidArgument, where + ": " + e.what());
        }
    }
}

std::vector<double> ensemble_states(std::span<const ParticleEnsemble> ensembles) {
    std::vector<double> xs(ensembles.size());
    for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = ensembles[j].state_x;
    return xs;
}

}  // namespace

void advance_ensembles(std::span<ParticleEnsemble> ensembles, std::span<const double> p,
                       std::span<const double> S, const ControlProblem& prob, double dtau,
                       std::span<const double> common_xi, Execution exec) {
    require_size(p.size(), ensembles.size(), "advance_ensembles p");
    require_size(S.size(), ensembles.size(), "advance_ensembles S");
    const std::vector<double> xs = ensemble_states(ensembles);
    for_each_node(ensembles.size(), xs, exec, [&](std::size_t j) {
        if (common_xi.empty()) {
            langevin_step(ensembles[j], p[j], S[j], prob, dtau);
        } else {
            langevin_step(ensembles[j], p[j], S[j], prob, dtau, common_xi);
        }
    });
}

void advance_controls(std::span<double> controls, std::span<const double> xs,
                      std::span<const double> p, std::span<const double> S,
                      const ControlProblem& prob, double dtau, Execution exec) {
    require_size(xs.size(), controls.size(), "advance_controls xs");
    require_size(p.size(), controls.size(), "advance_controls p");
    require_size(S.size(), controls.size(), "advance_controls S");
    for_each_node(controls.size(), xs, exec, [&](std::size_t j) {
        controls[j] = deterministic_step(controls[j], xs[j], p[j], S[j], prob, dtau);
    });
}

void relaxed_rhs(std::span<const ParticleEnsemble> ensembles, std::span<const double> p,
                 std::span<const double> S, std::span<const double> v, const ControlProblem& prob,
                 std::span<double> rhs, std::span<double> std_error, Execution exec) {
    const std::size_t n = ensembles.size();
    require_size(p.size(), n, "relaxed_rhs p");
    require_size(S.size(), n, "relaxed_rhs S");
    require_size(v.size(), n, "relaxed_rhs v");
    require_size(rhs.size(), n, "relaxed_rhs out");
    require_size(std_error.size(), n, "relaxed_rhs se");
    const std::vector<double> xs = ensemble_states(ensembles);
    for_each_node(n, xs, exec, [&](std::size_t j) {
        const RhsEstimate r = relaxed_value_rhs(xs[j], ensembles[j].particles, p[j], S[j], v[j], prob);
        rhs[j] = r.value;
        std_error[j] = r.std_error;
    });
}

void classical_rhs(std::span<const double> xs, std::span<const double> controls,
                   std::span<const double> p, std::span<const double> S, std::span<const double> v,
                   const ControlProblem& prob, std::span<double> rhs, Execution exec) {
    const std::size_t n = xs.size();
    require_size(controls.size(), n, "classical_rhs controls");
    require_size(p.size(), n, "classical_rhs p");
    require_size(S.size(), n, "classical_rhs S");
    require_size(v.size(), n, "classical_rhs v");
    require_size(rhs.size(), n, "classical_rhs out");
    for_each_node(n, xs, exec, [&](std::size_t j) {
        rhs[j] = classical_value_rhs(xs[j], controls[j], p[j], S[j], v[j], prob);
    });
}

}  // namespace cpvi
