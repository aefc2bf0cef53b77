#pragma once

#include <span>

#include "cpvi/langevin.hpp"
#include "cpvi/model.hpp"

// Per-node loops of one coupled step. Grid nodes are independent within a
// step, so each loop has a serial reference and an OpenMP variant; both run
// the same per-node code and therefore agree bitwise. Node-level errors are
// rethrown for the lowest failing node index, whatever the schedule.

namespace cpvi {

enum class Execution { Serial, Parallel };

/// Langevin step of every ensemble against its node's (p, S). When common_xi
/// is non-empty every ensemble uses those draws instead of its own stream.
void advance_ensembles(std::span<ParticleEnsemble> ensembles, std::span<const double> p,
                       std::span<const double> S, const ControlProblem& prob, double dtau,
                       std::span<const double> common_xi, Execution exec);

void advance_controls(std::span<double> controls, std::span<const double> xs,
                      std::span<const double> p, std::span<const double> S,
                      const ControlProblem& prob, double dtau, Execution exec);

void relaxed_rhs(std::span<const ParticleEnsemble> ensembles, std::span<const double> p,
                 std::span<const double> S, std::span<const double> v, const ControlProblem& prob,
                 std::span<double> rhs, std::span<double> std_error, Execution exec);

void classical_rhs(std::span<const double> xs, std::span<const double> controls,
                   std::span<const double> p, std::span<const double> S, std::span<const double> v,
                   const ControlProblem& prob, std::span<double> rhs, Execution exec);

}  // namespace cpvi
