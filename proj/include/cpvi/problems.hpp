#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpvi/config.hpp"
#include "cpvi/model.hpp"

namespace cpvi {

std::vector<std::string> builtin_problems();

/// Quartic double well in u with a quadratic state penalty:
/// f = −(u²−1)² + 0.3u − x²/2, b = −x + tanh u, σ = 0.5.
ControlProblem double_well(double discount, double temperature, Interval domain);

/// LQ parameters of a resolved config (nullopt for non-LQ problems).
std::optional<LQProblem> config_lq(const ExperimentConfig& resolved);

ControlProblem build_problem(const ExperimentConfig& resolved);

}  // namespace cpvi
