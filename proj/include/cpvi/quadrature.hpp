#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cpvi {

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Trapezoid weights for a strictly increasing (not necessarily uniform) grid.
std::vector<double> trapezoid_weights(std::span<const double> grid);

double trapezoid(std::span<const double> grid, std::span<const double> values);

/// log ∫ exp(g(u)) du on the grid, computed with max-subtraction.
/// Returns -inf when every value is -inf.
double log_trapezoid_exp(std::span<const double> grid, std::span<const double> log_values);

/// Cumulative trapezoid integral, starting at 0 on grid[0].
std::vector<double> cumulative_trapezoid(std::span<const double> grid, std::span<const double> values);

struct ScalarMax {
    double argmax = 0.0;
    double value = 0.0;
};

/// Golden-section search for the maximum of f on [lo, hi].
ScalarMax golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                             int iterations);

/// Scan the grid, then refine around the best node (bracket = neighbouring
/// nodes) with golden-section iterations. Never returns a value below the
/// best grid node.
ScalarMax refined_grid_max(const std::function<double(double)>& f, std::span<const double> grid,
                           int refine_iterations = 20);

void require_strictly_increasing(std::span<const double> grid, const char* what);

}  // namespace cpvi
