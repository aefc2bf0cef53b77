#include "cpvi/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cpvi/error.hpp"

namespace cpvi {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2) fail(ErrorCode::InvalidArgument, "linspace needs at least two points");
    std::vector<double> out(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

void require_strictly_increasing(std::span<const double> grid, const char* what) {
    if (grid.size() < 2) fail(ErrorCode::InvalidArgument, std::string(what) + ": need >= 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            fail(ErrorCode::InvalidArgument, std::string(what) + ": grid not strictly increasing");
        }
    }
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double half = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    return w;
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
    if (grid.size() != values.size()) fail(ErrorCode::SizeMismatch, "trapezoid: grid/value sizes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        acc += 0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]);
    }
    return acc;
}

double log_trapezoid_exp(std::span<const double> grid, std::span<const double> log_values) {
    if (grid.size() != log_values.size()) {
        fail(ErrorCode::SizeMismatch, "log_trapezoid_exp: grid/value sizes differ");
    }
    const double peak = *std::max_element(log_values.begin(), log_values.end());
    if (!std::isfinite(peak)) return -std::numeric_limits<double>::infinity();
    const auto w = trapezoid_weights(grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += w[i] * std::exp(log_values[i] - peak);
    return peak + std::log(acc);
}

std::vector<double> cumulative_trapezoid(std::span<const double> grid, std::span<const double> values) {
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        out[i] = out[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
    }
    return out;
}

ScalarMax golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                             int iterations) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < iterations; ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? ScalarMax{c, fc} : ScalarMax{d, fd};
}

ScalarMax refined_grid_max(const std::function<double(double)>& f, std::span<const double> grid,
                           int refine_iterations) {
    if (grid.empty()) fail(ErrorCode::EmptyInput, "refined_grid_max: empty grid");
    std::size_t best = 0;
    double best_value = f(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double value = f(grid[i]);
        if (value > best_value) {
            best_value = value;
            best = i;
        }
    }
    ScalarMax result{grid[best], best_value};
    if (grid.size() < 2 || refine_iterations <= 0) return result;
    const double lo = grid[best == 0 ? 0 : best - 1];
    const double hi = grid[best + 1 == grid.size() ? best : best + 1];
    const ScalarMax refined = golden_section_max(f, lo, hi, refine_iterations);
    if (refined.value > result.value) result = refined;
    return result;
}

}  // namespace cpvi
