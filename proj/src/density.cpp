#include "cpvi/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cpvi/error.hpp"

namespace cpvi {

namespace {

constexpr double kKernelReach = 5.0;
constexpr double kDensityFloor = 1e-300;

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= s.size()) return s.back();
    return s[i] + frac * (s[i + 1] - s[i]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) fail(ErrorCode::TooFewParticles, "bandwidth needs at least two samples");
    double mean = 0.0;
    for (double u : samples) mean += u;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double u : samples) ss += (u - mean) * (u - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    if (sorted.front() == sorted.back() || !(spread > 0.0)) fail(ErrorCode::DegenerateSpread, "sample has zero spread");
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KernelDensity::KernelDensity(std::span<const double> samples, std::size_t bins) {
    if (bins < 16) fail(ErrorCode::InvalidArgument, "KernelDensity needs at least 16 bins");
    h_ = silverman_bandwidth(samples);
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    lo_ = *mn - kKernelReach * h_;
    const double hi = *mx + kKernelReach * h_;
    step_ = (hi - lo_) / static_cast<double>(bins - 1);

    std::vector<double> mass(bins, 0.0);
    for (double u : samples) {
        const double pos = (u - lo_) / step_;
        auto i = static_cast<std::size_t>(pos);
        if (i >= bins - 1) i = bins - 2;
        const double frac = pos - static_cast<double>(i);
        mass[i] += 1.0 - frac;
        mass[i + 1] += frac;
    }

    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(kKernelReach * h_ / step_));
    std::vector<double> kern(static_cast<std::size_t>(2 * reach + 1));
    std::vector<double> dkern(kern.size());
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h_ * std::sqrt(2.0 * std::numbers::pi));
    for (std::ptrdiff_t k = -reach; k <= reach; ++k) {
        const double z = static_cast<double>(k) * step_ / h_;
        const double g = norm * std::exp(-0.5 * z * z);
        kern[static_cast<std::size_t>(k + reach)] = g;
        // derivative of the kernel centred at the sample, seen from the evaluation point
        dkern[static_cast<std::size_t>(k + reach)] = -g * z / h_;
    }

    const auto nb = static_cast<std::ptrdiff_t>(bins);
    density_.assign(bins, 0.0);
    slope_.assign(bins, 0.0);
    for (std::ptrdiff_t j = 0; j < nb; ++j) {
        if (mass[static_cast<std::size_t>(j)] == 0.0) continue;
        const double m = mass[static_cast<std::size_t>(j)];
        const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, j - reach);
        const std::ptrdiff_t b = std::min<std::ptrdiff_t>(nb - 1, j + reach);
        for (std::ptrdiff_t i = a; i <= b; ++i) {
            const auto k = static_cast<std::size_t>(i - j + reach);
            density_[static_cast<std::size_t>(i)] += m * kern[k];
            slope_[static_cast<std::size_t>(i)] += m * dkern[k];
        }
    }
}

double KernelDensity::interpolate(const std::vector<double>& table, double u) const {
    const double pos = (u - lo_) / step_;
    if (pos <= 0.0) return pos < 0.0 ? 0.0 : table.front();
    const double last = static_cast<double>(table.size() - 1);
    if (pos >= last) return pos > last ? 0.0 : table.back();
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
}

double KernelDensity::density(double u) const { return interpolate(density_, u); }

double KernelDensity::log_density(double u) const {
    return std::log(std::max(density(u), kDensityFloor));
}

double KernelDensity::score(double u) const {
    return interpolate(slope_, u) / std::max(density(u), kDensityFloor);
}

double kde_entropy(std::span<const double> samples) {
    const KernelDensity kde(samples);
    double acc = 0.0;
    for (double u : samples) acc -= kde.log_density(u);
    return acc / static_cast<double>(samples.size());
}

}  // namespace cpvi
