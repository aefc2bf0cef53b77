#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cpvi {

/// 0.9·min(sd, IQR/1.34)·P^{-1/5}; throws DegenerateSpread when both spreads vanish.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian kernel density estimate evaluated on a binned grid (linear binning,
/// truncated kernel at ±5h) and interpolated linearly in between. The
/// binned form keeps the per-ensemble cost at O(P + bins·kernel_width).
class KernelDensity {
public:
    explicit KernelDensity(std::span<const double> samples, std::size_t bins = 512);

    double bandwidth() const { return h_; }
    double density(double u) const;
    double log_density(double u) const;
    /// d/du ln π̂(u).
    double score(double u) const;

private:
    double interpolate(const std::vector<double>& table, double u) const;

    double h_ = 0.0;
    double lo_ = 0.0;
    double step_ = 0.0;
    std::vector<double> density_;
    std::vector<double> slope_;
};

/// Resubstitution entropy estimate -(1/P) Σ ln π̂(u_i).
double kde_entropy(std::span<const double> samples);

}  // namespace cpvi
