#include "cpvi/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpvi/density.hpp"
#include "cpvi/error.hpp"
#include "cpvi/lq_oracle.hpp"
#include "cpvi/quadrature.hpp"

namespace cpvi {

namespace {

std::seed_seq make_seed(std::uint64_t master, std::uint64_t stream) {
    return std::seed_seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

[[noreturn]] void blowup(double u, double x) {
    fail(ErrorCode::NumericalBlowup,
         "particle left the guard band (u=" + std::to_string(u) + " at x=" + std::to_string(x) + ")");
}

}  // namespace

NoiseStream::NoiseStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    auto seq = make_seed(master_seed, stream_index);
    engine_.seed(seq);
}

void NoiseStream::fill(std::span<double> out) {
    for (double& v : out) v = next();
}

void langevin_step(ParticleEnsemble& ens, double p, double S, const ControlProblem& prob,
                   double dtau, double guard) {
    std::vector<double> xi(ens.particles.size());
    ens.noise.fill(xi);
    langevin_step(ens, p, S, prob, dtau, xi, guard);
}

void langevin_step(ParticleEnsemble& ens, double p, double S, const ControlProblem& prob,
                   double dtau, std::span<const double> xi, double guard) {
    if (!(dtau > 0.0)) fail(ErrorCode::InvalidArgument, "dtau must be positive");
    if (xi.size() != ens.particles.size()) {
        fail(ErrorCode::SizeMismatch, "noise vector does not match the ensemble size");
    }
    const double amp = std::sqrt(2.0 * prob.temperature * dtau);
    const double x = ens.state_x;
    for (std::size_t i = 0; i < ens.particles.size(); ++i) {
        double& u = ens.particles[i];
        u += grad_u_hamiltonian(prob, x, u, p, S) * dtau + amp * xi[i];
        if (!(std::abs(u) <= guard)) blowup(u, x);
    }
    ens.tau += dtau;
}

double deterministic_step(double u, double x, double p, double S, const ControlProblem& prob,
                          double dtau, double guard) {
    const double next = u + grad_u_hamiltonian(prob, x, u, p, S) * dtau;
    if (!(std::abs(next) <= guard)) blowup(next, x);
    return next;
}

Moments empirical_moments(std::span<const double> particles) {
    const std::size_t n = particles.size();
    if (n < 2) fail(ErrorCode::TooFewParticles, "moments need at least 2 particles");
    double mean = 0.0;
    for (double u : particles) mean += u;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double u : particles) {
        const double d = u - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Moments out;
    out.mean = mean;
    out.var = m2 / static_cast<double>(n - 1);
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    const auto [lo, hi] = std::minmax_element(particles.begin(), particles.end());
    if (*lo == *hi || !(m2 > 0.0)) {  // identical samples can leave a roundoff m2
        out.degenerate_spread = true;
        out.var = 0.0;
        return out;
    }
    out.skewness = m3 / std::pow(m2, 1.5);
    out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return out;
}

double estimate_entropy(const ControlProblem& prob, std::span<const double> particles) {
    if (particles.size() < 50) fail(ErrorCode::TooFewParticles, "entropy needs at least 50 particles");
    if (prob.lq_mode()) {
        const Moments m = empirical_moments(particles);
        if (m.degenerate_spread || !(m.var > 0.0)) {
            fail(ErrorCode::DegenerateSpread, "ensemble has zero spread");
        }
        return gaussian_entropy(m.var);
    }
    return kde_entropy(particles);
}

double stationarity_residual(const ControlProblem& prob, double x, std::span<const double> particles,
                             double p, double S) {
    const double lam = prob.temperature;
    if (lam == 0.0) {
        if (particles.empty()) fail(ErrorCode::EmptyEnsemble, "empty ensemble");
        double acc = 0.0;
        for (double u : particles) {
            const double g = grad_u_hamiltonian(prob, x, u, p, S);
            acc += g * g;
        }
        return acc / static_cast<double>(particles.size());
    }
    if (particles.size() < 50) fail(ErrorCode::TooFewParticles, "residual needs at least 50 particles");
    double acc = 0.0;
    if (prob.lq_mode()) {
        const Moments m = empirical_moments(particles);
        if (m.degenerate_spread) fail(ErrorCode::DegenerateSpread, "ensemble has zero spread");
        for (double u : particles) {
            const double r = grad_u_hamiltonian(prob, x, u, p, S) + lam * (u - m.mean) / m.var;
            acc += r * r;
        }
    } else {
        const KernelDensity kde(particles);
        for (double u : particles) {
            const double r = grad_u_hamiltonian(prob, x, u, p, S) - lam * kde.score(u);
            acc += r * r;
        }
    }
    return acc / static_cast<double>(particles.size());
}

void synchronous_couple_step(ParticleEnsemble& a, ParticleEnsemble& b, double p_a, double S_a,
                             double p_b, double S_b, const ControlProblem& prob, double dtau,
                             NoiseStream& shared) {
    if (a.particles.size() != b.particles.size()) {
        fail(ErrorCode::SizeMismatch, "coupled ensembles differ in size");
    }
    std::vector<double> xi(a.particles.size());
    shared.fill(xi);
    langevin_step(a, p_a, S_a, prob, dtau, xi);
    langevin_step(b, p_b, S_b, prob, dtau, xi);
}

RestartDecision sequential_restart(double u_star, double x, double p, double S,
                                   const ControlProblem& prob, std::span<const double> u_grid,
                                   double tol) {
    const auto h = [&](double u) { return hamiltonian(prob, x, u, p, S); };
    const ScalarMax best = refined_grid_max(h, u_grid, 20);
    RestartDecision out;
    out.h_before = h(u_star);
    if (best.value > out.h_before + tol) {
        out.u = best.argmax;
        out.restarted = true;
        out.h_after = best.value;
    } else {
        out.u = u_star;
        out.h_after = out.h_before;
    }
    return out;
}

}  // namespace cpvi
