#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpvi/density.hpp"
#include "cpvi/error.hpp"
#include "cpvi/langevin.hpp"
#include "cpvi/lq_oracle.hpp"
#include "cpvi/problems.hpp"
#include "cpvi/quadrature.hpp"
#include "cpvi/value.hpp"

using namespace cpvi;

namespace {

LQProblem lq_basic(double lam) {
    LQProblem lq;
    lq.temperature = lam;
    return lq;
}

ParticleEnsemble cloud(std::size_t n, double mean, double sd, std::uint64_t seed, std::uint64_t stream) {
    ParticleEnsemble e;
    e.noise = NoiseStream(seed, stream);
    e.particles.resize(n);
    NoiseStream init(seed, stream + 1000);
    for (double& u : e.particles) u = mean + sd * init.next();
    return e;
}

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

// ∫₀^∞ −ln Φ(s) ds by the trapezoid rule
double half_line_log_cdf_integral() {
    const auto s = linspace(0.0, 12.0, 24001);
    std::vector<double> f(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) f[i] = -std::log(0.5 * std::erfc(-s[i] / std::sqrt(2.0)));
    return trapezoid(s, f);
}

}  // namespace

TEST_CASE("noise streams are reproducible and independent") {
    NoiseStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
    const double x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
    CHECK(x != d.next());
}

TEST_CASE("zero temperature: Langevin step is the gradient step") {
    const ControlProblem prob = lq_to_general(lq_basic(0.0));
    ParticleEnsemble a = cloud(50, 0.5, 1.0, 1, 0);
    ParticleEnsemble b = a;
    b.noise = NoiseStream(999, 42);
    for (int k = 0; k < 100; ++k) {
        langevin_step(a, 0.3, 0.0, prob, 1e-2);
        langevin_step(b, 0.3, 0.0, prob, 1e-2);
    }
    CHECK(a.particles == b.particles);
    ParticleEnsemble c = cloud(50, 0.5, 1.0, 1, 0);
    for (double& u : c.particles) {
        for (int k = 0; k < 100; ++k) u = deterministic_step(u, 0.0, 0.3, 0.0, prob, 1e-2);
    }
    CHECK(a.particles == c.particles);
    CHECK(a.tau == doctest::Approx(1.0));
}

TEST_CASE("frozen-field Langevin follows the discrete OU recursions") {
    LQProblem lq = lq_basic(0.5);
    lq.N = 2.0;
    lq.Q = 0.3;
    const ControlProblem prob = lq_to_general(lq);
    const double p = 1.5, dtau = 1e-3;
    const std::size_t P = 20000;
    ParticleEnsemble e = cloud(P, 2.0, 1.5, 21, 0);
    Moments m0 = empirical_moments(e.particles);
    double m = m0.mean, v = m0.var;
    for (int k = 0; k < 500; ++k) {
        langevin_step(e, p, 0.0, prob, dtau);
        m = m * (1.0 - lq.N * dtau) + (lq.B * p - lq.Q) * dtau;
        v = v * (1.0 - lq.N * dtau) * (1.0 - lq.N * dtau) + 2.0 * lq.temperature * dtau;
    }
    const Moments mk = empirical_moments(e.particles);
    // initial moments are conditioned on, so only the injected noise is random:
    // its variance is v_noise = v - (1-Ndτ)^{2k} v0
    const double decay = std::pow(1.0 - lq.N * dtau, 1000);
    const double v_noise = v - decay * m0.var;
    const double se_mean = std::sqrt(v_noise / P);
    const double se_var = std::sqrt(2.0 * v_noise * v_noise / P + 4.0 * decay * m0.var * v_noise / P);
    CHECK(std::abs(mk.mean - m) <= 3.0 * se_mean);
    CHECK(std::abs(mk.var - v) <= 3.0 * se_var);
}

TEST_CASE("deterministic gradient ascent") {
    LQProblem lq = lq_basic(0.0);
    lq.N = 2.0;
    lq.Q = -0.4;
    const ControlProblem prob = lq_to_general(lq);
    const double p = 0.8, target = (lq.B * p - lq.Q) / lq.N;
    CHECK(deterministic_step(target, 0.0, p, 0.0, prob, 0.1) == target);

    double u = 5.0, g_prev = std::abs(grad_u_hamiltonian(prob, 0.0, u, p, 0.0));
    const double dtau = 1e-3;
    const long steps = std::lround(50.0 / lq.N / dtau);
    for (long k = 0; k < steps; ++k) {
        u = deterministic_step(u, 0.0, p, 0.0, prob, dtau);
        const double g = std::abs(grad_u_hamiltonian(prob, 0.0, u, p, 0.0));
        CHECK(g <= g_prev);
        g_prev = g;
    }
    CHECK(std::abs(u - target) <= 1e-8);

    CHECK_THROWS_AS(deterministic_step(1e9, 0.0, p, 0.0, prob, 1e-3), Error);
}

TEST_CASE("guard catches a blow-up") {
    LQProblem lq = lq_basic(0.1);
    const ControlProblem prob = lq_to_general(lq);
    ParticleEnsemble e = cloud(10, 0.0, 1.0, 1, 0);
    try {
        for (int k = 0; k < 200; ++k) langevin_step(e, 0.0, 0.0, prob, 3.0);  // |1 - N·dτ| = 2
        FAIL("expected NumericalBlowup");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::NumericalBlowup);
    }
}

TEST_CASE("empirical moments") {
    const std::vector<double> same(10, 2.5);
    const Moments d = empirical_moments(same);
    CHECK(d.mean == 2.5);
    CHECK(d.var == 0.0);
    CHECK(d.skewness == 0.0);
    CHECK(d.excess_kurtosis == 0.0);
    CHECK(d.degenerate_spread);

    const std::vector<double> pm{-1.0, 1.0};
    const Moments two = empirical_moments(pm);
    CHECK(two.mean == 0.0);
    CHECK(two.var == 2.0);
    CHECK_THROWS_AS(empirical_moments(std::vector<double>{1.0}), Error);

    const std::size_t P = 200000;
    std::vector<double> z(P);
    NoiseStream(4, 4).fill(z);
    const Moments g = empirical_moments(z);
    CHECK(std::abs(g.skewness) <= 3.0 * std::sqrt(6.0 / P));
    CHECK(std::abs(g.excess_kurtosis) <= 3.0 * std::sqrt(24.0 / P));
}

TEST_CASE("entropy estimates") {
    const ControlProblem dw = double_well(1.0, 0.2, Interval{});
    const std::size_t P = 100000;
    std::vector<double> z(P), z2(P), uni(P);
    NoiseStream(12, 0).fill(z);
    for (std::size_t i = 0; i < P; ++i) z2[i] = 2.0 * z[i];
    std::mt19937_64 g(12);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (double& u : uni) u = U(g);

    CHECK(std::abs(estimate_entropy(dw, z) - 0.5 * (1.0 + std::log(2.0 * std::numbers::pi))) <= 0.02);
    CHECK(std::abs(estimate_entropy(dw, z2) - estimate_entropy(dw, z) - std::log(2.0)) <= 0.03);

    // Gaussian kernels leak mass past the edges of a bounded support: the
    // estimate of U(0,1) sits above 0 by about 2h∫₀^∞ −lnΦ, i.e. 0.025 at this P.
    const double h = silverman_bandwidth(uni);
    const double edge_bias = 2.0 * h * half_line_log_cdf_integral();
    const double hu = estimate_entropy(dw, uni);
    CHECK(hu > 0.0);
    CHECK(std::abs(hu - edge_bias) <= 0.003);

    // LQ problems use the Gaussian formula of the sample variance
    const ControlProblem lq = lq_to_general(lq_basic(0.3));
    CHECK(estimate_entropy(lq, z) == doctest::Approx(gaussian_entropy(empirical_moments(z).var)));
    CHECK_THROWS_AS(estimate_entropy(lq, std::vector<double>(10, 0.1)), Error);
    CHECK_THROWS_AS(estimate_entropy(dw, std::vector<double>(100, 0.1)), Error);
}

TEST_CASE("kernel density basics") {
    std::vector<double> z(50000);
    NoiseStream(3, 1).fill(z);
    const KernelDensity kde(z);
    const double phi0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    CHECK(kde.density(0.0) == doctest::Approx(phi0).epsilon(0.03));
    CHECK(kde.score(1.0) == doctest::Approx(-1.0).epsilon(0.1));
    CHECK(kde.density(100.0) == 0.0);
    CHECK(std::isfinite(kde.log_density(100.0)));
}

TEST_CASE("stationarity residual") {
    LQProblem lq = lq_basic(0.5);
    lq.N = 2.0;
    const ControlProblem prob = lq_to_general(lq);
    const double p = 1.0, c = lq.B * p / lq.N, var = lq.temperature / lq.N;

    // cloud with exactly the Gibbs mean and variance
    std::vector<double> u(5000);
    NoiseStream(8, 8).fill(u);
    const Moments mz = empirical_moments(u);
    for (double& x : u) x = c + std::sqrt(var) * (x - mz.mean) / std::sqrt(mz.var);
    CHECK(stationarity_residual(prob, 0.0, u, p, 0.0) <= 1e-20);

    // λ = 0: mean squared gradient
    const ControlProblem cold = lq_to_general(lq_basic(0.0));
    double msq = 0.0;
    for (double x : u) msq += std::pow(grad_u_hamiltonian(cold, 0.0, x, p, 0.0), 2);
    CHECK(stationarity_residual(cold, 0.0, u, p, 0.0) == doctest::Approx(msq / u.size()));

    // relaxation from far away, both estimators
    for (const ControlProblem& pr : {prob, double_well(1.0, 0.5, Interval{})}) {
        ParticleEnsemble e = cloud(4000, 3.0, 2.0, 31, 0);
        const double r0 = stationarity_residual(pr, 0.0, e.particles, p, 0.0);
        const double dtau = 1e-3;
        for (int k = 0; k < std::lround(20.0 / lq.N / dtau); ++k) langevin_step(e, p, 0.0, pr, dtau);
        CHECK(stationarity_residual(pr, 0.0, e.particles, p, 0.0) <= 0.05 * r0);
    }
}

TEST_CASE("synchronous coupling") {
    LQProblem lq = lq_basic(0.4);
    lq.N = 1.5;
    const ControlProblem prob = lq_to_general(lq);
    const double dtau = 1e-3;

    ParticleEnsemble a = cloud(500, 0.0, 1.0, 2, 0), b = a;
    NoiseStream shared(5, 5);
    for (int k = 0; k < 300; ++k) synchronous_couple_step(a, b, 0.3, -0.2, 0.3, -0.2, prob, dtau, shared);
    CHECK(a.particles == b.particles);

    ParticleEnsemble c = cloud(500, 0.0, 1.0, 2, 0), d = cloud(500, 2.0, 0.5, 9, 0);
    std::vector<double> gap0(500);
    for (std::size_t i = 0; i < gap0.size(); ++i) gap0[i] = c.particles[i] - d.particles[i];
    NoiseStream shared2(6, 6);
    double prev_msq = 1e300;
    const int steps = 1000;
    for (int k = 0; k < steps; ++k) {
        synchronous_couple_step(c, d, 0.3, 0.0, 0.3, 0.0, prob, dtau, shared2);
        double msq = 0.0;
        for (std::size_t i = 0; i < gap0.size(); ++i) msq += std::pow(c.particles[i] - d.particles[i], 2);
        CHECK(msq <= prev_msq);
        prev_msq = msq;
    }
    const double factor = std::pow(1.0 - lq.N * dtau, steps);
    CHECK(factor == doctest::Approx(std::exp(-lq.N * steps * dtau)).epsilon(1e-3));
    for (std::size_t i = 0; i < gap0.size(); ++i) {
        CHECK(c.particles[i] - d.particles[i] == doctest::Approx(factor * gap0[i]).epsilon(1e-9));
    }
}

TEST_CASE("sequential restart") {
    const auto grid = linspace(-10.0, 10.0, 2001);
    LQProblem lq = lq_basic(0.0);
    lq.Q = 0.2;
    const ControlProblem prob = lq_to_general(lq);
    const double p = 0.9, u_star = (lq.B * p - lq.Q) / lq.N;
    const RestartDecision keep = sequential_restart(u_star, 0.0, p, 0.0, prob, grid);
    CHECK_FALSE(keep.restarted);
    CHECK(keep.u == u_star);

    // quartic double well at x = 0 with p = S = 0: peaks near ±1, the right one higher
    const ControlProblem dw = double_well(1.0, 0.0, Interval{});
    double lower = -1.0;
    for (int k = 0; k < 200000; ++k) lower = deterministic_step(lower, 0.0, 0.0, 0.0, dw, 1e-3);
    CHECK(lower < 0.0);
    const RestartDecision r = sequential_restart(lower, 0.0, 0.0, 0.0, dw, grid);
    CHECK(r.restarted);
    CHECK(r.u > 0.9);
    CHECK(r.u < 1.1);
    CHECK(r.h_after > r.h_before);
    CHECK(classical_value_rhs(0.0, r.u, 0.0, 0.0, 0.0, dw) > classical_value_rhs(0.0, lower, 0.0, 0.0, 0.0, dw));
}
