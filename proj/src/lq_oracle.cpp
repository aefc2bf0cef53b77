#include "cpvi/lq_oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "cpvi/error.hpp"

namespace cpvi {

namespace {

constexpr double kDenominatorFloor = 1e-12;

void require_denominator(double d, const char* what) {
    if (std::abs(d) < kDenominatorFloor) {
        fail(ErrorCode::DegenerateParameters, std::string("vanishing denominator: ") + what);
    }
}

LQState axpy(const LQState& s, double h, const LQState& d) {
    return {s.a1 + h * d.a1, s.a2 + h * d.a2, s.I1 + h * d.I1, s.I2 + h * d.I2,
            s.mu + h * d.mu, s.var + h * d.var, s.tau + h * d.tau};
}

}  // namespace

InitialCoeffs initial_coeffs(const LQProblem& lq, double mu0) {
    const double beta = lq.discount;
    const double curv = beta - 2.0 * lq.A - lq.C * lq.C;
    const double lin = beta - lq.A;
    require_denominator(curv, "beta - 2A - C^2");
    require_denominator(lin, "beta - A");
    InitialCoeffs out;
    out.a2 = -lq.M / curv;
    out.a1 = -lq.M * lq.B * mu0 / (lin * curv) - lq.P / lin;
    return out;
}

double initial_constant(const LQProblem& lq, double mu0, double var0) {
    const double beta = lq.discount;
    const double curv = beta - 2.0 * lq.A - lq.C * lq.C;
    const double lin = beta - lq.A;
    require_denominator(curv, "beta - 2A - C^2");
    require_denominator(lin, "beta - A");
    const double drift_mean = lq.B * mu0;
    double running = -0.5 * lq.N * (mu0 * mu0 + var0) - lq.Q * mu0;
    if (lq.temperature > 0.0) running += lq.temperature * gaussian_entropy(var0);
    return -lq.M * drift_mean * drift_mean / (beta * lin * curv) - lq.P * drift_mean / (beta * lin) +
           running / beta;
}

LQState initial_state(const LQProblem& lq, double mu0, double var0) {
    const InitialCoeffs c = initial_coeffs(lq, mu0);
    LQState s;
    s.a1 = c.a1;
    s.a2 = c.a2;
    s.mu = mu0;
    s.var = var0;
    return s;
}

LQState lq_ode_rhs(const LQState& s, const LQProblem& lq) {
    const double A = lq.A, B = lq.B, C = lq.C, M = lq.M, N = lq.N, P = lq.P, Q = lq.Q;
    const double beta = lq.discount, lam = lq.temperature;
    LQState d;
    d.a2 = (C * C + 2.0 * A + 2.0 * B * B * s.I2 - beta) * s.a2 - M - N * B * B * s.I2 * s.I2;
    d.I2 = -N * s.I2 + s.a2;
    // s.mu is the control mean at x = 0, i.e. e^{-Nτ}μ0 + B·I1 - (1-e^{-Nτ})Q/N.
    d.a1 = (A - beta) * s.a1 - P + (B * s.a1 - Q) * B * s.I2 + B * (s.a2 - N * s.I2) * s.mu;
    d.I1 = -N * s.I1 + s.a1;
    d.mu = -N * s.mu + B * s.a1 - Q;
    d.var = -2.0 * N * s.var + 2.0 * lam;
    d.tau = 1.0;
    return d;
}

LQStationary stationary_coeffs(const LQProblem& lq) {
    const double s = lq.discount - lq.C * lq.C - 2.0 * lq.A;
    if (!(s > 0.0)) fail(ErrorCode::DegenerateParameters, "beta - C^2 - 2A must be positive");
    LQStationary out;
    const double root = std::sqrt(s * s + 4.0 * lq.M * lq.B * lq.B / lq.N);
    out.a2_star = -2.0 * lq.M / (s + root);
    const double denom = lq.N * (lq.A - lq.discount) + lq.B * lq.B * out.a2_star;
    require_denominator(denom, "N(A - beta) + B^2 a2*");
    out.a1_star = (lq.B * lq.Q * out.a2_star + lq.N * lq.P) / denom;
    out.I2_star = out.a2_star / lq.N;
    return out;
}

OUMoments ou_moments(double N, double lam, double mu0, double var0, double drift_const, double tau) {
    if (!(N > 0.0)) fail(ErrorCode::InvalidArgument, "ou_moments requires N > 0");
    if (!(var0 >= 0.0)) fail(ErrorCode::InvalidArgument, "ou_moments requires var0 >= 0");
    if (!(tau >= 0.0)) fail(ErrorCode::InvalidArgument, "ou_moments requires tau >= 0");
    const double e1 = std::exp(-N * tau);
    const double e2 = std::exp(-2.0 * N * tau);
    return {e1 * mu0 + (1.0 - e1) * drift_const / N, e2 * var0 + lam * (1.0 - e2) / N};
}

double gaussian_entropy(double var) {
    if (!(var > 0.0)) fail(ErrorCode::NonPositiveVariance, "entropy of a non-positive variance");
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var);
}

std::vector<LQState> integrate_oracle(const LQProblem& lq, const LQState& init, double tau_max,
                                      double dtau, double cadence, Integrator integrator) {
    if (!(dtau > 0.0)) fail(ErrorCode::InvalidArgument, "dtau must be positive");
    const long steps = std::lround(tau_max / dtau);
    const long every = std::max(1L, std::lround(cadence / dtau));
    std::vector<LQState> out;
    out.reserve(static_cast<std::size_t>(steps / every + 2));
    LQState s = init;
    out.push_back(s);
    for (long k = 1; k <= steps; ++k) {
        if (integrator == Integrator::Euler) {
            s = axpy(s, dtau, lq_ode_rhs(s, lq));
        } else {
            const LQState k1 = lq_ode_rhs(s, lq);
            const LQState k2 = lq_ode_rhs(axpy(s, 0.5 * dtau, k1), lq);
            const LQState k3 = lq_ode_rhs(axpy(s, 0.5 * dtau, k2), lq);
            const LQState k4 = lq_ode_rhs(axpy(s, dtau, k3), lq);
            LQState sum = axpy(axpy(axpy(k1, 2.0, k2), 2.0, k3), 1.0, k4);
            s = axpy(s, dtau / 6.0, sum);
        }
        s.tau = init.tau + static_cast<double>(k) * dtau;
        if (k % every == 0 || k == steps) out.push_back(s);
    }
    return out;
}

bool YZCertificate::all_nonpositive() const {
    for (const auto& p : points) {
        if (p.product > 0.0) return false;
    }
    return true;
}

YZCertificate yz_certificate(const LQProblem& lq, double mu_gap, double a1_gap0, double tau_max,
                             double dtau) {
    if (!(dtau > 0.0)) fail(ErrorCode::InvalidArgument, "dtau must be positive");
    if (lq.B == 0.0 || lq.M == 0.0) {
        fail(ErrorCode::DegenerateParameters, "Y/Z certificate needs B != 0 and M != 0");
    }
    if (a1_gap0 == 0.0) fail(ErrorCode::DegenerateParameters, "initial a1 gap must be non-zero");
    const double A = lq.A, B = lq.B, N = lq.N, beta = lq.discount;
    double a2 = initial_coeffs(lq, 0.0).a2;
    double I2 = 0.0;
    double D = a1_gap0;  // Δa1
    double E = 0.0;      // ΔI1
    YZCertificate cert;
    auto record = [&](double tau) {
        const double g = a2 - N * I2;
        const double mu_part = std::exp(-N * tau) * mu_gap;  // Z·Δa1
        YZPoint pt{tau, E / D, mu_part / D, a2, I2, D, 0.0, 0.0};
        pt.coefficient = B * g * pt.Z + B * B * g * pt.Y + A + B * B * I2;
        pt.product = B * g * mu_part * D + B * B * g * E * D + (A + B * B * I2) * D * D;
        if (D == 0.0) pt.coefficient = std::numeric_limits<double>::quiet_NaN();
        cert.points.push_back(pt);
    };
    const long steps = std::lround(tau_max / dtau);
    record(0.0);
    for (long k = 1; k <= steps; ++k) {
        const double tau0 = static_cast<double>(k - 1) * dtau;
        const double g = a2 - N * I2;
        // Δμ = e^{-Nτ}Δμ0 + B·ΔI1 for runs that share a2 and I2.
        const double dmu = std::exp(-N * tau0) * mu_gap + B * E;
        const double dD = (A - beta + B * B * I2) * D + B * g * dmu;
        const double dE = -N * E + D;
        const double da2 = (lq.C * lq.C + 2.0 * A + 2.0 * B * B * I2 - beta) * a2 - lq.M -
                           N * B * B * I2 * I2;
        const double dI2 = -N * I2 + a2;
        const double next_D = D + dtau * dD;
        E += dtau * dE;
        a2 += dtau * da2;
        I2 += dtau * dI2;
        const double tau = static_cast<double>(k) * dtau;
        if (!cert.gap_crossed_zero && (next_D == 0.0 || (next_D > 0.0) != (D > 0.0))) {
            cert.gap_crossed_zero = true;
            cert.first_crossing = tau;
        }
        D = next_D;
        record(tau);
    }
    return cert;
}

}  // namespace cpvi
