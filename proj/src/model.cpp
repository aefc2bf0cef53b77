#include "cpvi/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpvi/error.hpp"
#include "cpvi/quadrature.hpp"

namespace cpvi {

void LQProblem::validate() const {
    if (!(M >= 0.0)) fail(ErrorCode::DegenerateParameters, "LQ requires M >= 0");
    if (!(N > 0.0)) fail(ErrorCode::DegenerateParameters, "LQ requires N > 0");
    if (!(A < 0.0)) fail(ErrorCode::DegenerateParameters, "LQ requires A < 0");
    if (!(discount - 2.0 * A - C * C > 0.0)) {
        fail(ErrorCode::DegenerateParameters, "LQ requires beta - 2A - C^2 > 0");
    }
    if (!(discount > 0.0)) fail(ErrorCode::DegenerateParameters, "discount must be positive");
    if (!(temperature >= 0.0)) fail(ErrorCode::DegenerateParameters, "temperature must be >= 0");
}

void validate(const ControlProblem& prob) {
    if (!(prob.discount > 0.0)) fail(ErrorCode::InvalidArgument, "discount must be positive");
    if (!(prob.temperature >= 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be >= 0");
    if (!(prob.control_domain.lo < prob.control_domain.hi)) {
        fail(ErrorCode::InvalidArgument, "control quadrature domain is degenerate");
    }
    if (prob.state_dim < 1 || prob.control_dim < 1) {
        fail(ErrorCode::InvalidArgument, "dimensions must be positive");
    }
    if (!prob.drift || !prob.diffusion || !prob.payoff || !prob.drift_grad_u ||
        !prob.diffusion_grad_u || !prob.payoff_grad_u) {
        fail(ErrorCode::InvalidArgument, "problem '" + prob.name + "' has unset coefficient functions");
    }
}

void require_scalar(const ControlProblem& prob) {
    if (prob.state_dim != 1 || prob.control_dim != 1) {
        fail(ErrorCode::InvalidArgument, "numeric backends require state_dim = control_dim = 1");
    }
}

void validate_gradients(const ControlProblem& prob, std::span<const double> xs,
                        std::span<const double> us, double rel_tol) {
    if (xs.size() != us.size()) fail(ErrorCode::SizeMismatch, "validate_gradients: xs/us sizes differ");
    struct Pair {
        const char* name;
        const CoefficientFn* base;
        const CoefficientFn* grad;
    };
    const Pair pairs[] = {{"drift", &prob.drift, &prob.drift_grad_u},
                          {"diffusion", &prob.diffusion, &prob.diffusion_grad_u},
                          {"payoff", &prob.payoff, &prob.payoff_grad_u}};
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double x = xs[k], u = us[k];
        const double eps = 1e-5 * std::max(1.0, std::abs(u));
        for (const auto& pair : pairs) {
            const double fd = ((*pair.base)(x, u + eps) - (*pair.base)(x, u - eps)) / (2.0 * eps);
            const double g = (*pair.grad)(x, u);
            if (std::abs(g - fd) > rel_tol * std::max(1.0, std::abs(g))) {
                std::ostringstream msg;
                msg << pair.name << "_grad_u disagrees with finite differences at (x=" << x
                    << ", u=" << u << "): supplied " << g << ", numeric " << fd;
                fail(ErrorCode::InvalidArgument, msg.str());
            }
        }
    }
}

double hamiltonian(const ControlProblem& prob, double x, double u, double p, double S) {
    const double sigma = prob.diffusion(x, u);
    return prob.payoff(x, u) + prob.drift(x, u) * p + 0.5 * sigma * sigma * S;
}

double grad_u_hamiltonian(const ControlProblem& prob, double x, double u, double p, double S) {
    return prob.payoff_grad_u(x, u) + prob.drift_grad_u(x, u) * p +
           prob.diffusion(x, u) * prob.diffusion_grad_u(x, u) * S;
}

std::vector<double> gibbs_density(const ControlProblem& prob, double x, double p, double S,
                                  std::span<const double> u_grid) {
    if (prob.temperature == 0.0) fail(ErrorCode::TemperatureZero, "Gibbs density needs lambda > 0");
    require_strictly_increasing(u_grid, "gibbs_density u_grid");
    std::vector<double> log_density(u_grid.size());
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
        log_density[i] = hamiltonian(prob, x, u_grid[i], p, S) / prob.temperature;
    }
    const double peak = *std::max_element(log_density.begin(), log_density.end());
    if (!std::isfinite(peak)) fail(ErrorCode::NonNormalizable, "Hamiltonian is not finite on the grid");
    std::vector<double> density(u_grid.size());
    for (std::size_t i = 0; i < u_grid.size(); ++i) density[i] = std::exp(log_density[i] - peak);
    const double mass = trapezoid(u_grid, density);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        fail(ErrorCode::NonNormalizable, "quadrature mass of exp(H/lambda) vanished");
    }
    for (double& d : density) d /= mass;
    return density;
}

RelaxedCoefficients relaxed_coefficients(const ControlProblem& prob, double x,
                                         std::span<const double> particles) {
    if (particles.empty()) fail(ErrorCode::EmptyEnsemble, "relaxed_coefficients on empty ensemble");
    RelaxedCoefficients acc;
    for (const double u : particles) {
        const double sigma = prob.diffusion(x, u);
        acc.drift += prob.drift(x, u);
        acc.diffusion_sq += sigma * sigma;
        acc.payoff += prob.payoff(x, u);
    }
    const double n = static_cast<double>(particles.size());
    acc.drift /= n;
    acc.diffusion_sq /= n;
    acc.payoff /= n;
    return acc;
}

ControlProblem lq_to_general(const LQProblem& lq) {
    lq.validate();
    ControlProblem prob;
    prob.name = "lq";
    prob.drift = [A = lq.A, B = lq.B](double x, double u) { return A * x + B * u; };
    prob.diffusion = [C = lq.C](double x, double) { return C * x; };
    prob.payoff = [lq](double x, double u) {
        return -(0.5 * lq.M * x * x + 0.5 * lq.N * u * u + lq.P * x + lq.Q * u);
    };
    prob.drift_grad_u = [B = lq.B](double, double) { return B; };
    prob.diffusion_grad_u = [](double, double) { return 0.0; };
    prob.payoff_grad_u = [N = lq.N, Q = lq.Q](double, double u) { return -(N * u + Q); };
    prob.discount = lq.discount;
    prob.temperature = lq.temperature;
    prob.lq = lq;
    return prob;
}

}  // namespace cpvi
