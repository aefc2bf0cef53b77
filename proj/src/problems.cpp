#include "cpvi/problems.hpp"

#include <cmath>

#include "cpvi/error.hpp"

namespace cpvi {

std::vector<std::string> builtin_problems() { return {"lq", "lq_default", "lq_prop64", "double_well"}; }

ControlProblem double_well(double discount, double temperature, Interval domain) {
    ControlProblem prob;
    prob.name = "double_well";
    prob.payoff = [](double x, double u) {
        const double w = u * u - 1.0;
        return -w * w + 0.3 * u - 0.5 * x * x;
    };
    prob.payoff_grad_u = [](double, double u) { return -4.0 * u * (u * u - 1.0) + 0.3; };
    prob.drift = [](double x, double u) { return -x + std::tanh(u); };
    prob.drift_grad_u = [](double, double u) {
        const double t = std::tanh(u);
        return 1.0 - t * t;
    };
    prob.diffusion = [](double, double) { return 0.5; };
    prob.diffusion_grad_u = [](double, double) { return 0.0; };
    prob.discount = discount;
    prob.temperature = temperature;
    prob.control_domain = domain;
    validate(prob);
    return prob;
}

std::optional<LQProblem> config_lq(const ExperimentConfig& c) {
    if (!c.lq_A) return std::nullopt;
    LQProblem lq;
    lq.A = *c.lq_A;
    lq.B = *c.lq_B;
    lq.C = *c.lq_C;
    lq.M = *c.lq_M;
    lq.N = *c.lq_N;
    lq.P = *c.lq_P;
    lq.Q = *c.lq_Q;
    lq.discount = *c.beta;
    lq.temperature = *c.lambda;
    return lq;
}

ControlProblem build_problem(const ExperimentConfig& c) {
    if (!c.beta || !c.lambda) fail(ErrorCode::InvalidConfig, "build_problem needs a resolved config");
    const Interval domain{c.u_min, c.u_max};
    if (c.problem == "double_well") return double_well(*c.beta, *c.lambda, domain);
    const auto lq = config_lq(c);
    if (!lq) fail(ErrorCode::InvalidConfig, "LQ problem without LQ parameters");
    ControlProblem prob = lq_to_general(*lq);
    prob.name = c.problem;
    prob.control_domain = domain;
    return prob;
}

}  // namespace cpvi
