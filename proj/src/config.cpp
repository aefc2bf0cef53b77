#include "cpvi/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "cpvi/csv.hpp"
#include "cpvi/error.hpp"

namespace cpvi {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* want) {
    fail(ErrorCode::InvalidConfig,
         "key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " + want);
}

double to_real(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a real");
    return out;
}

long to_int(std::string_view key, std::string_view v) {
    long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "a boolean");
}

struct Key {
    const char* name;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

std::string opt(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

#define CPVI_REAL(field) \
    Key { #field, [](ExperimentConfig& c, std::string_view v) { c.field = to_real(#field, v); }, \
          [](const ExperimentConfig& c) { return format_real(c.field); } }
#define CPVI_OPT(field) \
    Key { #field, [](ExperimentConfig& c, std::string_view v) { c.field = to_real(#field, v); }, \
          [](const ExperimentConfig& c) { return opt(c.field); } }
#define CPVI_INT(field) \
    Key { #field, [](ExperimentConfig& c, std::string_view v) { c.field = to_int(#field, v); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.field); } }
#define CPVI_BOOL(field) \
    Key { #field, [](ExperimentConfig& c, std::string_view v) { c.field = to_bool(#field, v); }, \
          [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); } }
#define CPVI_TEXT(field) \
    Key { #field, [](ExperimentConfig& c, std::string_view v) { c.field = std::string(v); }, \
          [](const ExperimentConfig& c) { return c.field; } }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        CPVI_TEXT(mode), CPVI_TEXT(backend), CPVI_TEXT(problem),
        CPVI_OPT(lq_A), CPVI_OPT(lq_B), CPVI_OPT(lq_C), CPVI_OPT(lq_M), CPVI_OPT(lq_N),
        CPVI_OPT(lq_P), CPVI_OPT(lq_Q), CPVI_OPT(lambda), CPVI_OPT(beta),
        CPVI_REAL(dtau), CPVI_REAL(tau_max), CPVI_INT(particles),
        CPVI_REAL(x_min), CPVI_REAL(x_max), CPVI_INT(nodes),
        CPVI_REAL(u_min), CPVI_REAL(u_max), CPVI_INT(u_nodes),
        Key{"master_seed",
            [](ExperimentConfig& c, std::string_view v) { c.master_seed = to_u64("master_seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.master_seed); }},
        CPVI_REAL(snapshot_cadence), CPVI_TEXT(integrator), CPVI_TEXT(init), CPVI_REAL(mu0), CPVI_OPT(var0),
        CPVI_TEXT(diagnostics), CPVI_TEXT(mc_check), CPVI_TEXT(output_dir), CPVI_TEXT(probes),
        CPVI_REAL(eps_bar), CPVI_REAL(eps_under), CPVI_BOOL(common_noise), CPVI_TEXT(dump_particles),
        CPVI_INT(restart_rounds), CPVI_REAL(rollout_dt), CPVI_INT(rollout_paths),
        CPVI_REAL(second_a1_offset), CPVI_REAL(second_mu_offset), CPVI_BOOL(freeze_fields),
    };
    return table;
}

#undef CPVI_REAL
#undef CPVI_OPT
#undef CPVI_INT
#undef CPVI_BOOL
#undef CPVI_TEXT

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorCode::InvalidConfig, msg); }

const std::set<std::string> kDiagnostics = {"monotonicity", "hjb",      "stationary", "quadratic_fit",
                                            "gibbs",        "moments",  "gradient",   "restart"};

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!piece.empty()) out.emplace_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string auto_diagnostics(const ExperimentConfig& c, bool lq) {
    std::vector<std::string> d;
    const bool relaxed = c.mode == "relaxed";
    if (c.mode == "classical_restart") return "restart,gradient";
    if (c.init != "zero") d.push_back("monotonicity");
    d.push_back("hjb");
    if (lq && c.backend == "quadratic") d.push_back("stationary");
    if (lq && c.backend == "grid") d.push_back("quadratic_fit");
    // the 0.02 Gibbs W2 tolerance presumes a large ensemble
    if (relaxed && c.particles >= 5000) d.push_back("gibbs");
    if (relaxed && lq) d.push_back("moments");
    if (!relaxed) d.push_back("gradient");
    std::string out;
    for (const auto& s : d) out += (out.empty() ? "" : ",") + s;
    return out;
}

bool multiple_of(double a, double b) {
    const double r = a / b;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r)) && std::round(r) >= 1.0;
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& k : keys()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    invalid("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            invalid("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) invalid("line " + std::to_string(line_no) + ": empty key");
        if (!seen.insert(std::string(key)).second) {
            invalid("line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        }
        apply_setting(cfg, key, value);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

ExperimentConfig resolve(const ExperimentConfig& in) {
    ExperimentConfig c = in;
    if (c.mode != "relaxed" && c.mode != "classical" && c.mode != "classical_restart") {
        invalid("mode must be relaxed, classical or classical_restart");
    }
    if (c.backend != "quadratic" && c.backend != "grid") invalid("backend must be quadratic or grid");
    if (c.init != "zero" && c.init != "rollout" && c.init != "closed_form") {
        invalid("init must be zero, rollout or closed_form");
    }
    if (c.integrator != "euler" && c.integrator != "rk4") invalid("integrator must be euler or rk4");

    struct Defaults {
        double A, B, C, M, N, P, Q, beta, lambda;
    };
    bool lq = true;
    Defaults d{-1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.25};
    if (c.problem == "lq_default") {
        d = {-1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.25};
    } else if (c.problem == "lq_prop64") {
        d = {-10.0, 1.0, 0.5, 1e4, 10.0, 0.0, 0.0, 1.0, 0.25};
    } else if (c.problem == "double_well") {
        lq = false;
    } else if (c.problem != "lq") {
        invalid("unknown problem '" + c.problem + "' (lq, lq_default, lq_prop64, double_well)");
    }
    if (lq) {
        if (!c.lq_A) c.lq_A = d.A;
        if (!c.lq_B) c.lq_B = d.B;
        if (!c.lq_C) c.lq_C = d.C;
        if (!c.lq_M) c.lq_M = d.M;
        if (!c.lq_N) c.lq_N = d.N;
        if (!c.lq_P) c.lq_P = d.P;
        if (!c.lq_Q) c.lq_Q = d.Q;
    } else if (c.lq_A || c.lq_B || c.lq_C || c.lq_M || c.lq_N || c.lq_P || c.lq_Q) {
        invalid("lq_* keys only apply to LQ problems");
    }
    if (!c.beta) c.beta = d.beta;
    const bool relaxed = c.mode == "relaxed";
    if (relaxed) {
        if (!c.lambda) c.lambda = d.lambda;
        if (!(*c.lambda > 0.0)) invalid("mode=relaxed requires lambda > 0");
    } else {
        if (c.lambda && *c.lambda != 0.0) invalid("classical modes run at lambda = 0; remove the lambda key");
        c.lambda = 0.0;
    }
    if (!c.var0) c.var0 = relaxed ? (lq ? *c.lambda / *c.lq_N : *c.lambda) : 0.0;

    if (!(*c.beta > 0.0)) invalid("beta must be positive");
    if (!(c.dtau > 0.0)) invalid("dtau must be positive");
    if (!(c.tau_max >= c.dtau)) invalid("tau_max must be at least dtau");
    if (!multiple_of(c.snapshot_cadence, c.dtau)) invalid("snapshot_cadence must be a positive multiple of dtau");
    if (relaxed && c.particles < 50) invalid("relaxed mode needs particles >= 50 for entropy estimates");
    if (!relaxed && c.particles < 1) invalid("particles must be >= 1");
    if (relaxed && !(*c.var0 > 0.0)) invalid("relaxed mode needs var0 > 0");
    if (*c.var0 < 0.0) invalid("var0 must be non-negative");
    if (c.nodes < 5) invalid("nodes must be >= 5");
    if (!(c.x_min < c.x_max)) invalid("x_min must be below x_max");
    if (!(c.u_min < c.u_max)) invalid("u_min must be below u_max");
    if (c.u_nodes < 3) invalid("u_nodes must be >= 3");
    if (c.backend == "quadratic" && !lq) invalid("the quadratic backend needs an LQ problem");
    if (c.mode == "classical_restart" && c.backend != "grid") invalid("classical_restart needs the grid backend");
    if (c.init == "closed_form" && !lq) invalid("init=closed_form needs an LQ problem");
    if (c.rollout_paths < 100) invalid("rollout_paths must be >= 100");
    if (!(c.rollout_dt > 0.0)) invalid("rollout_dt must be positive");
    if (!(c.eps_bar > 0.0) || !(c.eps_under > 0.0)) invalid("eps_bar and eps_under must be positive");
    if (c.restart_rounds < 1) invalid("restart_rounds must be >= 1");
    if (c.output_dir.empty()) invalid("output_dir must not be empty");
    (void)parse_probes(c);

    if (c.dump_particles == "auto") {
        // count what one snapshot would write: every grid node carries its own cloud
        const long states = c.backend == "grid" ? c.nodes : 1;
        c.dump_particles = c.particles * states <= 1000 ? "true" : "false";
    } else if (c.dump_particles != "true" && c.dump_particles != "false") {
        invalid("dump_particles must be auto, true or false");
    }

    if (c.diagnostics == "auto") {
        c.diagnostics = auto_diagnostics(c, lq);
    } else if (c.diagnostics == "none") {
        c.diagnostics.clear();
    }
    for (const auto& name : split_list(c.diagnostics)) {
        if (!kDiagnostics.count(name)) invalid("unknown diagnostic '" + name + "'");
    }

    if (c.mc_check == "auto") {
        c.mc_check = relaxed ? "II,III" : "V,VI";
    } else if (c.mc_check == "none") {
        c.mc_check.clear();
    }
    const std::set<std::string> allowed = relaxed ? std::set<std::string>{"I", "II", "III"}
                                                  : std::set<std::string>{"IV", "V", "VI"};
    for (const auto& name : split_list(c.mc_check)) {
        if (!allowed.count(name)) {
            invalid("mc_check item '" + name + "' does not apply to mode " + c.mode +
                    (relaxed ? " (I, II, III)" : " (IV, V, VI)"));
        }
    }
    return c;
}

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const auto& k : keys()) {
        const std::string v = k.get(cfg);
        const std::string_view name = k.name;
        if (v.empty() && name != "diagnostics" && name != "mc_check") continue;
        out << k.name << " = " << (v.empty() ? "none" : v) << '\n';
    }
    return out.str();
}

std::vector<double> parse_probes(const ExperimentConfig& cfg) {
    std::vector<double> out;
    for (const auto& p : split_list(cfg.probes)) out.push_back(to_real("probes", p));
    if (out.empty()) invalid("probes must list at least one state");
    for (double x : out) {
        if (x < cfg.x_min || x > cfg.x_max) invalid("probe " + format_real(x) + " lies outside [x_min, x_max]");
    }
    return out;
}

std::vector<std::string> diagnostic_list(const ExperimentConfig& cfg) {
    if (cfg.diagnostics == "none") return {};
    return split_list(cfg.diagnostics);
}

std::vector<std::string> mc_check_list(const ExperimentConfig& cfg) {
    if (cfg.mc_check == "none") return {};
    return split_list(cfg.mc_check);
}

bool has_diagnostic(const ExperimentConfig& cfg, std::string_view name) {
    const auto list = diagnostic_list(cfg);
    return std::find(list.begin(), list.end(), name) != list.end();
}

}  // namespace cpvi
