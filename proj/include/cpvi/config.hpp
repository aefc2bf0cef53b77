#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cpvi {

/// Run configuration. Optional fields are filled by resolve() from the
/// problem's builtin defaults; the resolved config is what gets echoed.
struct ExperimentConfig {
    std::string mode = "relaxed";      // relaxed | classical | classical_restart
    std::string backend = "quadratic";  // quadratic | grid
    std::string problem = "lq_default"; // lq | lq_default | lq_prop64 | double_well
    std::optional<double> lq_A, lq_B, lq_C, lq_M, lq_N, lq_P, lq_Q;
    std::optional<double> lambda;
    std::optional<double> beta;
    double dtau = 1e-3;
    double tau_max = 50.0;
    long particles = 10000;
    double x_min = -3.0;
    double x_max = 3.0;
    long nodes = 101;
    double u_min = -10.0;
    double u_max = 10.0;
    long u_nodes = 2001;
    std::uint64_t master_seed = 0;
    double snapshot_cadence = 0.1;
    std::string integrator = "euler";  // oracle only: euler | rk4
    std::string init = "zero";  // zero | rollout | closed_form
    double mu0 = 0.0;
    std::optional<double> var0;
    std::string diagnostics = "auto";
    std::string mc_check = "auto";  // MC conditions that gate compare's exit code
    std::string output_dir = "out";
    std::string probes = "-2,-1,0,1,2";
    double eps_bar = 0.01;
    double eps_under = 0.01;
    bool common_noise = true;
    std::string dump_particles = "auto";  // auto: on when a snapshot holds <= 1000 particles
    long restart_rounds = 8;
    double rollout_dt = 1e-3;
    long rollout_paths = 200;
    double second_a1_offset = 0.0;
    double second_mu_offset = 0.0;
    bool freeze_fields = false;
};

/// Sets one key from its textual value; unknown keys and malformed values
/// raise InvalidConfig.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are rejected.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Fills every optional field and expands diagnostics=auto. Throws InvalidConfig
/// on inconsistent settings.
ExperimentConfig resolve(const ExperimentConfig& cfg);

/// Effective config as text (17 significant digits); parse_config(render_config(c))
/// reproduces c.
std::string render_config(const ExperimentConfig& cfg);

std::vector<double> parse_probes(const ExperimentConfig& cfg);
std::vector<std::string> diagnostic_list(const ExperimentConfig& cfg);
bool has_diagnostic(const ExperimentConfig& cfg, std::string_view name);
/// Roman numerals ("II", "III", ...) of the MC conditions compare checks.
std::vector<std::string> mc_check_list(const ExperimentConfig& cfg);

}  // namespace cpvi
