// cpvi: coupled policy–value iteration runs, LQ oracle, two-run coupling and
// post-processing. Exit status: 0 all checks passed, 1 a check failed, 2 error.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "cpvi/config.hpp"
#include "cpvi/error.hpp"
#include "cpvi/runner.hpp"

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "flat key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed (overrides master_seed)");
    cmd->add_option("--out", c.out, "output directory (overrides output_dir)");
    cmd->add_flag("--quiet", c.quiet, "suppress the summary on stdout");
}

cpvi::ExperimentConfig build_config(const Common& c) {
    cpvi::ExperimentConfig cfg = c.config_path.empty() ? cpvi::ExperimentConfig{} : cpvi::load_config(c.config_path);
    if (c.seed) cfg.master_seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    return cfg;
}

int report(const cpvi::RunOutcome& r, bool quiet) {
    if (!quiet) {
        std::cout << "output: " << r.out_dir << '\n' << cpvi::render_summary(r.report);
    }
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous policy-value iteration solver"};
    app.require_subcommand(1);

    Common run_opts, oracle_opts, compare_opts, diag_opts;
    auto* run = app.add_subcommand("run", "coupled policy-value iteration");
    add_common(run, run_opts);
    auto* oracle = app.add_subcommand("oracle", "LQ coefficient ODEs and stationary limits");
    add_common(oracle, oracle_opts);
    auto* compare = app.add_subcommand("compare", "two synchronously coupled initialisations");
    add_common(compare, compare_opts);
    auto* diagnose = app.add_subcommand("diagnose", "recompute checks for an existing run directory");
    std::string diag_dir;
    diagnose->add_option("dir", diag_dir, "run directory")->required()->check(CLI::ExistingDirectory);
    diagnose->add_option("--out", diag_opts.out, "where to write diagnose.csv / diagnose_summary.txt");
    diagnose->add_flag("--quiet", diag_opts.quiet, "suppress the summary on stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;  // --help is not an error
    }

    try {
        if (*run) return report(cpvi::run_coupled(build_config(run_opts)), run_opts.quiet);
        if (*oracle) return report(cpvi::run_oracle(build_config(oracle_opts)), oracle_opts.quiet);
        if (*compare) return report(cpvi::run_compare(build_config(compare_opts)), compare_opts.quiet);
        if (*diagnose) return report(cpvi::run_diagnose(diag_dir, diag_opts.out), diag_opts.quiet);
    } catch (const cpvi::Error& e) {
        std::cerr << "error [" << cpvi::to_string(e.code()) << "]: " << e.detail() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
