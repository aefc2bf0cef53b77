#pragma once

#include <string>

#include "cpvi/config.hpp"
#include "cpvi/diagnostics.hpp"
#include "cpvi/kernels.hpp"

namespace cpvi {

struct RunOutcome {
    DiagnosticsReport report;
    std::string out_dir;
    int exit_code = 0;  // 0 iff every enabled check passed
};

/// Coupled iteration; writes config.txt, values.csv, coeffs.csv (LQ),
/// particles.csv (dump_particles), diagnostics.csv and summary.txt.
RunOutcome run_coupled(const ExperimentConfig& cfg, Execution exec = Execution::Parallel);

/// Pure LQ coefficient ODEs plus the stationary-limit comparison.
RunOutcome run_oracle(const ExperimentConfig& cfg);

/// Two synchronously coupled runs (the second perturbed by second_a1_offset /
/// second_mu_offset); per-run files go to a/ and b/.
RunOutcome run_compare(const ExperimentConfig& cfg, Execution exec = Execution::Parallel);

/// Recomputes monotonicity, HJB and quadratic-closure checks from the files of
/// an existing run directory; results go to out_dir (defaults to dir).
RunOutcome run_diagnose(const std::string& dir, const std::string& out_dir = "");

/// Renders summary.txt content.
std::string render_summary(const DiagnosticsReport& report);

}  // namespace cpvi
