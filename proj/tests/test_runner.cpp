#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "cpvi/config.hpp"
#include "cpvi/csv.hpp"
#include "cpvi/error.hpp"
#include "cpvi/runner.hpp"

using namespace cpvi;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "cpvi_unit" / name;
    fs::remove_all(p);
    return p.string();
}

std::string slurp(const std::string& dir, const char* file) { return read_text_file((fs::path(dir) / file).string()); }

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

ExperimentConfig small_quadratic() {
    ExperimentConfig c;
    c.tau_max = 0.5;
    c.particles = 500;
    c.init = "closed_form";
    return c;
}

}  // namespace

TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config(
        "# comment line\n"
        "mode = classical   # trailing comment\n"
        "\n"
        "tau_max=3\n"
        "lq_A = -2\n"
        "common_noise = false\n");
    CHECK(c.mode == "classical");
    CHECK(c.tau_max == 3.0);
    CHECK(*c.lq_A == -2.0);
    CHECK_FALSE(c.common_noise);

    CHECK(code_of([] { parse_config("no_such_key = 1\n"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { parse_config("dtau = 1\ndtau = 2\n"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { parse_config("dtau = fast\n"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { parse_config("just text\n"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("config resolution and round trip") {
    ExperimentConfig c;
    c.problem = "lq_prop64";
    const ExperimentConfig r = resolve(c);
    CHECK(*r.lq_N == 10.0);
    CHECK(*r.lq_M == 1e4);
    CHECK(*r.var0 == doctest::Approx(0.025));
    CHECK(r.diagnostics == "hjb,stationary,gibbs,moments");
    CHECK(r.mc_check == "II,III");
    CHECK(r.dump_particles == "false");

    const ExperimentConfig back = parse_config(render_config(r));
    CHECK(render_config(back) == render_config(r));
    CHECK(render_config(resolve(back)) == render_config(r));

    ExperimentConfig cls;
    cls.mode = "classical";
    cls.particles = 1;
    const ExperimentConfig rc = resolve(cls);
    CHECK(*rc.lambda == 0.0);
    CHECK(rc.mc_check == "V,VI");
    CHECK(rc.dump_particles == "true");

    ExperimentConfig bad = cls;
    bad.lambda = 0.5;
    CHECK(code_of([&] { resolve(bad); }) == ErrorCode::InvalidConfig);
    ExperimentConfig dw;
    dw.problem = "double_well";
    CHECK(code_of([&] { resolve(dw); }) == ErrorCode::InvalidConfig);  // quadratic backend needs LQ
    dw.backend = "grid";
    dw.lq_A = -1.0;
    CHECK(code_of([&] { resolve(dw); }) == ErrorCode::InvalidConfig);
    ExperimentConfig cad;
    cad.snapshot_cadence = 0.0015;
    CHECK(code_of([&] { resolve(cad); }) == ErrorCode::InvalidConfig);
    ExperimentConfig probe;
    probe.probes = "0,5";
    CHECK(code_of([&] { resolve(probe); }) == ErrorCode::InvalidConfig);
    ExperimentConfig mc;
    mc.mc_check = "V";
    CHECK(code_of([&] { resolve(mc); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("single-step run writes two snapshots") {
    ExperimentConfig c = small_quadratic();
    c.tau_max = c.dtau;
    c.output_dir = scratch("one_step");
    const RunOutcome r = run_coupled(c);
    const std::string values = slurp(c.output_dir, "values.csv");
    CHECK(values.rfind("tau,node_x,v,vx,vxx,hjb_residual\n", 0) == 0);
    CHECK(count_lines(values) == 1 + 2 * 101);
    CHECK(slurp(c.output_dir, "coeffs.csv").rfind("tau,a1,a2,I1,I2,mu,var,entropy\n", 0) == 0);
    CHECK(count_lines(slurp(c.output_dir, "coeffs.csv")) == 3);
    CHECK(slurp(c.output_dir, "particles.csv").rfind("tau,state_x,particle_index,u\n", 0) == 0);
    CHECK(slurp(c.output_dir, "diagnostics.csv").rfind("tau,metric,value\n", 0) == 0);
    CHECK(slurp(c.output_dir, "summary.txt").find("all_pass = ") != std::string::npos);
    CHECK(r.exit_code == (r.report.all_pass() ? 0 : 1));
}

TEST_CASE("runs are deterministic and reproducible from the echoed config") {
    ExperimentConfig c = small_quadratic();
    c.output_dir = scratch("det_a");
    run_coupled(c);
    const ExperimentConfig echoed = load_config(c.output_dir + "/config.txt");
    const std::string first = c.output_dir;
    ExperimentConfig again = echoed;
    again.output_dir = scratch("det_b");
    run_coupled(again);
    for (const char* f : {"values.csv", "coeffs.csv", "particles.csv", "diagnostics.csv", "summary.txt"}) {
        CHECK(slurp(first, f) == slurp(again.output_dir, f));
    }
    CHECK(run_coupled(c, Execution::Serial).report.all_pass() == run_coupled(c).report.all_pass());
}

TEST_CASE("zero temperature runs do not depend on the seed") {
    ExperimentConfig c;
    c.mode = "classical";
    c.particles = 1;
    c.tau_max = 0.3;
    c.init = "closed_form";
    c.output_dir = scratch("seed_a");
    run_coupled(c);
    c.master_seed = 987654321;
    const std::string a = c.output_dir;
    c.output_dir = scratch("seed_b");
    run_coupled(c);
    CHECK(slurp(a, "values.csv") == slurp(c.output_dir, "values.csv"));
    CHECK(slurp(a, "coeffs.csv") == slurp(c.output_dir, "coeffs.csv"));
}

TEST_CASE("oracle subcommand") {
    ExperimentConfig c;
    c.output_dir = scratch("oracle");
    const RunOutcome r = run_oracle(c);
    CHECK(r.exit_code == 0);
    CHECK(r.report.find("oracle.a2_rel_err")->value <= 1e-6);
    CHECK(slurp(c.output_dir, "coeffs.csv").rfind("tau,a1,a2,", 0) == 0);

    ExperimentConfig m0 = c;
    m0.problem = "lq";
    m0.lq_A = -1.0;
    m0.lq_B = 1.0;
    m0.lq_C = 0.5;
    m0.lq_M = 0.0;
    m0.lq_N = 1.0;
    m0.lq_P = 0.0;
    m0.lq_Q = 0.0;
    m0.output_dir = scratch("oracle_m0");
    const RunOutcome z = run_oracle(m0);
    CHECK(z.report.find("oracle.a2_final")->value == 0.0);
    CHECK(z.report.find("oracle.a1_final")->value == 0.0);

    ExperimentConfig dw;
    dw.problem = "double_well";
    dw.backend = "grid";
    dw.output_dir = scratch("oracle_dw");
    CHECK(code_of([&] { run_oracle(dw); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("compare of identical runs has zero gaps") {
    ExperimentConfig c = small_quadratic();
    c.tau_max = 0.2;
    c.particles = 200;
    c.output_dir = scratch("cmp_same");
    const RunOutcome r = run_compare(c);
    for (const SeriesPoint& s : r.report.series) {
        if (s.metric.rfind("gap_sq", 0) == 0 || s.metric.rfind("w2", 0) == 0 || s.metric == "value_gap") {
            CHECK(s.value == 0.0);
        }
    }
    CHECK(slurp(c.output_dir + "/a", "values.csv") == slurp(c.output_dir + "/b", "values.csv"));
}

TEST_CASE("frozen fields contract the particle gap at rate -2N") {
    ExperimentConfig c = small_quadratic();
    c.tau_max = 2.0;
    c.particles = 1000;
    c.freeze_fields = true;
    c.second_mu_offset = 2.0;
    c.mc_check = "none";
    c.output_dir = scratch("cmp_frozen");
    const RunOutcome r = run_compare(c);
    const SummaryItem* rate = r.report.find("frozen.gap_sq_rate_rel_err");
    REQUIRE(rate != nullptr);
    CHECK(rate->value <= 0.1);
    CHECK(*rate->pass);
}

TEST_CASE("diagnose recomputes checks from files") {
    ExperimentConfig c = small_quadratic();
    c.output_dir = scratch("diag_src");
    const RunOutcome r = run_coupled(c);
    const RunOutcome d = run_diagnose(c.output_dir, scratch("diag_out"));
    CHECK(d.report.find("monotonicity.max_violation")->value ==
          r.report.find("monotonicity.max_violation")->value);
    CHECK(d.report.find("hjb.final_max_abs") != nullptr);
    CHECK(slurp(d.out_dir, "diagnose_summary.txt").find("all_pass") != std::string::npos);
    CHECK(code_of([] { run_diagnose(scratch("diag_missing")); }) == ErrorCode::Io);
}
