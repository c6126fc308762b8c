#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sigrule/records.hpp"
#include "sigrule/trace.hpp"
#include "support.hpp"

using namespace sigrule;
using testing::run_cli;
using testing::slurp;

namespace fs = std::filesystem;

namespace {

std::vector<SweepRow> load(const fs::path& p) {
    std::ifstream in(p);
    return read_csv(in);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate") {
    const auto dir = testing::scratch_dir("cli_simulate");
    auto r = run_cli("simulate -d 5 --error-rate 0 --trials 20 --out zero.csv", dir);
    REQUIRE(r.code == 0);
    auto rows = load(dir / "zero.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].fail_any == 0);
    CHECK(rows[0].tau == 100);
    CHECK(rows[0].stack_bound == std::nullopt);
    CHECK(fs::exists(dir / "zero.csv.manifest.json"));

    r = run_cli("simulate -d 9 --error-rate 0.001 --trials 10 --stack-bound 3 --out zero.csv", dir);
    REQUIRE(r.code == 0);
    rows = load(dir / "zero.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].tau == 180);
    CHECK(rows[1].stack_bound == 3);
    CHECK(read_manifest((dir / "zero.csv").string()).size() == 2);

    r = run_cli("simulate -d 5 --error-rate 0.01 --trials 10 --checkpoints 10,30 --rounds 50 --out cp.csv", dir);
    REQUIRE(r.code == 0);
    rows = load(dir / "cp.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].tau == 10);
    CHECK(rows[2].tau == 50);
    fs::remove_all(dir);
}

TEST_CASE("results do not depend on the thread count") {
    const auto dir = testing::scratch_dir("cli_threads");
    const std::string args = "simulate -d 5 --error-rate 0.01 --trials 300 --seed 7 ";
    REQUIRE(run_cli(args + "--threads 1 --out one.csv", dir).code == 0);
    REQUIRE(run_cli(args + "--threads 3 --out three.csv", dir).code == 0);
    CHECK(slurp(dir / "one.csv") == slurp(dir / "three.csv"));
    CHECK(load(dir / "one.csv")[0].fail_any > 0);
    fs::remove_all(dir);
}

TEST_CASE("sweep writes sorted rows and resumes") {
    const auto dir = testing::scratch_dir("cli_sweep");
    const std::string args = "sweep --distances 5,3,7 --error-rates 0.002:0.01:5 --trials 20 --rounds 30 --out s.csv";
    REQUIRE(run_cli(args, dir).code == 0);
    const auto full = slurp(dir / "s.csv");
    const auto rows = load(dir / "s.csv");
    REQUIRE(rows.size() == 15);
    CHECK(std::is_sorted(rows.begin(), rows.end(), row_order_less));
    CHECK(rows.front().eps_d == 0.002);
    CHECK(rows[4].eps_d == 0.01);
    for (const auto& r : rows) CHECK(r.master_seed == 1);

    // Drop some rows, then resume: only the missing cells are recomputed and
    // the file comes back identical.
    std::istringstream lines(full);
    std::string line, kept;
    for (int i = 0; std::getline(lines, line); ++i)
        if (i < 9) kept += line + "\n";
    { std::ofstream(dir / "s.csv") << kept; }
    const auto resumed = run_cli(args, dir);
    REQUIRE(resumed.code == 0);
    CHECK(slurp(dir / "s.csv") == full);

    // A different sweep may not write into the same file.
    CHECK(run_cli("sweep --distances 5 --error-rates 0.002 --trials 20 --out s.csv", dir).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("analyze") {
    const auto dir = testing::scratch_dir("cli_analyze");
    std::vector<SweepRow> rows;
    for (int d : {5, 7, 9}) {
        for (double eps : {0.002, 0.003, 0.004}) {
            SweepRow r;
            r.d = d;
            r.eps_d = r.eps_m = eps;
            r.tau = 20 * d;
            r.trials = 1000000;
            r.eps_l = 5.7e-4 / d * std::pow(eps / 0.0068, 0.5 * (d + 1));
            r.p_l = 0.75 * (1.0 - std::pow(1.0 - r.eps_l / 0.75, r.tau));
            r.fail_any = r.fail_h = std::max<long>(1, std::lround(r.p_l * 1e6));
            const auto ci = wilson_interval(r.fail_any, r.trials);
            r.ci_low = ci.low;
            r.ci_high = ci.high;
            rows.push_back(r);
        }
    }
    {
        std::ofstream out(dir / "in.csv");
        write_csv(out, rows);
    }
    auto r = run_cli("analyze --input in.csv --out fits.json --unweighted", dir);
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(slurp(dir / "fits.json"));
    CHECK(j["groups"][0]["eps_c"].get<double>() == doctest::Approx(0.0068).epsilon(1e-6));
    CHECK(j["groups"][0]["A"].get<double>() == doctest::Approx(5.7e-4).epsilon(1e-6));
    CHECK(j["weighting"] == "uniform");

    {
        std::ofstream out(dir / "single.csv");
        write_csv(out, std::vector<SweepRow>(rows.begin(), rows.begin() + 3));
    }
    REQUIRE(run_cli("analyze --input single.csv --out single.json", dir).code == 0);
    j = nlohmann::json::parse(slurp(dir / "single.json"));
    CHECK(j["groups"][0]["eps_c_reason"] == "eps_c unidentifiable");
    CHECK(j["weighting"] == "wilson");

    { std::ofstream(dir / "empty.csv") << ""; }
    CHECK(run_cli("analyze --input empty.csv --out e.json", dir).code == 1);
    { std::ofstream(dir / "header.csv") << kCsvHeader << "\n"; }
    CHECK(run_cli("analyze --input header.csv --out e.json", dir).code == 1);
    {
        std::ofstream out(dir / "bad.csv");
        write_csv(out, std::vector<SweepRow>(rows.begin(), rows.begin() + 2));
        out << "5,0.1,0.1\n";
    }
    r = run_cli("analyze --input bad.csv --out e.json", dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("row 4") != std::string::npos);
    CHECK(run_cli("analyze --input missing.csv --out e.json", dir).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("trace") {
    const auto dir = testing::scratch_dir("cli_trace");
    const std::string args = "trace -d 5 --error-rate 0.02 --rounds 20 --seed 3 --inject 1,1 --inject 2,2,V";
    REQUIRE(run_cli(args + " --out a.jsonl", dir).code == 0);
    REQUIRE(run_cli(args + " --out b.jsonl", dir).code == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    std::ifstream in(dir / "a.jsonl");
    const auto frames = read_trace(in);
    REQUIRE(frames.size() == 20);
    CHECK(frames[0].t == 1);
    CHECK(run_cli("trace -d 5 --inject 9,9 --out c.jsonl", dir).code == 1);
    CHECK(run_cli("trace -d 5 --inject nonsense --out c.jsonl", dir).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 1") {
    const auto dir = testing::scratch_dir("cli_usage");
    CHECK(run_cli("", dir).code == 1);
    CHECK(run_cli("bogus", dir).code == 1);
    CHECK(run_cli("simulate --error-rate 0.01", dir).code == 1);
    CHECK(run_cli("simulate -d 2 --error-rate 0.01", dir).code == 1);
    CHECK(run_cli("simulate -d 5 --error-rate 1.5", dir).code == 1);
    CHECK(run_cli("simulate -d 5 --error-rate 0.01 --stack-bound 0", dir).code == 1);
    CHECK(run_cli("simulate -d 5 --error-rate 0.01 --trials 0", dir).code == 1);
    CHECK(run_cli("sweep --distances 5 --error-rates 0.01:0.001", dir).code == 1);
    CHECK(run_cli("rerun --manifest nothing.manifest.json --out x.csv", dir).code == 1);
    CHECK(run_cli("--help", dir).code == 0);
    fs::remove_all(dir);
}

TEST_CASE("output directory from the environment") {
    const auto dir = testing::scratch_dir("cli_env");
    const auto r = run_cli("simulate -d 3 --error-rate 0 --trials 2 >/dev/null; SIGRULE_OUTPUT_DIR=outdir '" SIGRULE_CLI
                           "' simulate -d 3 --error-rate 0 --trials 2",
                           dir);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(fs::exists(dir / "outdir" / "results.csv"));
    CHECK(fs::exists(dir / "outdir" / "results.csv.manifest.json"));
    fs::remove_all(dir);
}

TEST_CASE("rerun reproduces outputs byte for byte") {
    const auto dir = testing::scratch_dir("cli_rerun");
    REQUIRE(run_cli("simulate -d 5 --error-rate 0.01 --trials 100 --seed 4 --out r.csv", dir).code == 0);
    REQUIRE(run_cli("simulate -d 7 --error-rate 0.005 --trials 50 --seed 5 --stack-bound 2 --out r.csv", dir).code == 0);
    REQUIRE(run_cli("rerun --manifest r.csv.manifest.json --out again.csv --threads 2", dir).code == 0);
    CHECK(slurp(dir / "r.csv") == slurp(dir / "again.csv"));
    CHECK(run_cli("rerun --manifest r.csv.manifest.json --out again.csv", dir).code == 1);

    REQUIRE(run_cli("trace -d 5 --error-rate 0.01 --rounds 15 --substeps --out t.jsonl", dir).code == 0);
    REQUIRE(run_cli("rerun --manifest t.jsonl.manifest.json --out t2.jsonl", dir).code == 0);
    CHECK(slurp(dir / "t.jsonl") == slurp(dir / "t2.jsonl"));

    REQUIRE(run_cli("sweep --distances 3,5 --error-rates 0.01,0.02 --trials 30 --rounds 20 --out s.csv", dir).code == 0);
    REQUIRE(run_cli("rerun --manifest s.csv.manifest.json --out s2.csv", dir).code == 0);
    CHECK(slurp(dir / "s.csv") == slurp(dir / "s2.csv"));
    fs::remove_all(dir);
}

}  // TEST_SUITE
