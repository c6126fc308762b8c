// Command-line front end: simulate, sweep, analyze, trace, rerun.
//
// Exit codes: 0 success, 1 usage or malformed input, 2 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigrule/analysis.hpp"
#include "sigrule/montecarlo.hpp"
#include "sigrule/records.hpp"
#include "sigrule/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace sigrule;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string default_output(const std::string& name) {
    const char* dir = std::getenv("SIGRULE_OUTPUT_DIR");
    if (dir == nullptr || *dir == '\0') return name;
    return (fs::path(dir) / name).string();
}

void ensure_parent(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

// Writes through a temporary file so readers never see half a file.
void write_atomically(const std::string& path, const std::string& content) {
    ensure_parent(path);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

ordered_json bound_json(const std::optional<int>& b) {
    if (b) return *b;
    return "inf";
}

std::optional<int> bound_from(const ordered_json& j) {
    if (j.is_string()) return parse_stack_bound(j.get<std::string>());
    return j.get<int>();
}

std::optional<int> parse_bound_flag(const std::string& text) {
    try {
        return parse_stack_bound(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--stack-bound: ") + e.what());
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& text, const char* flag) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !std::isfinite(v)) throw UsageError(std::string(flag) + ": bad number '" + text + "'");
    return v;
}

// "start:stop:count" (log-spaced, both ends included) or "a,b,c".
std::vector<double> parse_rates(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream s(text);
        std::string item;
        while (std::getline(s, item, ':')) parts.push_back(item);
        if (parts.size() != 3) throw UsageError("--error-rates: expected start:stop:count");
        const double a = parse_double(parts[0], "--error-rates");
        const double b = parse_double(parts[1], "--error-rates");
        int n = 0;
        try {
            n = std::stoi(parts[2]);
        } catch (const std::exception&) {
            throw UsageError("--error-rates: bad count '" + parts[2] + "'");
        }
        if (!(a > 0.0) || !(b > 0.0) || n < 1) throw UsageError("--error-rates: need positive rates and count >= 1");
        if (n == 1 && a != b) throw UsageError("--error-rates: a single point needs start == stop");
        for (int i = 0; i < n; ++i) {
            if (i == 0) {
                out.push_back(a);
            } else if (i == n - 1) {
                out.push_back(b);
            } else {
                const double f = static_cast<double>(i) / static_cast<double>(n - 1);
                out.push_back(std::exp(std::log(a) + f * (std::log(b) - std::log(a))));
            }
        }
    } else {
        for (const auto& item : split_list(text)) out.push_back(parse_double(item, "--error-rates"));
    }
    if (out.empty()) throw UsageError("--error-rates: no rates given");
    return out;
}

template <typename F>
void as_usage(F&& f) {
    try {
        f();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------- simulate

struct SimulateParams {
    int d = 0;
    double eps_d = 0.0;
    double eps_m = 0.0;
    int rounds = 0;
    std::vector<int> checkpoints;  // always ends with `rounds`
    long trials = 0;
    std::uint64_t seed = 0;
    std::optional<int> stack_bound;

    [[nodiscard]] TrialConfig config() const {
        TrialConfig c;
        c.d = d;
        c.eps_d = eps_d;
        c.eps_m = eps_m;
        c.tau = rounds;
        c.stack_bound = stack_bound;
        c.master_seed = seed;
        return c;
    }

    void validate() const {
        as_usage([&] { config().validate(); });
        if (trials < 1) throw UsageError("--trials must be >= 1");
        if (checkpoints.empty() || checkpoints.back() != rounds || checkpoints.front() < 1 ||
            !std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
            std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end()) {
            throw UsageError("--checkpoints must be distinct values in [1, rounds]");
        }
    }

    [[nodiscard]] ordered_json to_json() const {
        return {{"d", d},           {"eps_d", eps_d},   {"eps_m", eps_m},
                {"rounds", rounds}, {"checkpoints", checkpoints}, {"trials", trials},
                {"seed", seed},     {"stack_bound", bound_json(stack_bound)}};
    }

    static SimulateParams from_json(const ordered_json& j) {
        SimulateParams p;
        p.d = j.at("d").get<int>();
        p.eps_d = j.at("eps_d").get<double>();
        p.eps_m = j.at("eps_m").get<double>();
        p.rounds = j.at("rounds").get<int>();
        p.checkpoints = j.at("checkpoints").get<std::vector<int>>();
        p.trials = j.at("trials").get<long>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.stack_bound = bound_from(j.at("stack_bound"));
        return p;
    }
};

void print_row(const SweepRow& r) {
    std::printf("d=%d eps=%.6g tau=%d m=%s trials=%ld failures=%ld P_L=%.6g [%.6g, %.6g] eps_L=%.6g\n", r.d, r.eps_d,
                r.tau, format_stack_bound(r.stack_bound).c_str(), r.trials, r.fail_any, r.p_l, r.ci_low, r.ci_high,
                r.eps_l);
}

std::vector<SweepRow> simulate_rows(const SimulateParams& p, int threads) {
    const auto config = p.config();
    const auto stats = run_batch_series(config, p.trials, p.checkpoints, threads);
    std::vector<SweepRow> rows;
    for (const auto& s : stats) {
        if (s.saturated) std::fprintf(stderr, "warning: P_L above 3/4 at tau=%d, eps_L clamped\n", s.tau);
        rows.push_back(make_row(config, s));
    }
    return rows;
}

// Appends rows, writing the header first when the file is new or empty.
void append_rows(const std::string& path, const std::vector<SweepRow>& rows) {
    ensure_parent(path);
    bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    if (!fresh) {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        if (header != kCsvHeader) throw std::runtime_error(path + " is not a results file");
    }
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_csv(out, rows, fresh);
    if (!out) throw std::runtime_error("write failed: " + path);
}

void execute_simulate(const SimulateParams& p, const std::string& out, int threads) {
    p.validate();
    const auto rows = simulate_rows(p, threads);
    append_rows(out, rows);
    append_manifest(out, manifest_entry("simulate", p.to_json()));
    for (const auto& r : rows) print_row(r);
}

// ---------------------------------------------------------------- sweep

struct SweepParams {
    std::vector<int> distances;
    std::vector<double> rates;
    std::optional<double> eps_m;  // fixed measurement rate, else equal to eps
    std::optional<int> rounds;    // else 20 d
    long trials = 0;
    std::uint64_t seed = 0;
    std::vector<std::optional<int>> stack_bounds;

    [[nodiscard]] std::vector<TrialConfig> cells() const {
        std::vector<TrialConfig> out;
        for (const auto& m : stack_bounds) {
            for (int d : distances) {
                for (double eps : rates) {
                    TrialConfig c;
                    c.d = d;
                    c.eps_d = eps;
                    c.eps_m = eps_m.value_or(eps);
                    c.tau = rounds ? *rounds : (d >= 3 ? default_tau(d) : 1);
                    c.stack_bound = m;
                    c.master_seed = seed;
                    out.push_back(c);
                }
            }
        }
        return out;
    }

    void validate() const {
        if (distances.empty()) throw UsageError("--distances: no distances given");
        if (trials < 1) throw UsageError("--trials must be >= 1");
        for (const auto& c : cells()) as_usage([&] { c.validate(); });
        auto unique = [](auto v) {
            std::sort(v.begin(), v.end());
            return std::adjacent_find(v.begin(), v.end()) == v.end();
        };
        if (!unique(distances) || !unique(rates)) throw UsageError("sweep grid has repeated values");
    }

    [[nodiscard]] ordered_json to_json() const {
        ordered_json bounds = ordered_json::array();
        for (const auto& m : stack_bounds) bounds.push_back(bound_json(m));
        ordered_json j = {{"distances", distances}, {"error_rates", rates}};
        j["eps_m"] = eps_m ? ordered_json(*eps_m) : ordered_json(nullptr);
        j["rounds"] = rounds ? ordered_json(*rounds) : ordered_json(nullptr);
        j["trials"] = trials;
        j["seed"] = seed;
        j["stack_bounds"] = bounds;
        return j;
    }

    static SweepParams from_json(const ordered_json& j) {
        SweepParams p;
        p.distances = j.at("distances").get<std::vector<int>>();
        p.rates = j.at("error_rates").get<std::vector<double>>();
        if (!j.at("eps_m").is_null()) p.eps_m = j.at("eps_m").get<double>();
        if (!j.at("rounds").is_null()) p.rounds = j.at("rounds").get<int>();
        p.trials = j.at("trials").get<long>();
        p.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& b : j.at("stack_bounds")) p.stack_bounds.push_back(bound_from(b));
        return p;
    }
};

bool same_cell(const SweepRow& r, const TrialConfig& c, long trials) {
    return r.d == c.d && r.eps_d == c.eps_d && r.eps_m == c.eps_m && r.tau == c.tau && r.stack_bound == c.stack_bound &&
           r.master_seed == c.master_seed && r.trials == trials;
}

void execute_sweep(const SweepParams& p, const std::string& out, int threads) {
    p.validate();
    const auto cells = p.cells();

    // Resume: an existing output must come from the same sweep; its rows
    // mark the cells already done.
    std::vector<SweepRow> rows;
    if (fs::exists(out)) {
        const auto runs = read_manifest(out);
        if (runs.size() != 1 || runs[0].at("command") != "sweep" || runs[0].at("parameters") != p.to_json()) {
            throw std::runtime_error(out + " belongs to a different run; choose another --out");
        }
        std::ifstream in(out);
        rows = read_csv(in);
        std::erase_if(rows, [&](const SweepRow& r) {
            return std::none_of(cells.begin(), cells.end(), [&](const auto& c) { return same_cell(r, c, p.trials); });
        });
    }
    auto entry = manifest_entry("sweep", p.to_json());

    std::size_t done = 0;
    for (const auto& c : cells) {
        const bool have = std::any_of(rows.begin(), rows.end(), [&](const SweepRow& r) { return same_cell(r, c, p.trials); });
        ++done;
        if (have) continue;
        const auto stats = run_batch(c, p.trials, threads);
        rows.push_back(make_row(c, stats));
        print_row(rows.back());
        std::sort(rows.begin(), rows.end(), row_order_less);
        std::ostringstream csv;
        write_csv(csv, rows);
        write_atomically(out, csv.str());
        entry["completed_cells"] = done;
        entry["total_cells"] = cells.size();
        write_manifest(out, {entry});
    }
    if (!fs::exists(out)) {
        std::ostringstream csv;
        write_csv(csv, rows);
        write_atomically(out, csv.str());
    }
    entry["completed_cells"] = cells.size();
    entry["total_cells"] = cells.size();
    write_manifest(out, {entry});
}

// ---------------------------------------------------------------- trace

ordered_json trace_json(const TraceConfig& c) {
    ordered_json inj = ordered_json::array();
    for (const auto& i : c.injections) inj.push_back(format_injection(i));
    return {{"d", c.d},           {"eps_d", c.eps_d}, {"eps_m", c.eps_m},
            {"rounds", c.rounds}, {"seed", c.seed},   {"stack_bound", bound_json(c.stack_bound)},
            {"inject", inj},      {"substeps", c.substeps}};
}

TraceConfig trace_from_json(const ordered_json& j) {
    TraceConfig c;
    c.d = j.at("d").get<int>();
    c.eps_d = j.at("eps_d").get<double>();
    c.eps_m = j.at("eps_m").get<double>();
    c.rounds = j.at("rounds").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.stack_bound = bound_from(j.at("stack_bound"));
    for (const auto& s : j.at("inject")) c.injections.push_back(parse_injection(s.get<std::string>()));
    c.substeps = j.at("substeps").get<bool>();
    return c;
}

void execute_trace(const TraceConfig& c, const std::string& out) {
    as_usage([&] { c.validate(); });
    std::string text;
    std::size_t frames = 0;
    run_trace(c, [&](const TraceFrame& f) {
        text += format_frame(f);
        text += '\n';
        ++frames;
    });
    write_atomically(out, text);
    write_manifest(out, {manifest_entry("trace", trace_json(c))});
    std::printf("wrote %zu frames to %s\n", frames, out.c_str());
}

// ---------------------------------------------------------------- analyze

int execute_analyze(const std::string& input, const std::string& out, bool unweighted) {
    std::ifstream in(input, std::ios::binary);
    if (!in) {
        std::fprintf(stderr, "error: cannot read %s\n", input.c_str());
        return kExitUsage;
    }
    std::vector<SweepRow> rows;
    try {
        rows = read_csv(in);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s: malformed CSV at row %zu: %s\n", input.c_str(), e.line(), e.reason().c_str());
        return kExitUsage;
    }
    if (rows.empty()) {
        std::fprintf(stderr, "error: %s holds no result rows\n", input.c_str());
        return kExitUsage;
    }
    const auto report = analyze_rows(rows, unweighted ? Weighting::Uniform : Weighting::Wilson);
    write_atomically(out, to_json(report).dump(2) + "\n");
    for (const auto& g : report.groups) {
        std::printf("m=%s:", format_stack_bound(g.stack_bound).c_str());
        for (const auto& f : g.fits) std::printf(" gamma[%d]=%.4g", f.d, f.gamma);
        if (g.ansatz) {
            std::printf(" A=%.4g eps_c=%.4g\n", g.ansatz->a, g.ansatz->eps_c);
        } else {
            std::printf(" (%s)\n", g.ansatz_reason.c_str());
        }
    }
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

// ---------------------------------------------------------------- rerun

void execute_rerun(const std::string& manifest, const std::string& out, int threads) {
    const std::string suffix = ".manifest.json";
    if (manifest.size() <= suffix.size() || manifest.compare(manifest.size() - suffix.size(), suffix.size(), suffix) != 0) {
        throw UsageError("--manifest must name a *.manifest.json file");
    }
    const auto original = manifest.substr(0, manifest.size() - suffix.size());
    if (!fs::exists(manifest)) throw UsageError("no such manifest: " + manifest);
    const auto runs = read_manifest(original);
    if (runs.empty()) throw std::runtime_error("manifest lists no runs");
    if (fs::exists(out)) throw UsageError(out + " already exists");
    for (const auto& run : runs) {
        const auto command = run.at("command").get<std::string>();
        const auto& params = run.at("parameters");
        if (command == "simulate") {
            execute_simulate(SimulateParams::from_json(params), out, threads);
        } else if (command == "sweep") {
            execute_sweep(SweepParams::from_json(params), out, threads);
        } else if (command == "trace") {
            execute_trace(trace_from_json(params), out);
        } else {
            throw std::runtime_error("unknown command in manifest: " + command);
        }
    }
}

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local signal-rule decoder for the toric code: simulation, sweeps, fits and traces."};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    int threads = default_threads();
    auto add_threads = [&](CLI::App* cmd) {
        cmd->add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run one batch of trials and append its rows to a CSV file");
    int sim_d = 0;
    double sim_eps = 0.0;
    std::optional<double> sim_eps_m;
    std::optional<int> sim_rounds;
    std::string sim_checkpoints;
    long sim_trials = 1000;
    std::uint64_t sim_seed = 1;
    std::string sim_bound = "inf";
    std::string sim_out = default_output("results.csv");
    sim->add_option("--distance,-d", sim_d, "Lattice size d")->required();
    sim->add_option("--error-rate", sim_eps, "Data error rate (also the measurement rate by default)")->required();
    sim->add_option("--meas-error-rate", sim_eps_m, "Measurement error rate");
    sim->add_option("--rounds", sim_rounds, "Decoder iterations per trial (default 20 d)");
    sim->add_option("--checkpoints", sim_checkpoints, "Comma-separated extra read-out rounds, one row each");
    sim->add_option("--trials", sim_trials, "Number of trials");
    sim->add_option("--seed", sim_seed, "Master seed");
    sim->add_option("--stack-bound", sim_bound, "Stack bound m, or inf");
    sim->add_option("--out", sim_out, "Results CSV (appended)");
    add_threads(sim);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a grid of distances and error rates, resumable");
    std::string sw_distances, sw_rates, sw_bounds = "inf";
    std::optional<double> sw_eps_m;
    std::optional<int> sw_rounds;
    long sw_trials = 1000;
    std::uint64_t sw_seed = 1;
    std::string sw_out = default_output("sweep.csv");
    sweep->add_option("--distances", sw_distances, "Comma-separated lattice sizes")->required();
    sweep->add_option("--error-rates", sw_rates, "start:stop:count (log-spaced) or a comma list")->required();
    sweep->add_option("--meas-error-rate", sw_eps_m, "Fixed measurement error rate (default: equal to each rate)");
    sweep->add_option("--rounds", sw_rounds, "Decoder iterations per trial (default 20 d)");
    sweep->add_option("--trials", sw_trials, "Trials per cell");
    sweep->add_option("--seed", sw_seed, "Master seed shared by all cells");
    sweep->add_option("--stack-bound", sw_bounds, "Comma-separated stack bounds, each an integer or inf");
    sweep->add_option("--out", sw_out, "Results CSV (rewritten sorted after each cell)");
    add_threads(sweep);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Fit a results CSV and write a JSON report");
    std::string an_in, an_out = default_output("fits.json");
    bool an_unweighted = false;
    analyze->add_option("--input", an_in, "Results CSV")->required();
    analyze->add_option("--out", an_out, "JSON report");
    analyze->add_flag("--unweighted", an_unweighted, "Ordinary instead of interval-weighted least squares");

    // trace
    auto* trace = app.add_subcommand("trace", "Record decoder snapshots as JSON Lines");
    int tr_d = 0;
    double tr_eps = 0.0;
    std::optional<double> tr_eps_m;
    std::optional<int> tr_rounds;
    std::vector<std::string> tr_inject;
    std::uint64_t tr_seed = 1;
    std::string tr_bound = "inf";
    bool tr_substeps = false;
    std::string tr_out = default_output("trace.jsonl");
    trace->add_option("--distance,-d", tr_d, "Lattice size d")->required();
    trace->add_option("--error-rate", tr_eps, "Data error rate (also the measurement rate by default)");
    trace->add_option("--meas-error-rate", tr_eps_m, "Measurement error rate");
    trace->add_option("--inject", tr_inject, "Round-1 error: r,c (measurement) or r,c,H|V (data edge); repeatable");
    trace->add_option("--rounds", tr_rounds, "Iterations to record (default 20 d)");
    trace->add_option("--seed", tr_seed, "Master seed");
    trace->add_option("--stack-bound", tr_bound, "Stack bound m, or inf");
    trace->add_flag("--substeps", tr_substeps, "One record per sub-step instead of per iteration");
    trace->add_option("--out", tr_out, "Trace file");

    // rerun
    auto* rerun = app.add_subcommand("rerun", "Reproduce an output file from its manifest");
    std::string re_manifest, re_out;
    rerun->add_option("--manifest", re_manifest, "The <output>.manifest.json sidecar")->required();
    rerun->add_option("--out", re_out, "New output path (must not exist)")->required();
    add_threads(rerun);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (sim->parsed()) {
            SimulateParams p;
            p.d = sim_d;
            p.eps_d = sim_eps;
            p.eps_m = sim_eps_m.value_or(sim_eps);
            p.rounds = sim_rounds ? *sim_rounds : (sim_d >= 3 ? default_tau(sim_d) : 0);
            for (const auto& s : split_list(sim_checkpoints)) {
                try {
                    p.checkpoints.push_back(std::stoi(s));
                } catch (const std::exception&) {
                    throw UsageError("--checkpoints: bad value '" + s + "'");
                }
            }
            std::sort(p.checkpoints.begin(), p.checkpoints.end());
            if (p.checkpoints.empty() || p.checkpoints.back() != p.rounds) p.checkpoints.push_back(p.rounds);
            p.trials = sim_trials;
            p.seed = sim_seed;
            p.stack_bound = parse_bound_flag(sim_bound);
            execute_simulate(p, sim_out, threads);
        } else if (sweep->parsed()) {
            SweepParams p;
            for (const auto& s : split_list(sw_distances)) {
                try {
                    p.distances.push_back(std::stoi(s));
                } catch (const std::exception&) {
                    throw UsageError("--distances: bad value '" + s + "'");
                }
            }
            p.rates = parse_rates(sw_rates);
            p.eps_m = sw_eps_m;
            p.rounds = sw_rounds;
            p.trials = sw_trials;
            p.seed = sw_seed;
            for (const auto& s : split_list(sw_bounds)) p.stack_bounds.push_back(parse_bound_flag(s));
            if (p.stack_bounds.empty()) throw UsageError("--stack-bound: no bounds given");
            execute_sweep(p, sw_out, threads);
        } else if (analyze->parsed()) {
            return execute_analyze(an_in, an_out, an_unweighted);
        } else if (trace->parsed()) {
            TraceConfig c;
            c.d = tr_d;
            c.eps_d = tr_eps;
            c.eps_m = tr_eps_m.value_or(tr_eps);
            c.rounds = tr_rounds ? *tr_rounds : (tr_d >= 3 ? default_tau(tr_d) : 0);
            c.seed = tr_seed;
            c.stack_bound = parse_bound_flag(tr_bound);
            for (const auto& s : tr_inject) {
                try {
                    c.injections.push_back(parse_injection(s));
                } catch (const std::invalid_argument& e) {
                    throw UsageError(std::string("--inject: ") + e.what());
                }
            }
            c.substeps = tr_substeps;
            execute_trace(c, tr_out);
        } else if (rerun->parsed()) {
            execute_rerun(re_manifest, re_out, threads);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
