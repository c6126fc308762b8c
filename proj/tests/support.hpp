#pragma once

// Shared helpers for the unit and acceptance tests.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "sigrule/automaton.hpp"
#include "sigrule/lattice.hpp"
#include "sigrule/noise.hpp"
#include "sigrule/readout.hpp"

namespace sigrule::testing {

inline Syndrome random_syndrome(int d, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    Syndrome s(d);
    for (int i = 0; i < d * d; ++i)
        if (coin(rng)) s.flip_index(static_cast<std::size_t>(i));
    return s;
}

inline Chain random_chain(int d, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    Chain c(d);
    for (int i = 0; i < 2 * d * d; ++i)
        if (coin(rng)) c.flip_index(static_cast<std::size_t>(i));
    return c;
}

// Random set of exactly n distinct vertices.
inline Syndrome random_defects(int d, int n, std::mt19937_64& rng) {
    std::vector<int> all(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d * d; ++i) all[static_cast<std::size_t>(i)] = i;
    std::shuffle(all.begin(), all.end(), rng);
    Syndrome s(d);
    for (int i = 0; i < n; ++i) s.flip_index(static_cast<std::size_t>(all[static_cast<std::size_t>(i)]));
    return s;
}

inline Vertex shift(Vertex v, int dr, int dc, int d) { return {wrap(v.row + dr, d), wrap(v.col + dc, d)}; }

inline Syndrome translate(const Syndrome& s, int dr, int dc) {
    const int d = s.distance();
    Syndrome out(d);
    for (auto v : s.vertices()) out.flip(shift(v, dr, dc, d));
    return out;
}

inline Chain translate(const Chain& c, int dr, int dc) {
    const int d = c.distance();
    Chain out(d);
    for (auto e : c.edges()) out.flip({e.orientation, shift(e.anchor, dr, dc, d)});
    return out;
}

// Offline two-defect run: the error chain is corrected by noiseless
// iterations until the automaton is back at zero (or the cap is hit).
struct PairRun {
    int iterations = 0;
    bool relaxed = false;  // zero grid and residual is a cycle
    bool trivial = false;  // ... with trivial homology
};

inline PairRun run_pair(const RuleParams& params, Vertex u, Vertex v, int cap) {
    Automaton a(params);
    Chain err = shortest_path_chain(u, v, params.d);
    PairRun out;
    while (out.iterations < cap) {
        Syndrome s = boundary(err);
        if (s.empty() && a.is_zero()) break;
        err ^= a.iterate(s);
        ++out.iterations;
    }
    out.relaxed = a.is_zero() && boundary(err).empty();
    out.trivial = out.relaxed && homology_class(err).trivial();
    return out;
}

// Iterations until a one-shot measurement defect has fully relaxed, or -1.
inline int relax_single(const RuleParams& params, Vertex v, int cap, Chain* total = nullptr) {
    Automaton a(params);
    Syndrome s(params.d);
    s.flip(v);
    Chain sum = a.iterate(s);
    const Syndrome none(params.d);
    int t = 1;
    while (!a.is_zero() && t < cap) {
        sum ^= a.iterate(none);
        ++t;
    }
    if (total != nullptr) *total = sum;
    return a.is_zero() ? t : -1;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the command-line tool through the shell.
inline CliResult run_cli(const std::string& args, const std::filesystem::path& workdir) {
    static int counter = 0;
    const auto out_file = workdir / ("cli_stdout_" + std::to_string(counter) + ".txt");
    const auto err_file = workdir / ("cli_stderr_" + std::to_string(counter++) + ".txt");
    const std::string cmd = "cd '" + workdir.string() + "' && '" SIGRULE_CLI "' " + args + " > '" + out_file.string() +
                            "' 2> '" + err_file.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("sigrule_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace sigrule::testing
