#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sigrule/automaton.hpp"
#include "sigrule/lattice.hpp"

namespace sigrule {

struct StackEntry {
    Vertex site;
    Direction dir = Direction::N;
    int value = 0;

    friend bool operator==(const StackEntry&, const StackEntry&) = default;
};

// Sparse snapshot of the automaton. Every list is sorted row-major, stacks
// by (row, col, direction), corrections by (row, col, H before V).
struct TraceFrame {
    int t = 0;
    std::string step;  // empty for a whole-iteration record
    std::vector<Vertex> defects;
    std::array<std::array<std::vector<Vertex>, 4>, 2> forward;  // [type][direction]
    std::array<std::array<std::vector<Vertex>, 4>, 2> anti;
    std::array<std::vector<StackEntry>, 2> stacks;
    std::vector<Edge> corrections;

    friend bool operator==(const TraceFrame&, const TraceFrame&) = default;
};

[[nodiscard]] TraceFrame capture_frame(const Automaton& automaton, int t, const Chain& corrections,
                                       std::string step = {});

[[nodiscard]] nlohmann::ordered_json to_json(const TraceFrame& frame);
// One JSON line without the trailing newline.
[[nodiscard]] std::string format_frame(const TraceFrame& frame);
// Throws std::invalid_argument on a malformed record.
[[nodiscard]] TraceFrame parse_frame(std::string_view line);
// Throws ParseError with the 1-based line number.
[[nodiscard]] std::vector<TraceFrame> read_trace(std::istream& in);

// An error placed by hand in round 1: a flipped measurement at `site`, or a
// data error on the edge anchored there.
struct Injection {
    Vertex site;
    std::optional<Orientation> edge;

    friend bool operator==(const Injection&, const Injection&) = default;
};

// "r,c" or "r,c,H" / "r,c,V". Throws std::invalid_argument.
[[nodiscard]] Injection parse_injection(std::string_view text);
[[nodiscard]] std::string format_injection(const Injection& injection);

struct TraceConfig {
    int d = 0;
    double eps_d = 0.0;
    double eps_m = 0.0;
    int rounds = 0;
    std::optional<int> stack_bound;
    std::uint64_t seed = 0;
    std::vector<Injection> injections;
    bool substeps = false;

    void validate() const;
};

// The noisy loop of trial 0 under `config.seed`, plus injections, reporting
// one frame per iteration or, with substeps, one per sub-step: "measure",
// "match", "signals", "attract", "cleanup".
void run_trace(const TraceConfig& config, const std::function<void(const TraceFrame&)>& sink);

}  // namespace sigrule
