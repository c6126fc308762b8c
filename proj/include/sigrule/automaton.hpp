#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sigrule/lattice.hpp"

namespace sigrule {

enum class Direction : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

inline constexpr std::array<Direction, 4> kDirections = {Direction::N, Direction::E, Direction::S,
                                                         Direction::W};

[[nodiscard]] constexpr Direction opposite(Direction dir) {
    return static_cast<Direction>((static_cast<int>(dir) + 2) % 4);
}

// Clockwise quarter turn: N -> E -> S -> W -> N.
[[nodiscard]] constexpr Direction rotate90(Direction dir) {
    return static_cast<Direction>((static_cast<int>(dir) + 1) % 4);
}

[[nodiscard]] constexpr int index_of(Direction dir) { return static_cast<int>(dir); }

[[nodiscard]] char direction_symbol(Direction dir);
// Accepts "N", "E", "S", "W". Throws std::invalid_argument otherwise.
[[nodiscard]] Direction parse_direction(std::string_view text);

// Neighbor of `v` one step toward `dir`. North decreases the row index.
[[nodiscard]] Vertex step(Vertex v, Direction dir, int d);
// The edge between `v` and step(v, dir).
[[nodiscard]] Edge edge_toward(Vertex v, Direction dir, int d);

enum class SignalType : std::uint8_t { One = 0, Two = 1 };

struct Channel {
    SignalType type = SignalType::One;
    Direction dir = Direction::N;

    friend bool operator==(const Channel&, const Channel&) = default;
};

struct RuleParams {
    int d = 0;
    std::optional<int> stack_bound;  // nullopt: stacks grow freely (self-bounded by d)
    // Channel consulted first wins when a defect holds several forward signals.
    std::array<Channel, 8> attraction_priority = default_attraction_priority();
    // Direction preferred first by the matching handshake.
    std::array<Direction, 4> matching_priority = {Direction::E, Direction::N, Direction::W,
                                                  Direction::S};

    static std::array<Channel, 8> default_attraction_priority();

    // Throws std::invalid_argument on d outside [3, 64], m < 1 or a
    // priority list that is not a permutation.
    void validate() const;
    // m when bounded, d otherwise.
    [[nodiscard]] int effective_bound() const { return stack_bound.value_or(d); }
};

// Decoder memory of one site. Arrays are indexed [signal type][direction].
struct SiteState {
    using DirBits = std::array<bool, 4>;
    using DirCounts = std::array<int, 4>;

    bool defect = false;
    std::array<DirBits, 2> forward{};
    std::array<DirBits, 2> anti{};
    std::array<DirCounts, 2> stack{};

    [[nodiscard]] bool is_zero() const { return *this == SiteState{}; }
    friend bool operator==(const SiteState&, const SiteState&) = default;
};

struct ChargeReport {
    std::array<long, 2> total{};  // Q1, Q2
    // [type][direction][line]: rows for E/W channels, columns for N/S channels.
    std::array<std::array<std::vector<long>, 4>, 2> per_line;

    [[nodiscard]] bool all_zero() const;
};

// Per-site storage under this implementation: defect, 16 signal bits and
// 8 stack counters of ceil(log2(bound + 1)) bits each.
[[nodiscard]] int memory_bits(const RuleParams& params);

// The 2D signal-rule decoder over a d x d torus (3 <= d <= 64).
//
// State is held as bit planes, one 64-bit row mask per lattice row, so every
// sub-step is a read-all-then-write-all update over whole rows.
class Automaton {
public:
    // Zero configuration.
    explicit Automaton(RuleParams params);

    [[nodiscard]] const RuleParams& params() const { return params_; }
    [[nodiscard]] int distance() const { return params_.d; }

    // One full iteration: load the measurement, then match, signal, attract
    // and clean up. Returns the XOR of all Paulis applied.
    Chain iterate(const Syndrome& measured);

    // Step 0: defect bits are overwritten by the measured syndrome.
    void load_syndrome(const Syndrome& measured);
    // Step 1: neighboring defects selected by each other are paired.
    Chain step_match();
    // Steps 2-3: emission and one-site propagation of 1- and 2-forward signals.
    void step_signals();
    // Step 4: defects holding a forward signal step toward its source.
    Chain step_attract();
    // Step 5: anti-signal emission from stacks, then three rounds of
    // anti-signal propagation with recombination.
    void step_cleanup();

    [[nodiscard]] SiteState site(Vertex v) const;
    void set_site(Vertex v, const SiteState& state);
    [[nodiscard]] std::vector<Vertex> defects() const;
    [[nodiscard]] bool is_zero() const;
    [[nodiscard]] ChargeReport charges() const;
    [[nodiscard]] int max_stack() const;

    friend bool operator==(const Automaton& a, const Automaton& b);

private:
    using Row = std::uint64_t;

    [[nodiscard]] std::span<Row> defect_plane() { return plane(0); }
    [[nodiscard]] std::span<const Row> defect_plane() const { return plane(0); }
    [[nodiscard]] std::span<Row> forward_plane(int type, int dir) { return plane(1 + 4 * type + dir); }
    [[nodiscard]] std::span<const Row> forward_plane(int type, int dir) const {
        return plane(1 + 4 * type + dir);
    }
    [[nodiscard]] std::span<Row> anti_plane(int type, int dir) { return plane(9 + 4 * type + dir); }
    [[nodiscard]] std::span<const Row> anti_plane(int type, int dir) const {
        return plane(9 + 4 * type + dir);
    }
    // Rows whose stack counter is nonzero / at the bound.
    [[nodiscard]] std::span<Row> nonzero_plane(int type, int dir) { return plane(17 + 4 * type + dir); }
    [[nodiscard]] std::span<Row> full_plane(int type, int dir) { return plane(25 + 4 * type + dir); }
    [[nodiscard]] std::span<Row> plane(int k) {
        return {planes_.data() + static_cast<std::size_t>(k) * rows_, rows_};
    }
    [[nodiscard]] std::span<const Row> plane(int k) const {
        return {planes_.data() + static_cast<std::size_t>(k) * rows_, rows_};
    }
    [[nodiscard]] std::uint16_t& stack_at(int type, int dir, int r, int c) {
        return stacks_[((static_cast<std::size_t>(type) * 4 + static_cast<std::size_t>(dir)) * rows_ +
                        static_cast<std::size_t>(r)) *
                           rows_ +
                       static_cast<std::size_t>(c)];
    }
    [[nodiscard]] std::uint16_t stack_at(int type, int dir, int r, int c) const {
        return const_cast<Automaton*>(this)->stack_at(type, dir, r, c);
    }

    void shift_plane(std::span<Row> rows, Direction dir);
    void recombine();
    void push_stacks(int type, int dir, std::span<const Row> emitted);
    void pop_stacks(int type, int dir, std::span<const Row> emitted);
    void refresh_stack_masks(int type, int dir, int r, int c);
    Chain chain_from_planes(std::span<const Row> horizontal, std::span<const Row> vertical) const;

    RuleParams params_;
    std::size_t rows_ = 0;
    Row mask_ = 0;
    std::vector<Row> planes_;
    std::vector<std::uint16_t> stacks_;
};

}  // namespace sigrule
