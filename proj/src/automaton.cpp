#include "sigrule/automaton.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>
#include <string>

namespace sigrule {

namespace {

using Row = std::uint64_t;
using RowBuf = std::array<Row, 64>;

constexpr int kOne = static_cast<int>(SignalType::One);
constexpr int kTwo = static_cast<int>(SignalType::Two);

// Moves every set bit of a plane one site toward `dir` on the torus.
void shift_rows(std::span<Row> rows, Direction dir, int d, Row mask) {
    switch (dir) {
        case Direction::N:
            std::rotate(rows.begin(), rows.begin() + 1, rows.end());
            break;
        case Direction::S:
            std::rotate(rows.begin(), rows.end() - 1, rows.end());
            break;
        case Direction::E:
            for (auto& x : rows) x = ((x << 1) | (x >> (d - 1))) & mask;
            break;
        case Direction::W:
            for (auto& x : rows) x = ((x >> 1) | (x << (d - 1))) & mask;
            break;
    }
}

// Copy of `src` moved one site toward `dir`.
std::span<Row> shifted(RowBuf& buf, std::span<const Row> src, Direction dir, int d, Row mask) {
    std::span<Row> out(buf.data(), src.size());
    std::copy(src.begin(), src.end(), out.begin());
    shift_rows(out, dir, d, mask);
    return out;
}

bool any_set(std::span<const Row> rows) {
    return std::any_of(rows.begin(), rows.end(), [](Row x) { return x != 0; });
}

template <typename F>
void for_each_bit(std::span<const Row> rows, F&& f) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Row x = rows[r];
        while (x != 0) {
            f(static_cast<int>(r), std::countr_zero(x));
            x &= x - 1;
        }
    }
}

}  // namespace

char direction_symbol(Direction dir) {
    static constexpr char kSymbols[] = {'N', 'E', 'S', 'W'};
    return kSymbols[index_of(dir)];
}

Direction parse_direction(std::string_view text) {
    if (text == "N") return Direction::N;
    if (text == "E") return Direction::E;
    if (text == "S") return Direction::S;
    if (text == "W") return Direction::W;
    throw std::invalid_argument("unknown direction '" + std::string(text) + "'");
}

Vertex step(Vertex v, Direction dir, int d) {
    switch (dir) {
        case Direction::N: return {wrap(v.row - 1, d), v.col};
        case Direction::E: return {v.row, wrap(v.col + 1, d)};
        case Direction::S: return {wrap(v.row + 1, d), v.col};
        case Direction::W: return {v.row, wrap(v.col - 1, d)};
    }
    return v;
}

Edge edge_toward(Vertex v, Direction dir, int d) {
    switch (dir) {
        case Direction::E: return {Orientation::H, v};
        case Direction::W: return {Orientation::H, step(v, Direction::W, d)};
        case Direction::S: return {Orientation::V, v};
        case Direction::N: return {Orientation::V, step(v, Direction::N, d)};
    }
    return {};
}

std::array<Channel, 8> RuleParams::default_attraction_priority() {
    std::array<Channel, 8> out{};
    std::size_t k = 0;
    // Within a type the horizontal pair is ranked E over W. A defect and its
    // partner in the opposite quadrant then step along different axes and
    // do not overshoot each other on stale signals.
    for (auto type : {SignalType::One, SignalType::Two}) {
        for (auto dir : {Direction::N, Direction::E, Direction::W, Direction::S}) out[k++] = {type, dir};
    }
    return out;
}

void RuleParams::validate() const {
    if (d < 3 || d > 64) {
        throw std::invalid_argument("automaton distance must be in [3, 64], got " + std::to_string(d));
    }
    if (stack_bound && *stack_bound < 1) {
        throw std::invalid_argument("stack bound must be >= 1");
    }
    std::array<int, 8> seen_channels{};
    for (const auto& ch : attraction_priority) {
        ++seen_channels[static_cast<std::size_t>(4 * static_cast<int>(ch.type) + index_of(ch.dir))];
    }
    if (std::any_of(seen_channels.begin(), seen_channels.end(), [](int n) { return n != 1; })) {
        throw std::invalid_argument("attraction priority must list each (type, direction) once");
    }
    std::array<int, 4> seen_dirs{};
    for (auto dir : matching_priority) ++seen_dirs[static_cast<std::size_t>(index_of(dir))];
    if (std::any_of(seen_dirs.begin(), seen_dirs.end(), [](int n) { return n != 1; })) {
        throw std::invalid_argument("matching priority must list each direction once");
    }
}

bool ChargeReport::all_zero() const {
    if (total[0] != 0 || total[1] != 0) return false;
    for (const auto& by_type : per_line) {
        for (const auto& lines : by_type) {
            if (std::any_of(lines.begin(), lines.end(), [](long q) { return q != 0; })) return false;
        }
    }
    return true;
}

int memory_bits(const RuleParams& params) {
    const int bound = params.effective_bound();
    const int counter_bits = std::bit_width(static_cast<unsigned>(bound));
    return 1 + 16 + 8 * counter_bits;
}

Automaton::Automaton(RuleParams params) : params_(params) {
    params_.validate();
    rows_ = static_cast<std::size_t>(params_.d);
    mask_ = params_.d == 64 ? ~Row{0} : (Row{1} << params_.d) - 1;
    planes_.assign(33 * rows_, 0);
    stacks_.assign(8 * rows_ * rows_, 0);
}

void Automaton::shift_plane(std::span<Row> rows, Direction dir) {
    shift_rows(rows, dir, params_.d, mask_);
}

Chain Automaton::iterate(const Syndrome& measured) {
    load_syndrome(measured);
    Chain correction = step_match();
    step_signals();
    correction ^= step_attract();
    step_cleanup();
    return correction;
}

void Automaton::load_syndrome(const Syndrome& measured) {
    if (measured.distance() != params_.d) {
        throw std::invalid_argument("syndrome dimension does not match the automaton");
    }
    auto defects = defect_plane();
    std::fill(defects.begin(), defects.end(), 0);
    for (std::size_t r = 0; r < rows_; ++r) {
        Row row = 0;
        for (std::size_t c = 0; c < rows_; ++c) {
            if (measured.test_index(r * rows_ + c)) row |= Row{1} << c;
        }
        defects[r] = row;
    }
}

Chain Automaton::step_match() {
    const int d = params_.d;
    auto defects = defect_plane();
    if (!any_set(defects)) return Chain(d);

    RowBuf tmp{};
    std::array<RowBuf, 4> selected{};
    std::array<RowBuf, 4> candidates{};
    for (auto dir : kDirections) {
        // A site sees a defect toward `dir` when its neighbor's bit arrives by
        // shifting the plane the opposite way.
        auto neighbor = shifted(tmp, defects, opposite(dir), d, mask_);
        for (std::size_t r = 0; r < rows_; ++r) {
            candidates[static_cast<std::size_t>(index_of(dir))][r] = defects[r] & neighbor[r];
        }
    }
    RowBuf unselected{};
    std::copy(defects.begin(), defects.end(), unselected.begin());
    for (auto dir : params_.matching_priority) {
        auto k = static_cast<std::size_t>(index_of(dir));
        for (std::size_t r = 0; r < rows_; ++r) {
            selected[k][r] = candidates[k][r] & unselected[r];
            unselected[r] &= ~selected[k][r];
        }
    }

    auto sel = [&](Direction dir) {
        return std::span<const Row>(selected[static_cast<std::size_t>(index_of(dir))].data(), rows_);
    };
    RowBuf fire_h{};
    RowBuf fire_v{};
    auto west_choice_of_east = shifted(tmp, sel(Direction::W), Direction::W, d, mask_);
    for (std::size_t r = 0; r < rows_; ++r) fire_h[r] = sel(Direction::E)[r] & west_choice_of_east[r];
    auto north_choice_of_south = shifted(tmp, sel(Direction::N), Direction::N, d, mask_);
    for (std::size_t r = 0; r < rows_; ++r) fire_v[r] = sel(Direction::S)[r] & north_choice_of_south[r];

    std::span<const Row> h(fire_h.data(), rows_);
    std::span<const Row> v(fire_v.data(), rows_);
    RowBuf cleared{};
    for (std::size_t r = 0; r < rows_; ++r) cleared[r] = h[r] | v[r];
    auto h_far = shifted(tmp, h, Direction::E, d, mask_);
    for (std::size_t r = 0; r < rows_; ++r) cleared[r] |= h_far[r];
    auto v_far = shifted(tmp, v, Direction::S, d, mask_);
    for (std::size_t r = 0; r < rows_; ++r) cleared[r] |= v_far[r];
    for (std::size_t r = 0; r < rows_; ++r) defects[r] &= ~cleared[r];

    return chain_from_planes(h, v);
}

void Automaton::step_signals() {
    auto defects = defect_plane();
    RowBuf emitted{};
    std::span<Row> emit(emitted.data(), rows_);

    // 2a: defects emit 1-forward signals in every direction.
    if (any_set(defects)) {
        for (int dir = 0; dir < 4; ++dir) {
            auto fwd = forward_plane(kOne, dir);
            auto full = full_plane(kOne, dir);
            for (std::size_t r = 0; r < rows_; ++r) {
                emit[r] = defects[r] & ~fwd[r] & ~full[r];
                fwd[r] |= emit[r];
            }
            push_stacks(kOne, dir, emit);
        }
    }
    // 2b
    for (auto dir : kDirections) shift_plane(forward_plane(kOne, index_of(dir)), dir);

    // 3a: defects emit 2-forward signals everywhere, 1-forward signals emit
    // them orthogonally to their own motion.
    for (auto dir : kDirections) {
        auto left = forward_plane(kOne, index_of(rotate90(dir)));
        auto right = forward_plane(kOne, index_of(opposite(rotate90(dir))));
        auto fwd = forward_plane(kTwo, index_of(dir));
        auto full = full_plane(kTwo, index_of(dir));
        bool any = false;
        for (std::size_t r = 0; r < rows_; ++r) {
            emit[r] = (defects[r] | left[r] | right[r]) & ~fwd[r] & ~full[r];
            fwd[r] |= emit[r];
            any = any || emit[r] != 0;
        }
        if (any) push_stacks(kTwo, index_of(dir), emit);
    }
    // 3b
    for (auto dir : kDirections) shift_plane(forward_plane(kTwo, index_of(dir)), dir);
}

Chain Automaton::step_attract() {
    const int d = params_.d;
    auto defects = defect_plane();
    if (!any_set(defects)) return Chain(d);

    RowBuf tmp{};
    RowBuf unmoved{};
    RowBuf toggles{};
    RowBuf paulis_h{};
    RowBuf paulis_v{};
    RowBuf moving{};
    std::copy(defects.begin(), defects.end(), unmoved.begin());
    for (const auto& ch : params_.attraction_priority) {
        auto fwd = forward_plane(static_cast<int>(ch.type), index_of(ch.dir));
        bool any = false;
        for (std::size_t r = 0; r < rows_; ++r) {
            moving[r] = unmoved[r] & fwd[r];
            unmoved[r] &= ~moving[r];
            any = any || moving[r] != 0;
        }
        if (!any) continue;
        // Step back along the signal's path, toward its source.
        const Direction toward = opposite(ch.dir);
        std::span<const Row> from(moving.data(), rows_);
        auto to = shifted(tmp, from, toward, d, mask_);
        for (std::size_t r = 0; r < rows_; ++r) toggles[r] ^= from[r] ^ to[r];
        auto& paulis = (toward == Direction::E || toward == Direction::W) ? paulis_h : paulis_v;
        // The edge is anchored at whichever endpoint is west / north.
        auto anchors = (toward == Direction::E || toward == Direction::S) ? from : std::span<const Row>(to);
        for (std::size_t r = 0; r < rows_; ++r) paulis[r] ^= anchors[r];
    }
    for (std::size_t r = 0; r < rows_; ++r) defects[r] ^= toggles[r];
    return chain_from_planes({paulis_h.data(), rows_}, {paulis_v.data(), rows_});
}

void Automaton::step_cleanup() {
    auto defects = defect_plane();
    RowBuf any_forward1{};
    for (int dir = 0; dir < 4; ++dir) {
        auto fwd = forward_plane(kOne, dir);
        for (std::size_t r = 0; r < rows_; ++r) any_forward1[r] |= fwd[r];
    }

    // 5a: stacks at defect-free sites release anti-signals. 2-stacks also
    // wait for 1-forward signals to leave the site.
    RowBuf emitted{};
    std::span<Row> emit(emitted.data(), rows_);
    for (int dir = 0; dir < 4; ++dir) {
        auto anti1 = anti_plane(kOne, dir);
        auto nz1 = nonzero_plane(kOne, dir);
        bool any = false;
        for (std::size_t r = 0; r < rows_; ++r) {
            emit[r] = ~defects[r] & nz1[r] & ~anti1[r];
            anti1[r] |= emit[r];
            any = any || emit[r] != 0;
        }
        if (any) pop_stacks(kOne, dir, emit);

        auto anti2 = anti_plane(kTwo, dir);
        auto nz2 = nonzero_plane(kTwo, dir);
        any = false;
        for (std::size_t r = 0; r < rows_; ++r) {
            emit[r] = ~defects[r] & ~any_forward1[r] & nz2[r] & ~anti2[r];
            anti2[r] |= emit[r];
            any = any || emit[r] != 0;
        }
        if (any) pop_stacks(kTwo, dir, emit);
    }
    recombine();

    // 5b
    for (int rep = 0; rep < 3; ++rep) {
        for (int type = 0; type < 2; ++type) {
            for (auto dir : kDirections) shift_plane(anti_plane(type, index_of(dir)), dir);
        }
        recombine();
    }
}

void Automaton::recombine() {
    for (int type = 0; type < 2; ++type) {
        for (int dir = 0; dir < 4; ++dir) {
            auto fwd = forward_plane(type, dir);
            auto anti = anti_plane(type, dir);
            for (std::size_t r = 0; r < rows_; ++r) {
                Row both = fwd[r] & anti[r];
                fwd[r] ^= both;
                anti[r] ^= both;
            }
        }
    }
}

void Automaton::push_stacks(int type, int dir, std::span<const Row> emitted) {
    for_each_bit(emitted, [&](int r, int c) {
        ++stack_at(type, dir, r, c);
        refresh_stack_masks(type, dir, r, c);
    });
}

void Automaton::pop_stacks(int type, int dir, std::span<const Row> emitted) {
    for_each_bit(emitted, [&](int r, int c) {
        --stack_at(type, dir, r, c);
        refresh_stack_masks(type, dir, r, c);
    });
}

void Automaton::refresh_stack_masks(int type, int dir, int r, int c) {
    const auto value = stack_at(type, dir, r, c);
    const Row bit = Row{1} << c;
    auto& nz = nonzero_plane(type, dir)[static_cast<std::size_t>(r)];
    auto& full = full_plane(type, dir)[static_cast<std::size_t>(r)];
    nz = value > 0 ? (nz | bit) : (nz & ~bit);
    const bool at_bound = params_.stack_bound && value >= *params_.stack_bound;
    full = at_bound ? (full | bit) : (full & ~bit);
}

Chain Automaton::chain_from_planes(std::span<const Row> horizontal, std::span<const Row> vertical) const {
    Chain out(params_.d);
    const std::size_t plane = rows_ * rows_;
    for_each_bit(horizontal, [&](int r, int c) {
        out.flip_index(static_cast<std::size_t>(r) * rows_ + static_cast<std::size_t>(c));
    });
    for_each_bit(vertical, [&](int r, int c) {
        out.flip_index(plane + static_cast<std::size_t>(r) * rows_ + static_cast<std::size_t>(c));
    });
    return out;
}

SiteState Automaton::site(Vertex v) const {
    const auto r = static_cast<std::size_t>(wrap(v.row, params_.d));
    const int c = wrap(v.col, params_.d);
    auto bit = [&](std::span<const Row> p) { return ((p[r] >> c) & 1u) != 0; };
    SiteState s;
    s.defect = bit(defect_plane());
    for (int type = 0; type < 2; ++type) {
        for (int dir = 0; dir < 4; ++dir) {
            auto t = static_cast<std::size_t>(type);
            auto k = static_cast<std::size_t>(dir);
            s.forward[t][k] = bit(forward_plane(type, dir));
            s.anti[t][k] = bit(anti_plane(type, dir));
            s.stack[t][k] = stack_at(type, dir, static_cast<int>(r), c);
        }
    }
    return s;
}

void Automaton::set_site(Vertex v, const SiteState& state) {
    const auto r = static_cast<std::size_t>(wrap(v.row, params_.d));
    const int c = wrap(v.col, params_.d);
    const Row bit = Row{1} << c;
    auto put = [&](std::span<Row> p, bool value) { p[r] = value ? (p[r] | bit) : (p[r] & ~bit); };
    put(defect_plane(), state.defect);
    for (int type = 0; type < 2; ++type) {
        for (int dir = 0; dir < 4; ++dir) {
            auto t = static_cast<std::size_t>(type);
            auto k = static_cast<std::size_t>(dir);
            const int value = state.stack[t][k];
            if (value < 0 || value > std::numeric_limits<std::uint16_t>::max() ||
                (params_.stack_bound && value > *params_.stack_bound)) {
                throw std::invalid_argument("stack value out of range");
            }
            put(forward_plane(type, dir), state.forward[t][k]);
            put(anti_plane(type, dir), state.anti[t][k]);
            stack_at(type, dir, static_cast<int>(r), c) = static_cast<std::uint16_t>(value);
            refresh_stack_masks(type, dir, static_cast<int>(r), c);
        }
    }
}

std::vector<Vertex> Automaton::defects() const {
    std::vector<Vertex> out;
    for_each_bit(defect_plane(), [&](int r, int c) { out.push_back({r, c}); });
    return out;
}

bool Automaton::is_zero() const {
    return std::all_of(planes_.begin(), planes_.end(), [](Row x) { return x == 0; }) &&
           std::all_of(stacks_.begin(), stacks_.end(), [](std::uint16_t s) { return s == 0; });
}

ChargeReport Automaton::charges() const {
    ChargeReport report;
    const int d = params_.d;
    for (int type = 0; type < 2; ++type) {
        for (auto dir : kDirections) {
            const int k = index_of(dir);
            const bool by_row = dir == Direction::E || dir == Direction::W;
            auto& lines = report.per_line[static_cast<std::size_t>(type)][static_cast<std::size_t>(k)];
            lines.assign(rows_, 0);
            auto count = [&](std::span<const Row> p, long sign) {
                for_each_bit(p, [&](int r, int c) { lines[static_cast<std::size_t>(by_row ? r : c)] += sign; });
            };
            count(forward_plane(type, k), +1);
            count(anti_plane(type, k), -1);
            for (int r = 0; r < d; ++r) {
                for (int c = 0; c < d; ++c) {
                    lines[static_cast<std::size_t>(by_row ? r : c)] -= stack_at(type, k, r, c);
                }
            }
            for (long q : lines) report.total[static_cast<std::size_t>(type)] += q;
        }
    }
    return report;
}

int Automaton::max_stack() const {
    if (stacks_.empty()) return 0;
    return *std::max_element(stacks_.begin(), stacks_.end());
}

bool operator==(const Automaton& a, const Automaton& b) {
    return a.params_.d == b.params_.d && a.params_.stack_bound == b.params_.stack_bound &&
           a.params_.attraction_priority == b.params_.attraction_priority &&
           a.params_.matching_priority == b.params_.matching_priority && a.planes_ == b.planes_ &&
           a.stacks_ == b.stacks_;
}

}  // namespace sigrule
