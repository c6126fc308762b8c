#include "sigrule/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sigrule {

void check_distance(int d) {
    if (d < 3) {
        throw std::invalid_argument("lattice distance must be >= 3, got " + std::to_string(d));
    }
}

std::size_t vertex_index(Vertex v, int d) {
    return static_cast<std::size_t>(v.row) * static_cast<std::size_t>(d) +
           static_cast<std::size_t>(v.col);
}

Vertex vertex_at(std::size_t index, int d) {
    auto ud = static_cast<std::size_t>(d);
    return {static_cast<int>(index / ud), static_cast<int>(index % ud)};
}

std::size_t edge_index(const Edge& e, int d) {
    auto plane = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
    return static_cast<std::size_t>(e.orientation) * plane + vertex_index(e.anchor, d);
}

Edge edge_at(std::size_t index, int d) {
    auto plane = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
    auto o = index < plane ? Orientation::H : Orientation::V;
    return {o, vertex_at(index % plane, d)};
}

std::pair<Vertex, Vertex> endpoints(const Edge& e, int d) {
    const Vertex& a = e.anchor;
    if (e.orientation == Orientation::H) {
        return {a, {a.row, wrap(a.col + 1, d)}};
    }
    return {a, {wrap(a.row + 1, d), a.col}};
}

namespace detail {

std::size_t BitVector::count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

bool BitVector::none() const {
    return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

void BitVector::xor_with(const BitVector& other) {
    if (other.nbits_ != nbits_) {
        throw std::invalid_argument("F2 vector size mismatch");
    }
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
}

std::vector<std::size_t> BitVector::ones() const {
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < words_.size(); ++w) {
        std::uint64_t word = words_[w];
        while (word != 0) {
            out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
            word &= word - 1;
        }
    }
    return out;
}

}  // namespace detail

Chain::Chain(int d) : d_(d), bits_(2 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d)) {
    check_distance(d);
}

std::vector<Edge> Chain::edges() const {
    std::vector<Edge> out;
    for (auto i : bits_.ones()) out.push_back(edge_at(i, d_));
    return out;
}

Chain& Chain::operator^=(const Chain& other) {
    if (other.d_ != d_) throw std::invalid_argument("chain distance mismatch");
    bits_.xor_with(other.bits_);
    return *this;
}

Syndrome::Syndrome(int d) : d_(d), bits_(static_cast<std::size_t>(d) * static_cast<std::size_t>(d)) {
    check_distance(d);
}

Syndrome Syndrome::from_vertices(int d, std::span<const Vertex> vertices) {
    Syndrome s(d);
    for (const auto& v : vertices) s.flip({wrap(v.row, d), wrap(v.col, d)});
    return s;
}

std::vector<Vertex> Syndrome::vertices() const {
    std::vector<Vertex> out;
    for (auto i : bits_.ones()) out.push_back(vertex_at(i, d_));
    return out;
}

Syndrome& Syndrome::operator^=(const Syndrome& other) {
    if (other.d_ != d_) throw std::invalid_argument("syndrome distance mismatch");
    bits_.xor_with(other.bits_);
    return *this;
}

Syndrome boundary(const Chain& chain) {
    const int d = chain.distance();
    Syndrome out(d);
    for (const auto& e : chain.edges()) {
        auto [a, b] = endpoints(e, d);
        out.flip(a);
        out.flip(b);
    }
    return out;
}

HomologyClass homology_class(const Chain& cycle) {
    if (!boundary(cycle).empty()) {
        throw std::invalid_argument("chain has nonempty boundary");
    }
    const int d = cycle.distance();
    HomologyClass cls;
    for (const auto& e : cycle.edges()) {
        if (e.orientation == Orientation::H && e.anchor.col == d - 1) cls.h = !cls.h;
        if (e.orientation == Orientation::V && e.anchor.row == d - 1) cls.v = !cls.v;
    }
    return cls;
}

int toric_distance(Vertex u, Vertex v, int d) {
    int dr = std::abs(u.row - v.row) % d;
    int dc = std::abs(u.col - v.col) % d;
    return std::min(dr, d - dr) + std::min(dc, d - dc);
}

namespace {

// Signed step count from `from` to `to` along one periodic axis.
int signed_leg(int from, int to, int d) {
    int forward = wrap(to - from, d);
    int backward = d - forward;
    if (forward == 0) return 0;
    return forward <= backward ? forward : -backward;
}

}  // namespace

Chain shortest_path_chain(Vertex u, Vertex v, int d) {
    Chain out(d);
    int row = wrap(u.row, d);
    int col = wrap(u.col, d);
    int dr = signed_leg(row, wrap(v.row, d), d);
    int dc = signed_leg(col, wrap(v.col, d), d);
    for (int step = 0; step < std::abs(dr); ++step) {
        if (dr > 0) {
            out.flip({Orientation::V, {row, col}});
            row = wrap(row + 1, d);
        } else {
            row = wrap(row - 1, d);
            out.flip({Orientation::V, {row, col}});
        }
    }
    for (int step = 0; step < std::abs(dc); ++step) {
        if (dc > 0) {
            out.flip({Orientation::H, {row, col}});
            col = wrap(col + 1, d);
        } else {
            col = wrap(col - 1, d);
            out.flip({Orientation::H, {row, col}});
        }
    }
    return out;
}

Chain plaquette_loop(Vertex corner, int d) {
    Chain out(d);
    int r = wrap(corner.row, d);
    int c = wrap(corner.col, d);
    out.flip({Orientation::H, {r, c}});
    out.flip({Orientation::H, {wrap(r + 1, d), c}});
    out.flip({Orientation::V, {r, c}});
    out.flip({Orientation::V, {r, wrap(c + 1, d)}});
    return out;
}

}  // namespace sigrule
