#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sigrule {

// Periodic d x d lattice. Vertices carry the parity checks, edges carry the
// qubits. Row indices grow southward and column indices grow eastward.

struct Vertex {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const Vertex&, const Vertex&) = default;
};

enum class Orientation : std::uint8_t { H = 0, V = 1 };

// H joins (r,c)-(r,c+1), V joins (r,c)-(r+1,c), both modulo d.
struct Edge {
    Orientation orientation = Orientation::H;
    Vertex anchor;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct HomologyClass {
    bool h = false;  // winding parity across the vertical seam (col d-1 | col 0)
    bool v = false;  // winding parity across the horizontal seam (row d-1 | row 0)

    [[nodiscard]] bool trivial() const { return !h && !v; }
    friend bool operator==(const HomologyClass&, const HomologyClass&) = default;
};

void check_distance(int d);

[[nodiscard]] inline int wrap(int x, int d) {
    int r = x % d;
    return r < 0 ? r + d : r;
}

[[nodiscard]] std::size_t vertex_index(Vertex v, int d);
[[nodiscard]] Vertex vertex_at(std::size_t index, int d);
// Edge order is (orientation, row, col) lexicographic with H before V.
[[nodiscard]] std::size_t edge_index(const Edge& e, int d);
[[nodiscard]] Edge edge_at(std::size_t index, int d);
[[nodiscard]] std::pair<Vertex, Vertex> endpoints(const Edge& e, int d);

namespace detail {

// Fixed-size F2 vector packed into 64-bit words.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

    [[nodiscard]] std::size_t nbits() const { return nbits_; }
    [[nodiscard]] bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }
    void set(std::size_t i, bool value) {
        if (test(i) != value) flip(i);
    }
    void clear() { std::fill(words_.begin(), words_.end(), 0); }
    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool none() const;
    void xor_with(const BitVector& other);
    [[nodiscard]] std::vector<std::size_t> ones() const;
    [[nodiscard]] std::span<const std::uint64_t> words() const { return words_; }

    friend bool operator==(const BitVector&, const BitVector&) = default;

private:
    std::size_t nbits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace detail

// F2 vector over the 2d^2 edges.
class Chain {
public:
    Chain() = default;
    explicit Chain(int d);

    [[nodiscard]] int distance() const { return d_; }
    [[nodiscard]] bool contains(const Edge& e) const { return bits_.test(edge_index(e, d_)); }
    void flip(const Edge& e) { bits_.flip(edge_index(e, d_)); }
    void flip_index(std::size_t i) { bits_.flip(i); }
    [[nodiscard]] std::size_t weight() const { return bits_.count(); }
    [[nodiscard]] bool empty() const { return bits_.none(); }
    void clear() { bits_.clear(); }
    // Sorted by edge index.
    [[nodiscard]] std::vector<Edge> edges() const;
    [[nodiscard]] std::vector<std::size_t> edge_indices() const { return bits_.ones(); }

    Chain& operator^=(const Chain& other);
    friend Chain operator^(Chain a, const Chain& b) { return a ^= b; }
    friend bool operator==(const Chain&, const Chain&) = default;

private:
    int d_ = 0;
    detail::BitVector bits_;
};

// F2 vector over the d^2 vertices.
class Syndrome {
public:
    Syndrome() = default;
    explicit Syndrome(int d);
    static Syndrome from_vertices(int d, std::span<const Vertex> vertices);

    [[nodiscard]] int distance() const { return d_; }
    [[nodiscard]] bool contains(Vertex v) const { return bits_.test(vertex_index(v, d_)); }
    [[nodiscard]] bool test_index(std::size_t i) const { return bits_.test(i); }
    void flip(Vertex v) { bits_.flip(vertex_index(v, d_)); }
    void flip_index(std::size_t i) { bits_.flip(i); }
    [[nodiscard]] std::size_t count() const { return bits_.count(); }
    [[nodiscard]] bool empty() const { return bits_.none(); }
    void clear() { bits_.clear(); }
    // Sorted row-major.
    [[nodiscard]] std::vector<Vertex> vertices() const;

    Syndrome& operator^=(const Syndrome& other);
    friend Syndrome operator^(Syndrome a, const Syndrome& b) { return a ^= b; }
    friend bool operator==(const Syndrome&, const Syndrome&) = default;

private:
    int d_ = 0;
    detail::BitVector bits_;
};

[[nodiscard]] Syndrome boundary(const Chain& chain);
// Throws std::invalid_argument("chain has nonempty boundary") for non-cycles.
[[nodiscard]] HomologyClass homology_class(const Chain& cycle);
[[nodiscard]] int toric_distance(Vertex u, Vertex v, int d);
// Rows first, then columns; each leg takes the shorter way around, ties go
// toward increasing coordinate.
[[nodiscard]] Chain shortest_path_chain(Vertex u, Vertex v, int d);
// Boundary loop of the face whose north-west corner is `corner`.
[[nodiscard]] Chain plaquette_loop(Vertex corner, int d);

}  // namespace sigrule
