#pragma once

#include <utility>
#include <vector>

#include "sigrule/lattice.hpp"

namespace sigrule {

// Defects paired off, each pair stored (smaller, larger) and the list sorted,
// so equal pairings compare equal.
struct Pairing {
    std::vector<std::pair<Vertex, Vertex>> pairs;

    [[nodiscard]] long weight(int d) const;
    friend bool operator==(const Pairing&, const Pairing&) = default;
};

// Exact minimum-weight perfect matching under the toroidal L1 metric. Among
// optimal pairings the lexicographically smallest one (row-major vertex
// order) is returned. Throws std::invalid_argument("invalid syndrome parity")
// for an odd number of defects.
[[nodiscard]] Pairing mwpm(const Syndrome& defects);

// Exhaustive oracle over all (n-1)!! pairings, n <= 12, same tie-break.
[[nodiscard]] Pairing matching_bruteforce(const Syndrome& defects);

// XOR of shortest paths over all pairs.
[[nodiscard]] Chain correction_from_pairing(const Pairing& pairing, int d);

namespace detail {

// Maximum-weight matching on a dense general graph (Edmonds' blossom
// algorithm with primal-dual updates, O(n^3)). weights[u][v] > 0 marks an
// edge; returns mate[u] or -1.
std::vector<int> max_weight_matching(const std::vector<std::vector<long>>& weights);

}  // namespace detail

}  // namespace sigrule
