#include <doctest.h>

#include <random>
#include <unordered_map>

#include "sigrule/readout.hpp"
#include "support.hpp"

using namespace sigrule;

namespace {

Syndrome defects_of(int d, std::vector<Vertex> vs) { return Syndrome::from_vertices(d, vs); }

// Independent exact optimum: pair the lowest unmatched defect with each
// candidate, memoized on the set of matched defects.
long optimum_weight(const std::vector<Vertex>& vs, int d) {
    const int n = static_cast<int>(vs.size());
    std::unordered_map<std::uint64_t, long> memo;
    std::function<long(std::uint64_t)> best = [&](std::uint64_t used) -> long {
        if (used == (std::uint64_t{1} << n) - 1) return 0;
        if (auto it = memo.find(used); it != memo.end()) return it->second;
        int i = 0;
        while (used >> i & 1) ++i;
        long out = std::numeric_limits<long>::max();
        for (int j = i + 1; j < n; ++j) {
            if (used >> j & 1) continue;
            const long w = toric_distance(vs[static_cast<std::size_t>(i)], vs[static_cast<std::size_t>(j)], d) +
                           best(used | (std::uint64_t{1} << i) | (std::uint64_t{1} << j));
            out = std::min(out, w);
        }
        memo[used] = out;
        return out;
    };
    return best(0);
}

void check_perfect(const Pairing& p, const Syndrome& s) {
    std::vector<Vertex> covered;
    for (const auto& [a, b] : p.pairs) {
        CHECK(a < b);
        covered.push_back(a);
        covered.push_back(b);
    }
    std::sort(covered.begin(), covered.end());
    CHECK(covered == s.vertices());
    CHECK(std::is_sorted(p.pairs.begin(), p.pairs.end()));
}

}  // namespace

TEST_SUITE("readout") {

TEST_CASE("examples") {
    CHECK(mwpm(Syndrome(7)).pairs.empty());

    const auto two = mwpm(defects_of(7, {{0, 0}, {0, 3}}));
    REQUIRE(two.pairs.size() == 1);
    CHECK(two.weight(7) == 3);

    const auto four = defects_of(9, {{0, 0}, {0, 2}, {4, 0}, {4, 2}});
    const auto p = mwpm(four);
    CHECK(p.pairs == std::vector<std::pair<Vertex, Vertex>>{{{0, 0}, {0, 2}}, {{4, 0}, {4, 2}}});
    CHECK(p.weight(9) == 4);
    CHECK(matching_bruteforce(four) == p);
    // The two alternatives cost 8 and 12.
    CHECK(toric_distance({0, 0}, {4, 0}, 9) + toric_distance({0, 2}, {4, 2}, 9) == 8);
    CHECK(toric_distance({0, 0}, {4, 2}, 9) + toric_distance({0, 2}, {4, 0}, 9) == 12);

    const auto corr = correction_from_pairing(p, 9);
    CHECK(corr.weight() == 4);
    CHECK(boundary(corr) == four);
}

TEST_CASE("errors") {
    CHECK_THROWS_WITH_AS((void)mwpm(defects_of(7, {{1, 1}})), "invalid syndrome parity", std::invalid_argument);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS((void)matching_bruteforce(testing::random_defects(9, 14, rng)), std::invalid_argument);
    CHECK_THROWS_AS((void)matching_bruteforce(testing::random_defects(9, 3, rng)), std::invalid_argument);
}

TEST_CASE("trivial pairings") {
    const auto s = defects_of(5, {{1, 1}, {3, 4}});
    CHECK(matching_bruteforce(s) == mwpm(s));
    CHECK(correction_from_pairing({}, 5).empty());
    Pairing one;
    one.pairs.push_back({{0, 0}, {0, 1}});
    CHECK(correction_from_pairing(one, 5).edges() == std::vector<Edge>{{Orientation::H, {0, 0}}});
}

TEST_CASE("matching equals the exhaustive oracle, tie-break included") {
    std::mt19937_64 rng(31);
    for (int d : {7, 15}) {
        for (int n : {4, 6, 8, 10, 12}) {
            for (int i = 0; i < 60; ++i) {
                const auto s = testing::random_defects(d, n, rng);
                const auto fast = mwpm(s);
                const auto slow = matching_bruteforce(s);
                CHECK(fast.weight(d) == slow.weight(d));
                CHECK(fast == slow);
                check_perfect(fast, s);
                CHECK(boundary(correction_from_pairing(fast, d)) == s);
            }
        }
    }
}

TEST_CASE("large instances are optimal") {
    std::mt19937_64 rng(32);
    for (int n : {14, 18, 20, 22, 24}) {
        for (int i = 0; i < 6; ++i) {
            const auto s = testing::random_defects(15, n, rng);
            const auto p = mwpm(s);
            check_perfect(p, s);
            CHECK(p.weight(15) == optimum_weight(s.vertices(), 15));
            CHECK(boundary(correction_from_pairing(p, 15)) == s);
        }
    }
}

TEST_CASE("dense instances with many ties") {
    // Small lattices crowd defects together, so equal-weight optima abound.
    std::mt19937_64 rng(33);
    for (int i = 0; i < 40; ++i) {
        const auto s = testing::random_defects(5, 22, rng);
        const auto p = mwpm(s);
        check_perfect(p, s);
        CHECK(p.weight(5) == optimum_weight(s.vertices(), 5));
    }
    for (int i = 0; i < 40; ++i) {
        const auto s = testing::random_defects(4, 12, rng);
        CHECK(mwpm(s) == matching_bruteforce(s));
    }
}

TEST_CASE("very large instances stay perfect and deterministic") {
    std::mt19937_64 rng(34);
    for (int n : {40, 80}) {
        const auto s = testing::random_defects(21, n, rng);
        const auto p = mwpm(s);
        check_perfect(p, s);
        CHECK(mwpm(s) == p);
        // No single swap of partners between two pairs improves the weight.
        for (std::size_t a = 0; a < p.pairs.size(); ++a) {
            for (std::size_t b = a + 1; b < p.pairs.size(); ++b) {
                const auto [u1, v1] = p.pairs[a];
                const auto [u2, v2] = p.pairs[b];
                const int now = toric_distance(u1, v1, 21) + toric_distance(u2, v2, 21);
                CHECK(now <= toric_distance(u1, u2, 21) + toric_distance(v1, v2, 21));
                CHECK(now <= toric_distance(u1, v2, 21) + toric_distance(v1, u2, 21));
            }
        }
    }
}

TEST_CASE("general weighted matching") {
    // Triangle plus pendant: the best matching uses the pendant edge.
    std::vector<std::vector<long>> w(4, std::vector<long>(4, 0));
    auto set = [&](int a, int b, long x) { w[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = w[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = x; };
    set(0, 1, 5);
    set(1, 2, 5);
    set(0, 2, 5);
    set(2, 3, 4);
    const auto mate = detail::max_weight_matching(w);
    CHECK(mate[2] == 3);
    CHECK(mate[3] == 2);
    CHECK(mate[0] == 1);

    // A blossom: odd cycle 0-1-2-3-4 with a stem, optimum needs shrinking.
    std::vector<std::vector<long>> c(6, std::vector<long>(6, 0));
    auto setc = [&](int a, int b, long x) { c[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = c[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = x; };
    setc(0, 1, 8);
    setc(1, 2, 9);
    setc(2, 3, 10);
    setc(3, 4, 7);
    setc(4, 0, 9);
    setc(4, 5, 6);
    const auto m2 = detail::max_weight_matching(c);
    long total = 0;
    for (int i = 0; i < 6; ++i)
        if (m2[static_cast<std::size_t>(i)] > i) total += c[static_cast<std::size_t>(i)][static_cast<std::size_t>(m2[static_cast<std::size_t>(i)])];
    // Enumerated by hand: {0-1, 2-3, 4-5} = 24 is the maximum.
    CHECK(total == 24);
}

}  // TEST_SUITE
