#include "sigrule/readout.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>

namespace sigrule {

long Pairing::weight(int d) const {
    long total = 0;
    for (const auto& [a, b] : pairs) total += toric_distance(a, b, d);
    return total;
}

namespace detail {

namespace {

// Dense weighted blossom. Vertices are 1..n, blossoms n+1..2n; index 0 is
// the null vertex. Labels are kept doubled so every update stays integral.
class Blossom {
public:
    explicit Blossom(const std::vector<std::vector<long>>& weights)
        : n_(static_cast<int>(weights.size())), cap_(2 * n_ + 1) {
        g_.assign(static_cast<std::size_t>(cap_), std::vector<EdgeRec>(static_cast<std::size_t>(cap_)));
        for (int u = 1; u <= n_; ++u) {
            for (int v = 1; v <= n_; ++v) {
                long w = (u == v) ? 0 : weights[static_cast<std::size_t>(u - 1)][static_cast<std::size_t>(v - 1)];
                at(u, v) = {u, v, std::max(w, 0L)};
            }
        }
        lab_.assign(static_cast<std::size_t>(cap_), 0);
        match_.assign(static_cast<std::size_t>(cap_), 0);
        slack_.assign(static_cast<std::size_t>(cap_), 0);
        st_.assign(static_cast<std::size_t>(cap_), 0);
        pa_.assign(static_cast<std::size_t>(cap_), 0);
        label_.assign(static_cast<std::size_t>(cap_), 0);
        vis_.assign(static_cast<std::size_t>(cap_), 0);
        flower_.assign(static_cast<std::size_t>(cap_), {});
        flower_from_.assign(static_cast<std::size_t>(cap_), std::vector<int>(static_cast<std::size_t>(n_ + 1), 0));
    }

    std::vector<int> solve() {
        n_x_ = n_;
        for (int u = 0; u <= n_; ++u) {
            st(u) = u;
            flower(u).clear();
        }
        long w_max = 0;
        for (int u = 1; u <= n_; ++u) {
            for (int v = 1; v <= n_; ++v) {
                ff(u, v) = (u == v) ? u : 0;
                w_max = std::max(w_max, at(u, v).w);
            }
        }
        for (int u = 1; u <= n_; ++u) lab(u) = w_max;
        while (augment_once()) {
        }
        std::vector<int> mate(static_cast<std::size_t>(n_), -1);
        for (int u = 1; u <= n_; ++u) {
            if (match(u) != 0) mate[static_cast<std::size_t>(u - 1)] = match(u) - 1;
        }
        return mate;
    }

private:
    struct EdgeRec {
        int u = 0;
        int v = 0;
        long w = 0;
    };

    EdgeRec& at(int u, int v) { return g_[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]; }
    long& lab(int x) { return lab_[static_cast<std::size_t>(x)]; }
    int& match(int x) { return match_[static_cast<std::size_t>(x)]; }
    int& slack(int x) { return slack_[static_cast<std::size_t>(x)]; }
    int& st(int x) { return st_[static_cast<std::size_t>(x)]; }
    int& pa(int x) { return pa_[static_cast<std::size_t>(x)]; }
    int& S(int x) { return label_[static_cast<std::size_t>(x)]; }
    int& vis(int x) { return vis_[static_cast<std::size_t>(x)]; }
    std::vector<int>& flower(int x) { return flower_[static_cast<std::size_t>(x)]; }
    int& ff(int b, int x) { return flower_from_[static_cast<std::size_t>(b)][static_cast<std::size_t>(x)]; }

    long e_delta(const EdgeRec& e) { return lab(e.u) + lab(e.v) - at(e.u, e.v).w * 2; }

    void update_slack(int u, int x) {
        if (slack(x) == 0 || e_delta(at(u, x)) < e_delta(at(slack(x), x))) slack(x) = u;
    }

    void set_slack(int x) {
        slack(x) = 0;
        for (int u = 1; u <= n_; ++u) {
            if (at(u, x).w > 0 && st(u) != x && S(st(u)) == 0) update_slack(u, x);
        }
    }

    void q_push(int x) {
        if (x <= n_) {
            queue_.push(x);
        } else {
            for (int y : flower(x)) q_push(y);
        }
    }

    void set_st(int x, int b) {
        st(x) = b;
        if (x > n_) {
            for (int y : flower(x)) set_st(y, b);
        }
    }

    int get_pr(int b, int xr) {
        auto& f = flower(b);
        int pr = static_cast<int>(std::find(f.begin(), f.end(), xr) - f.begin());
        if (pr % 2 == 1) {
            std::reverse(f.begin() + 1, f.end());
            return static_cast<int>(f.size()) - pr;
        }
        return pr;
    }

    void set_match(int u, int v) {
        match(u) = at(u, v).v;
        if (u > n_) {
            EdgeRec e = at(u, v);
            int xr = ff(u, e.u);
            int pr = get_pr(u, xr);
            auto& f = flower(u);
            for (int i = 0; i < pr; ++i) set_match(f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>(i ^ 1)]);
            set_match(xr, v);
            std::rotate(f.begin(), f.begin() + pr, f.end());
        }
    }

    void augment(int u, int v) {
        for (;;) {
            int xnv = st(match(u));
            set_match(u, v);
            if (xnv == 0) return;
            set_match(xnv, st(pa(xnv)));
            u = st(pa(xnv));
            v = xnv;
        }
    }

    int get_lca(int u, int v) {
        ++stamp_;
        while (u != 0 || v != 0) {
            if (u != 0) {
                if (vis(u) == stamp_) return u;
                vis(u) = stamp_;
                u = st(match(u));
                if (u != 0) u = st(pa(u));
            }
            std::swap(u, v);
        }
        return 0;
    }

    void add_blossom(int u, int lca, int v) {
        int b = n_ + 1;
        while (b <= n_x_ && st(b) != 0) ++b;
        if (b > n_x_) ++n_x_;
        lab(b) = 0;
        S(b) = 0;
        match(b) = match(lca);
        auto& f = flower(b);
        f.clear();
        f.push_back(lca);
        for (int x = u, y; x != lca; x = st(pa(y))) {
            f.push_back(x);
            y = st(match(x));
            f.push_back(y);
            q_push(y);
        }
        std::reverse(f.begin() + 1, f.end());
        for (int x = v, y; x != lca; x = st(pa(y))) {
            f.push_back(x);
            y = st(match(x));
            f.push_back(y);
            q_push(y);
        }
        set_st(b, b);
        for (int x = 1; x <= n_x_; ++x) {
            at(b, x).w = 0;
            at(x, b).w = 0;
        }
        for (int x = 1; x <= n_; ++x) ff(b, x) = 0;
        for (int xs : f) {
            for (int x = 1; x <= n_x_; ++x) {
                if (at(b, x).w == 0 || e_delta(at(xs, x)) < e_delta(at(b, x))) {
                    at(b, x) = at(xs, x);
                    at(x, b) = at(x, xs);
                }
            }
            for (int x = 1; x <= n_; ++x) {
                if (ff(xs, x) != 0) ff(b, x) = xs;
            }
        }
        set_slack(b);
    }

    void expand_blossom(int b) {
        auto f = flower(b);
        for (int x : f) set_st(x, x);
        int xr = ff(b, at(b, pa(b)).u);
        int pr = get_pr(b, xr);
        f = flower(b);
        for (int i = 0; i < pr; i += 2) {
            int xs = f[static_cast<std::size_t>(i)];
            int xns = f[static_cast<std::size_t>(i + 1)];
            pa(xs) = at(xns, xs).u;
            S(xs) = 1;
            S(xns) = 0;
            slack(xs) = 0;
            set_slack(xns);
            q_push(xns);
        }
        S(xr) = 1;
        pa(xr) = pa(b);
        for (std::size_t i = static_cast<std::size_t>(pr) + 1; i < f.size(); ++i) {
            int xs = f[i];
            S(xs) = -1;
            set_slack(xs);
        }
        st(b) = 0;
    }

    bool on_found_edge(const EdgeRec& e) {
        int u = st(e.u);
        int v = st(e.v);
        if (S(v) == -1) {
            pa(v) = e.u;
            S(v) = 1;
            int nu = st(match(v));
            slack(v) = 0;
            slack(nu) = 0;
            S(nu) = 0;
            q_push(nu);
        } else if (S(v) == 0) {
            int lca = get_lca(u, v);
            if (lca == 0) {
                augment(u, v);
                augment(v, u);
                return true;
            }
            add_blossom(u, lca, v);
        }
        return false;
    }

    bool augment_once() {
        for (int x = 1; x <= n_x_; ++x) {
            S(x) = -1;
            slack(x) = 0;
        }
        queue_ = {};
        for (int x = 1; x <= n_x_; ++x) {
            if (st(x) == x && match(x) == 0) {
                pa(x) = 0;
                S(x) = 0;
                q_push(x);
            }
        }
        if (queue_.empty()) return false;
        for (;;) {
            while (!queue_.empty()) {
                int u = queue_.front();
                queue_.pop();
                if (S(st(u)) == 1) continue;
                for (int v = 1; v <= n_; ++v) {
                    if (at(u, v).w > 0 && st(u) != st(v)) {
                        if (e_delta(at(u, v)) == 0) {
                            if (on_found_edge(at(u, v))) return true;
                        } else {
                            update_slack(u, st(v));
                        }
                    }
                }
            }
            long delta = std::numeric_limits<long>::max();
            for (int b = n_ + 1; b <= n_x_; ++b) {
                if (st(b) == b && S(b) == 1) delta = std::min(delta, lab(b) / 2);
            }
            for (int x = 1; x <= n_x_; ++x) {
                if (st(x) == x && slack(x) != 0) {
                    if (S(x) == -1) {
                        delta = std::min(delta, e_delta(at(slack(x), x)));
                    } else if (S(x) == 0) {
                        delta = std::min(delta, e_delta(at(slack(x), x)) / 2);
                    }
                }
            }
            for (int u = 1; u <= n_; ++u) {
                if (S(st(u)) == 0) {
                    if (lab(u) <= delta) return false;
                    lab(u) -= delta;
                } else if (S(st(u)) == 1) {
                    lab(u) += delta;
                }
            }
            for (int b = n_ + 1; b <= n_x_; ++b) {
                if (st(b) == b) {
                    if (S(st(b)) == 0) {
                        lab(b) += delta * 2;
                    } else if (S(st(b)) == 1) {
                        lab(b) -= delta * 2;
                    }
                }
            }
            queue_ = {};
            for (int x = 1; x <= n_x_; ++x) {
                if (st(x) == x && slack(x) != 0 && st(slack(x)) != x && e_delta(at(slack(x), x)) == 0) {
                    if (on_found_edge(at(slack(x), x))) return true;
                }
            }
            for (int b = n_ + 1; b <= n_x_; ++b) {
                if (st(b) == b && S(b) == 1 && lab(b) == 0) expand_blossom(b);
            }
        }
    }

    int n_;
    int cap_;
    int n_x_ = 0;
    int stamp_ = 0;
    std::vector<std::vector<EdgeRec>> g_;
    std::vector<long> lab_;
    std::vector<int> match_, slack_, st_, pa_, label_, vis_;
    std::vector<std::vector<int>> flower_;
    std::vector<std::vector<int>> flower_from_;
    std::queue<int> queue_;
};

}  // namespace

std::vector<int> max_weight_matching(const std::vector<std::vector<long>>& weights) {
    if (weights.empty()) return {};
    return Blossom(weights).solve();
}

}  // namespace detail

namespace {

constexpr int kSubsetLimit = 20;

using DistanceTable = std::vector<std::vector<int>>;

DistanceTable distances(const std::vector<Vertex>& vs, int d) {
    DistanceTable w(vs.size(), std::vector<int>(vs.size(), 0));
    for (std::size_t i = 0; i < vs.size(); ++i) {
        for (std::size_t j = 0; j < vs.size(); ++j) w[i][j] = toric_distance(vs[i], vs[j], d);
    }
    return w;
}

// Pairs `ids[a]` with `ids[b]`, ids sorted ascending, via subset dynamic
// programming; reconstruction takes the smallest optimal partner of the
// lowest unpaired vertex at every level, which is the lexicographic minimum.
std::vector<std::pair<int, int>> subset_matching(const std::vector<int>& ids, const DistanceTable& w) {
    const int n = static_cast<int>(ids.size());
    if (n == 0) return {};
    const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1);
    constexpr int kInf = std::numeric_limits<int>::max() / 2;
    std::vector<int> best(std::size_t{1} << n, kInf);
    best[0] = 0;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        if (std::popcount(mask) % 2 != 0) continue;
        const int i = std::countr_zero(mask);
        std::uint32_t rest = mask & ~(1u << i);
        int value = kInf;
        for (std::uint32_t bits = rest; bits != 0; bits &= bits - 1) {
            const int j = std::countr_zero(bits);
            const int sub = best[rest & ~(1u << j)];
            const int cand = sub + w[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])]
                                    [static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])];
            value = std::min(value, cand);
        }
        best[mask] = value;
    }
    std::vector<std::pair<int, int>> out;
    std::uint32_t mask = full;
    while (mask != 0) {
        const int i = std::countr_zero(mask);
        std::uint32_t rest = mask & ~(1u << i);
        for (std::uint32_t bits = rest; bits != 0; bits &= bits - 1) {
            const int j = std::countr_zero(bits);
            const std::uint32_t sub = rest & ~(1u << j);
            if (best[sub] + w[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])]
                             [static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])] ==
                best[mask]) {
                out.emplace_back(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
                mask = sub;
                break;
            }
        }
    }
    return out;
}

// Optimal perfect-matching weight over `ids` via the blossom solver.
long blossom_optimum(const std::vector<int>& ids, const DistanceTable& w, std::vector<int>* mate_out) {
    const std::size_t n = ids.size();
    if (n == 0) return 0;
    long max_dist = 0;
    for (int a : ids)
        for (int b : ids) max_dist = std::max<long>(max_dist, w[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
    // Any perfect matching outweighs every matching with fewer pairs.
    const long big = static_cast<long>(n) * (max_dist + 1) + 1;
    std::vector<std::vector<long>> weights(n, std::vector<long>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) weights[i][j] = big - w[static_cast<std::size_t>(ids[i])][static_cast<std::size_t>(ids[j])];
        }
    }
    auto mate = detail::max_weight_matching(weights);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mate[i] < 0) throw std::logic_error("blossom matching is not perfect");
        if (static_cast<std::size_t>(mate[i]) > i) {
            total += w[static_cast<std::size_t>(ids[i])][static_cast<std::size_t>(ids[static_cast<std::size_t>(mate[i])])];
        }
    }
    if (mate_out != nullptr) *mate_out = std::move(mate);
    return total;
}

// Lexicographic minimum among optimal pairings for large instances: fix the
// lowest vertex's partner to the smallest candidate that keeps the optimum,
// then recurse; the tail falls back to the subset solver once small enough.
std::vector<std::pair<int, int>> large_matching(std::vector<int> ids, const DistanceTable& w) {
    std::vector<std::pair<int, int>> out;
    std::vector<int> mate;
    long optimum = blossom_optimum(ids, w, &mate);
    while (static_cast<int>(ids.size()) > kSubsetLimit) {
        const int lowest = ids[0];
        const std::size_t partner_pos = static_cast<std::size_t>(mate[0]);
        std::size_t chosen = partner_pos;
        std::vector<int> chosen_rest;
        std::vector<int> chosen_mate;
        long chosen_opt = 0;
        bool found = false;
        for (std::size_t k = 1; k < partner_pos && !found; ++k) {
            const long wk = w[static_cast<std::size_t>(lowest)][static_cast<std::size_t>(ids[k])];
            std::vector<int> rest;
            for (std::size_t t = 1; t < ids.size(); ++t)
                if (t != k) rest.push_back(ids[t]);
            std::vector<int> rest_mate;
            long rest_opt = blossom_optimum(rest, w, &rest_mate);
            if (rest_opt + wk == optimum) {
                found = true;
                chosen = k;
                chosen_rest = std::move(rest);
                chosen_mate = std::move(rest_mate);
                chosen_opt = rest_opt;
            }
        }
        if (!found) {
            // The solver's own partner is optimal; its matching restricted to
            // the rest stays optimal for the rest.
            for (std::size_t t = 1; t < ids.size(); ++t)
                if (t != chosen) chosen_rest.push_back(ids[t]);
            chosen_opt = optimum - w[static_cast<std::size_t>(lowest)][static_cast<std::size_t>(ids[chosen])];
            std::vector<int> position(ids.size(), -1);
            for (std::size_t t = 1, u = 0; t < ids.size(); ++t)
                if (t != chosen) position[t] = static_cast<int>(u++);
            chosen_mate.assign(chosen_rest.size(), -1);
            for (std::size_t t = 1; t < ids.size(); ++t) {
                if (t == chosen) continue;
                chosen_mate[static_cast<std::size_t>(position[t])] =
                    position[static_cast<std::size_t>(mate[t])];
            }
        }
        out.emplace_back(lowest, ids[chosen]);
        ids = std::move(chosen_rest);
        mate = std::move(chosen_mate);
        optimum = chosen_opt;
    }
    auto tail = subset_matching(ids, w);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

Pairing to_pairing(const std::vector<Vertex>& vs, const std::vector<std::pair<int, int>>& idx) {
    Pairing p;
    for (auto [a, b] : idx) {
        Vertex u = vs[static_cast<std::size_t>(a)];
        Vertex v = vs[static_cast<std::size_t>(b)];
        if (v < u) std::swap(u, v);
        p.pairs.emplace_back(u, v);
    }
    std::sort(p.pairs.begin(), p.pairs.end());
    return p;
}

void check_parity(std::size_t n) {
    if (n % 2 != 0) throw std::invalid_argument("invalid syndrome parity");
}

}  // namespace

Pairing mwpm(const Syndrome& defects) {
    const auto vs = defects.vertices();
    check_parity(vs.size());
    if (vs.empty()) return {};
    const auto w = distances(vs, defects.distance());
    std::vector<int> ids(vs.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    if (static_cast<int>(ids.size()) <= kSubsetLimit) return to_pairing(vs, subset_matching(ids, w));
    return to_pairing(vs, large_matching(ids, w));
}

Pairing matching_bruteforce(const Syndrome& defects) {
    const auto vs = defects.vertices();
    check_parity(vs.size());
    if (vs.size() > 12) throw std::invalid_argument("brute-force matching is limited to 12 defects");
    const auto w = distances(vs, defects.distance());
    const int n = static_cast<int>(vs.size());

    std::vector<std::pair<int, int>> current;
    std::vector<std::pair<int, int>> best;
    long best_weight = std::numeric_limits<long>::max();
    std::vector<bool> used(vs.size(), false);
    // Enumeration order pairs the lowest free vertex with partners in
    // ascending order, i.e. lexicographic order over pairings; strict '<'
    // keeps the first optimum found.
    auto recurse = [&](auto&& self, long acc) -> void {
        int i = 0;
        while (i < n && used[static_cast<std::size_t>(i)]) ++i;
        if (i == n) {
            if (acc < best_weight) {
                best_weight = acc;
                best = current;
            }
            return;
        }
        used[static_cast<std::size_t>(i)] = true;
        for (int j = i + 1; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            used[static_cast<std::size_t>(j)] = true;
            current.emplace_back(i, j);
            self(self, acc + w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            current.pop_back();
            used[static_cast<std::size_t>(j)] = false;
        }
        used[static_cast<std::size_t>(i)] = false;
    };
    recurse(recurse, 0);
    return to_pairing(vs, best);
}

Chain correction_from_pairing(const Pairing& pairing, int d) {
    Chain out(d);
    for (const auto& [a, b] : pairing.pairs) out ^= shortest_path_chain(a, b, d);
    return out;
}

}  // namespace sigrule
