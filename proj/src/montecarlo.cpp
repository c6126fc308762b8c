#include "sigrule/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "sigrule/noise.hpp"
#include "sigrule/readout.hpp"

namespace sigrule {

int default_tau(int d) {
    check_distance(d);
    return 20 * d;
}

void TrialConfig::validate() const {
    check_distance(d);
    if (tau < 1) throw std::invalid_argument("tau must be >= 1");
    NoiseParams{eps_d, eps_m}.validate();
    rule_params().validate();
}

RuleParams TrialConfig::rule_params() const {
    RuleParams p;
    p.d = d;
    p.stack_bound = stack_bound;
    return p;
}

LogicalRate p_to_rate(double p_l, int tau) {
    if (tau < 1) throw std::invalid_argument("tau must be >= 1");
    if (p_l < 0.0) throw std::invalid_argument("P_L must be non-negative");
    LogicalRate out;
    if (p_l >= 0.75) {
        out.saturated = p_l > 0.75;
        out.eps_l = 0.75;
        return out;
    }
    // 3/4 [1 - (1 - 4/3 P_L)^(1/tau)], written to stay accurate for tiny P_L.
    out.eps_l = -0.75 * std::expm1(std::log1p(-p_l / 0.75) / tau);
    return out;
}

Interval wilson_interval(long successes, long trials, double z) {
    if (trials <= 0) throw std::invalid_argument("wilson interval needs trials > 0");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
    if (successes == 0) ci.low = 0.0;
    if (successes == trials) ci.high = 1.0;
    return ci;
}

BatchStats summarize(int tau, long trials, long fail_any, long fail_h, long fail_v, double z) {
    BatchStats s;
    s.tau = tau;
    s.trials = trials;
    s.fail_any = fail_any;
    s.fail_h = fail_h;
    s.fail_v = fail_v;
    s.p_l = static_cast<double>(fail_any) / static_cast<double>(trials);
    auto ci = wilson_interval(fail_any, trials, z);
    s.ci_low = ci.low;
    s.ci_high = ci.high;
    auto rate = p_to_rate(s.p_l, tau);
    s.eps_l = rate.eps_l;
    s.saturated = rate.saturated;
    return s;
}

namespace {

// Residual error and its exact syndrome, updated edge by edge.
class ErrorTracker {
public:
    explicit ErrorTracker(int d) : d_(d), error_(d), syndrome_(d) {
        const std::size_t edges = 2 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
        ends_.reserve(edges);
        for (std::size_t i = 0; i < edges; ++i) {
            auto [a, b] = endpoints(edge_at(i, d), d);
            ends_.emplace_back(vertex_index(a, d), vertex_index(b, d));
        }
    }

    void flip(std::size_t edge) {
        error_.flip_index(edge);
        syndrome_.flip_index(ends_[edge].first);
        syndrome_.flip_index(ends_[edge].second);
    }

    void apply(const Chain& chain) {
        for (auto i : chain.edge_indices()) flip(i);
    }

    [[nodiscard]] const Syndrome& syndrome() const { return syndrome_; }

    // Noiseless matching readout of the current state; the state itself is
    // left untouched.
    [[nodiscard]] TrialOutcome read_out(int rounds) const {
        TrialOutcome out;
        out.iteration_count = rounds;
        out.residual_defect_count = static_cast<int>(syndrome_.count());
        Chain residual = error_;
        if (!syndrome_.empty()) residual ^= correction_from_pairing(mwpm(syndrome_), d_);
        const auto cls = homology_class(residual);
        out.fail_h = cls.h;
        out.fail_v = cls.v;
        return out;
    }

private:
    int d_;
    Chain error_;
    Syndrome syndrome_;
    std::vector<std::pair<std::size_t, std::size_t>> ends_;
};

}  // namespace

std::vector<TrialOutcome> run_trial_series(const TrialConfig& config, std::span<const int> checkpoints) {
    config.validate();
    if (checkpoints.empty()) throw std::invalid_argument("at least one checkpoint is required");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) || checkpoints.front() < 1 ||
        checkpoints.back() > config.tau) {
        throw std::invalid_argument("checkpoints must be ascending within [1, tau]");
    }
    const int d = config.d;
    const auto data_p = BernoulliThreshold::from_probability(config.eps_d);
    const auto meas_p = BernoulliThreshold::from_probability(config.eps_m);
    const std::size_t n_edges = 2 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
    const std::size_t n_vertices = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);

    RandomStream stream(config.master_seed, config.trial_index);
    Automaton automaton(config.rule_params());
    ErrorTracker tracker(d);
    std::vector<std::size_t> picks;
    std::vector<TrialOutcome> outcomes;
    outcomes.reserve(checkpoints.size());
    auto next_checkpoint = checkpoints.begin();

    const int last = checkpoints.back();
    for (int t = 1; t <= last; ++t) {
        sample_flips(n_edges, data_p, stream, picks);
        for (auto e : picks) tracker.flip(e);
        Syndrome measured = tracker.syndrome();
        sample_flips(n_vertices, meas_p, stream, picks);
        for (auto v : picks) measured.flip_index(v);
        tracker.apply(automaton.iterate(measured));
        while (next_checkpoint != checkpoints.end() && *next_checkpoint == t) {
            outcomes.push_back(tracker.read_out(t));
            ++next_checkpoint;
        }
    }
    return outcomes;
}

TrialOutcome run_trial(const TrialConfig& config) {
    const int checkpoint = config.tau;
    return run_trial_series(config, std::span<const int>(&checkpoint, 1)).front();
}

std::vector<BatchStats> run_batch_series(const TrialConfig& base, long n_trials, std::span<const int> checkpoints,
                                         int threads) {
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    base.validate();
    const std::size_t k = checkpoints.size();
    struct Counts {
        std::vector<long> any, h, v;
    };
    auto make_counts = [k] { return Counts{std::vector<long>(k, 0), std::vector<long>(k, 0), std::vector<long>(k, 0)}; };

    const int workers = static_cast<int>(std::max<long>(1, std::min<long>(threads, n_trials)));
    std::vector<Counts> partial(static_cast<std::size_t>(workers), make_counts());
    std::atomic<long> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));

    auto work = [&](std::size_t w) {
        try {
            auto& counts = partial[w];
            for (long i = next++; i < n_trials; i = next++) {
                TrialConfig cfg = base;
                cfg.trial_index = static_cast<std::uint64_t>(i);
                auto outcomes = run_trial_series(cfg, checkpoints);
                for (std::size_t c = 0; c < k; ++c) {
                    counts.any[c] += outcomes[c].failed() ? 1 : 0;
                    counts.h[c] += outcomes[c].fail_h ? 1 : 0;
                    counts.v[c] += outcomes[c].fail_v ? 1 : 0;
                }
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, static_cast<std::size_t>(w));
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<BatchStats> out;
    for (std::size_t c = 0; c < k; ++c) {
        long any = 0, h = 0, v = 0;
        for (const auto& p : partial) {
            any += p.any[c];
            h += p.h[c];
            v += p.v[c];
        }
        out.push_back(summarize(checkpoints[c], n_trials, any, h, v));
    }
    return out;
}

BatchStats run_batch(const TrialConfig& base, long n_trials, int threads) {
    const int checkpoint = base.tau;
    return run_batch_series(base, n_trials, std::span<const int>(&checkpoint, 1), threads).front();
}

}  // namespace sigrule
