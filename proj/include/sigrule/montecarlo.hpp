#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sigrule/automaton.hpp"
#include "sigrule/lattice.hpp"

namespace sigrule {

inline constexpr double kZ95 = 1.959963984540054;
inline constexpr double kZ90 = 1.6448536269514722;

[[nodiscard]] int default_tau(int d);

struct TrialConfig {
    int d = 0;
    double eps_d = 0.0;
    double eps_m = 0.0;
    int tau = 0;
    std::optional<int> stack_bound;
    std::uint64_t master_seed = 0;
    std::uint64_t trial_index = 0;

    void validate() const;
    [[nodiscard]] RuleParams rule_params() const;
};

struct TrialOutcome {
    bool fail_h = false;
    bool fail_v = false;
    int residual_defect_count = 0;  // defects left for the final readout
    int iteration_count = 0;

    [[nodiscard]] bool failed() const { return fail_h || fail_v; }
    friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

struct LogicalRate {
    double eps_l = 0.0;
    bool saturated = false;  // P_L above 3/4 was clamped
};

// Inverts P_L = 3/4 [1 - (1 - 4/3 eps_L)^tau].
[[nodiscard]] LogicalRate p_to_rate(double p_l, int tau);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

[[nodiscard]] Interval wilson_interval(long successes, long trials, double z = kZ95);

struct BatchStats {
    int tau = 0;
    long trials = 0;
    long fail_any = 0;
    long fail_h = 0;
    long fail_v = 0;
    double p_l = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double eps_l = 0.0;
    bool saturated = false;

    friend bool operator==(const BatchStats&, const BatchStats&) = default;
};

[[nodiscard]] BatchStats summarize(int tau, long trials, long fail_any, long fail_h, long fail_v,
                                   double z = kZ95);

// Full noisy decoding loop of one trial, then a noiseless matching readout.
[[nodiscard]] TrialOutcome run_trial(const TrialConfig& config);

// Same trajectory, read out (without disturbing it) after each checkpoint
// round. Checkpoints must be ascending within [1, config.tau].
[[nodiscard]] std::vector<TrialOutcome> run_trial_series(const TrialConfig& config,
                                                         std::span<const int> checkpoints);

// Trials 0..n_trials-1 of `base` (its trial_index is ignored). Results do
// not depend on `threads`.
[[nodiscard]] BatchStats run_batch(const TrialConfig& base, long n_trials, int threads = 1);
[[nodiscard]] std::vector<BatchStats> run_batch_series(const TrialConfig& base, long n_trials,
                                                       std::span<const int> checkpoints, int threads = 1);

}  // namespace sigrule
