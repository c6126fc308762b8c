#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sigrule/lattice.hpp"

namespace sigrule {

// Independent per-round bit flips on data qubits (eps_d) and on measurement
// outcomes (eps_m).
struct NoiseParams {
    double eps_d = 0.0;
    double eps_m = 0.0;

    // Throws std::invalid_argument unless both rates lie in [0, 1].
    void validate() const;
};

// Deterministic random source for one trial.
//
// The engine is std::mt19937_64 seeded through std::seed_seq with the words
// of (master_seed, stream_index); both are fully specified by the standard,
// so a (seed, index) pair yields the same sequence on every platform. Trial
// i of a batch always draws from stream i, whatever order trials run in.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_index);

    std::uint64_t next() { return engine_(); }

    // True with probability `threshold / 2^64`, or always. Consumes exactly
    // one word either way.
    bool bernoulli(std::uint64_t threshold, bool always) {
        const std::uint64_t x = engine_();
        return always || x < threshold;
    }

private:
    std::mt19937_64 engine_;
};

// Integer acceptance threshold for a Bernoulli(p) draw against a uniform
// 64-bit word. Exact and platform independent. p >= 1 sets `always`.
struct BernoulliThreshold {
    std::uint64_t threshold = 0;
    bool always = false;
    bool never = true;

    static BernoulliThreshold from_probability(double p);
};

// Indices in [0, n) kept independently with the given probability, ascending.
void sample_flips(std::size_t n, const BernoulliThreshold& p, RandomStream& stream,
                  std::vector<std::size_t>& out);

[[nodiscard]] Chain sample_data_flips(int d, double eps_d, RandomStream& stream);
[[nodiscard]] Syndrome sample_meas_flips(int d, double eps_m, RandomStream& stream);
// boundary(true_error) XOR meas_flips.
[[nodiscard]] Syndrome noisy_syndrome(const Chain& true_error, const Syndrome& meas_flips);

}  // namespace sigrule
