#include "sigrule/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace sigrule {

void NoiseParams::validate() const {
    auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!ok(eps_d) || !ok(eps_m)) {
        throw std::invalid_argument("error rates must lie in [0, 1]");
    }
}

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_index),
                      static_cast<std::uint32_t>(stream_index >> 32)};
    engine_.seed(seq);
}

BernoulliThreshold BernoulliThreshold::from_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability must lie in [0, 1]");
    BernoulliThreshold t;
    if (p >= 1.0) {
        t.always = true;
        t.never = false;
        return t;
    }
    // p * 2^64 is exact in binary floating point; truncation is the only rounding.
    t.threshold = static_cast<std::uint64_t>(std::ldexp(p, 64));
    t.never = t.threshold == 0;
    return t;
}

void sample_flips(std::size_t n, const BernoulliThreshold& p, RandomStream& stream,
                  std::vector<std::size_t>& out) {
    out.clear();
    if (p.never) {
        // Keep the stream position independent of the rate.
        for (std::size_t i = 0; i < n; ++i) (void)stream.next();
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (stream.bernoulli(p.threshold, p.always)) out.push_back(i);
    }
}

Chain sample_data_flips(int d, double eps_d, RandomStream& stream) {
    Chain out(d);
    std::vector<std::size_t> picks;
    sample_flips(2 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d),
                 BernoulliThreshold::from_probability(eps_d), stream, picks);
    for (auto i : picks) out.flip_index(i);
    return out;
}

Syndrome sample_meas_flips(int d, double eps_m, RandomStream& stream) {
    Syndrome out(d);
    std::vector<std::size_t> picks;
    sample_flips(static_cast<std::size_t>(d) * static_cast<std::size_t>(d),
                 BernoulliThreshold::from_probability(eps_m), stream, picks);
    for (auto i : picks) out.flip_index(i);
    return out;
}

Syndrome noisy_syndrome(const Chain& true_error, const Syndrome& meas_flips) {
    return boundary(true_error) ^ meas_flips;
}

}  // namespace sigrule
