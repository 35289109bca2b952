#ifndef RBDSDE_RNG_HPP
#define RBDSDE_RNG_HPP

#include <cstdint>

namespace rbdsde {

/// Counter-based random stream. All randomness in the library flows from one
/// master seed; independent consumers (scenario index, path sampler, probe
/// generator) get their own stream id, so adding scenarios or reordering
/// consumers never reshuffles the draws of an existing stream.
///
/// The generator is splitmix64: the state advances by a fixed odd constant
/// (so it is a pure counter) and the output is a bijective mix of the state.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id) {
        state_ = mix(mix(master_seed + GOLDEN) ^ mix(stream_id * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
        has_spare_ = false;
        spare_ = 0.0;
    }

    std::uint64_t next_u64() {
        state_ += GOLDEN;
        return mix(state_);
    }

    /// Uniform draw in the open interval (0, 1); never returns 0 or 1, so it
    /// is safe under log().
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via the Marsaglia polar method (rejection, no trig).
    double next_normal();

    /// Index in [0, n) with rejection to avoid modulo bias.
    std::uint64_t next_below(std::uint64_t n);

private:
    static constexpr std::uint64_t GOLDEN = 0x9e3779b97f4a7c15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    bool has_spare_;
    double spare_;
};

} // namespace rbdsde

#endif
