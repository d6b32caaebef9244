#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace twinbeam {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

/// Counter-based engine satisfying UniformRandomBitGenerator. The
/// (seed, stream, index) triple fixes the sequence; nothing is shared between
/// engines, so any number of them can run concurrently.
class PhiloxEngine {
public:
    using result_type = std::uint64_t;

    PhiloxEngine(std::uint64_t seed, std::uint32_t stream, std::uint64_t index)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream),
          index_(index) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (cursor_ == 2) refill();
        return buffer_[cursor_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    void refill() {
        const auto out = philox4x32_10(
            {block_, stream_, static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32)}, key_);
        ++block_;
        buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        cursor_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_;
    std::uint64_t index_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int cursor_ = 2;
};

/// Seed plus stream tag. Hands out one independent engine per work item
/// (pulse, shot), which is what makes parallel sampling reproducible.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint32_t stream = 0) : seed_(seed), stream_(stream) {}

    PhiloxEngine engine(std::uint64_t index) const { return PhiloxEngine(seed_, stream_, index); }

    /// A distinct stream under the same seed, e.g. one per pipeline stage.
    CounterRng substream(std::uint32_t tag) const {
        // Mix so that substream(a).substream(b) differs from substream(b).substream(a).
        return CounterRng(seed_, stream_ * 0x9E3779B1u + tag + 1u);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint32_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint32_t stream_;
};

}  // namespace twinbeam
