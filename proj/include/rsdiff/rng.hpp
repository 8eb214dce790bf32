#pragma once

// Counter-based RNG (Philox4x32-10, Salmon et al. SC'11) with SplitMix64 key
// derivation. One generator per (seed, path, stream) triple: streams never
// collide, draws are independent of scheduling, and ensembles are bitwise
// reproducible under any worker count.

#include <array>
#include <cmath>
#include <cstdint>

namespace rsdiff {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += UINT64_C(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

/// Independent stream identifiers within one path.
enum class RngStream : std::uint64_t { Diffusion = 1, Jumps = 2, Aux = 3 };

class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t path, RngStream stream) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s ^= path * UINT64_C(0xD1342543DE82EF95) + static_cast<std::uint64_t>(stream);
        std::uint64_t b = splitmix64(s);
        key_[0] = static_cast<std::uint32_t>(a);
        key_[1] = static_cast<std::uint32_t>(a >> 32);
        counter_[2] = static_cast<std::uint32_t>(b);
        counter_[3] = static_cast<std::uint32_t>(b >> 32);
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return block_[pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1] (safe as a log argument).
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; second value of each pair is cached.
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static void round_once(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
        const std::uint64_t p0 = UINT64_C(0xD2511F53) * ctr[0];
        const std::uint64_t p1 = UINT64_C(0xCD9E8D57) * ctr[2];
        std::array<std::uint32_t, 4> out;
        out[0] = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
        out[1] = static_cast<std::uint32_t>(p1);
        out[2] = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
        out[3] = static_cast<std::uint32_t>(p0);
        ctr = out;
    }

    void refill() {
        std::array<std::uint32_t, 4> ctr = counter_;
        std::array<std::uint32_t, 2> key = key_;
        for (int i = 0; i < 10; ++i) {
            if (i > 0) {
                key[0] += UINT32_C(0x9E3779B9);
                key[1] += UINT32_C(0xBB67AE85);
            }
            round_once(ctr, key);
        }
        block_ = ctr;
        pos_ = 0;
        if (++counter_[0] == 0 && ++counter_[1] == 0) ++counter_[2];
    }

    std::array<std::uint32_t, 4> counter_{0, 0, 0, 0};
    std::array<std::uint32_t, 2> key_{0, 0};
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace rsdiff
