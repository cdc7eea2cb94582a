#pragma once

// Counter-based random streams. Every (key, stream tag) pair names an
// independent sequence, so ensemble members and noise channels can be
// generated in any order or in parallel with identical output.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace sld {

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
public:
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static counter_type apply(counter_type ctr, key_type key) noexcept
    {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static counter_type round(const counter_type& c, const key_type& k) noexcept
    {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

// SplitMix64 finalizer; used to spread master seeds into Philox keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t path_id) noexcept
{
    return mix64(seed ^ mix64(path_id ^ 0x5D6A3C1F00000000ull));
}

// Sequential view over one Philox substream. Satisfies
// UniformRandomBitGenerator with 64-bit output.
class PhiloxStream {
public:
    using result_type = std::uint64_t;

    PhiloxStream(std::uint64_t key, std::uint64_t stream_tag) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          tag_(stream_tag)
    {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        if (used_ == 4) {
            refill();
        }
        const std::uint64_t lo = block_[used_];
        const std::uint64_t hi = block_[used_ + 1];
        used_ += 2;
        return (hi << 32) | lo;
    }

    // Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    void refill() noexcept
    {
        const Philox4x32::counter_type ctr{
            static_cast<std::uint32_t>(block_index_),
            static_cast<std::uint32_t>(block_index_ >> 32),
            static_cast<std::uint32_t>(tag_),
            static_cast<std::uint32_t>(tag_ >> 32)};
        block_ = Philox4x32::apply(ctr, key_);
        ++block_index_;
        used_ = 0;
    }

    Philox4x32::key_type key_;
    std::uint64_t tag_;
    std::uint64_t block_index_ = 0;
    Philox4x32::counter_type block_{};
    int used_ = 4;
};

// Standard normal deviates by the Marsaglia polar method.
class GaussianStream {
public:
    GaussianStream(std::uint64_t key, std::uint64_t stream_tag) noexcept : uniform_(key, stream_tag) {}

    double operator()() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform_.uniform() - 1.0;
            v = 2.0 * uniform_.uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

private:
    PhiloxStream uniform_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sld
