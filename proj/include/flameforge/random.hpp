#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>

namespace flameforge {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer. A bijection on 64-bit words with mix64(0) == 0.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of item `index` under `base`. Injective in `index` for a fixed base:
// the affine step is a bijection (odd multiplier) and so is mix64.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return mix64(base + (index + 1) * kGoldenGamma);
}

// Named sub-stream of a seed, e.g. the mask or the colorize stream of an item.
enum class SeedStream : std::uint64_t {
    Mask = 1,
    Color = 2,
    Noise = 3,
    Perlin = 4,
    Generate = 5,
    Style = 6,
};

constexpr std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream) noexcept {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(stream) * kGoldenGamma));
}

// 64-bit FNV-1a; stable across platforms, used to key mock outputs on payload bytes.
class Fnv1a {
public:
    void update(std::span<const std::uint8_t> bytes) noexcept {
        for (std::uint8_t b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view text) noexcept {
        update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void update_value(const T& value) noexcept {
        update(std::span(reinterpret_cast<const std::uint8_t*>(&value), sizeof(T)));
    }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// Seeded generator. The engine is fully specified by the standard; the
// conversions to doubles are done here so that streams are identical across
// standard library implementations (the std distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Lemire's multiply-shift; bias is below 2^-64 * n.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace flameforge
