#include "flameforge/noisefield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "flameforge/random.hpp"

namespace flameforge::noise {

namespace {

constexpr double fade(double t) noexcept {
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

constexpr double lerp(double a, double b, double t) noexcept {
    return a + t * (b - a);
}

// (1,1) (-1,1) (1,-1) (-1,-1) (1,0) (-1,0) (0,1) (0,-1)
constexpr double grad(std::uint8_t hash, double x, double y) noexcept {
    switch (hash & 7) {
    case 0: return x + y;
    case 1: return -x + y;
    case 2: return x - y;
    case 3: return -x - y;
    case 4: return x;
    case 5: return -x;
    case 6: return y;
    default: return -y;
    }
}

} // namespace

void PerlinParams::validate() const {
    if (!(frequency > 0.0) || !std::isfinite(frequency)) {
        throw std::invalid_argument("perlin: frequency must be > 0");
    }
    if (octaves < 1) {
        throw std::invalid_argument("perlin: octaves must be >= 1");
    }
    if (!(lacunarity > 1.0) || !std::isfinite(lacunarity)) {
        throw std::invalid_argument("perlin: lacunarity must be > 1");
    }
    if (!(persistence > 0.0 && persistence <= 1.0)) {
        throw std::invalid_argument("perlin: persistence must be in (0, 1]");
    }
    if (!(warp_amplitude >= 0.0) || !std::isfinite(warp_amplitude)) {
        throw std::invalid_argument("perlin: warp_amplitude must be >= 0");
    }
    for (const auto& o : warp_offsets) {
        if (!std::isfinite(o.x) || !std::isfinite(o.y)) {
            throw std::invalid_argument("perlin: warp offsets must be finite");
        }
    }
}

// Fisher-Yates over 0..255 driven by a SplitMix64 stream of the seed; index
// j = next % (i + 1).
GradientNoise::GradientNoise(std::uint64_t seed) {
    std::array<std::uint8_t, 256> p{};
    std::iota(p.begin(), p.end(), std::uint8_t{0});
    std::uint64_t state = seed;
    for (int i = 255; i > 0; --i) {
        state += kGoldenGamma;
        const auto j = static_cast<int>(mix64(state) % static_cast<std::uint64_t>(i + 1));
        std::swap(p[i], p[j]);
    }
    for (int i = 0; i < 512; ++i) {
        perm_[i] = p[i & 255];
    }
}

double GradientNoise::operator()(double x, double y) const noexcept {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int xi = static_cast<int>(static_cast<std::int64_t>(fx) & 255);
    const int yi = static_cast<int>(static_cast<std::int64_t>(fy) & 255);
    const double dx = x - fx;
    const double dy = y - fy;
    const double u = fade(dx);
    const double v = fade(dy);

    const int a = perm_[xi] + yi;
    const int b = perm_[xi + 1] + yi;
    const double n00 = grad(perm_[a], dx, dy);
    const double n10 = grad(perm_[b], dx - 1.0, dy);
    const double n01 = grad(perm_[a + 1], dx, dy - 1.0);
    const double n11 = grad(perm_[b + 1], dx - 1.0, dy - 1.0);

    const double value = lerp(lerp(n00, n10, u), lerp(n01, n11, u), v);
    return std::clamp(value, -1.0, 1.0);
}

std::uint64_t octave_seed(std::uint64_t seed, int octave) noexcept {
    return seed ^ mix64(static_cast<std::uint64_t>(octave) * kGoldenGamma);
}

NoiseField::NoiseField(const PerlinParams& params) : params_(params) {
    params_.validate();
    octaves_.reserve(static_cast<std::size_t>(params_.octaves));
    for (int i = 0; i < params_.octaves; ++i) {
        octaves_.emplace_back(octave_seed(params_.seed, i));
    }
}

double NoiseField::perlin(double x, double y) const noexcept {
    return octaves_.front()(x * params_.frequency, y * params_.frequency);
}

double NoiseField::fbm(double x, double y) const noexcept {
    const double f = params_.frequency;
    return fbm_accumulate(params_, x, y, [this, f](int i, double u, double v) {
        return octaves_[static_cast<std::size_t>(i)](u * f, v * f);
    });
}

Offset2 NoiseField::warp(double x, double y) const noexcept {
    const auto& o = params_.warp_offsets;
    const double a = params_.warp_amplitude;
    return {x + a * fbm(x + o[0].x, y + o[0].y), y + a * fbm(x + o[1].x, y + o[1].y)};
}

double perlin2(double x, double y, const PerlinParams& params) {
    params.validate();
    return GradientNoise(params.seed)(x * params.frequency, y * params.frequency);
}

double fbm(double x, double y, const PerlinParams& params) {
    return NoiseField(params).fbm(x, y);
}

double domain_warp(const std::function<double(double, double)>& field_fn, double x, double y,
                   const PerlinParams& params) {
    return NoiseField(params).warped(field_fn, x, y);
}

ScalarField render_field(int width, int height, const PerlinParams& params, bool warped) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("render_field: raster must have positive area, got " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
    PerlinParams scaled = params;
    scaled.warp_amplitude = params.warp_amplitude / width;
    const NoiseField field(scaled);

    ScalarField out{width, height, {}};
    out.values.resize(static_cast<std::size_t>(width) * height);
    const double inv = 1.0 / width;
    for (int py = 0; py < height; ++py) {
        const double v = (py + 0.5) * inv;
        for (int px = 0; px < width; ++px) {
            const double u = (px + 0.5) * inv;
            out.values[static_cast<std::size_t>(py) * width + px] = warped ? field.warped_fbm(u, v) : field.fbm(u, v);
        }
    }
    return out;
}

} // namespace flameforge::noise
