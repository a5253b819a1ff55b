#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace flameforge::noise {

struct Offset2 {
    double x = 0.0;
    double y = 0.0;
};

// Parameters of a seeded fBm field with optional domain warping.
//
// Coordinates passed to the evaluation functions are scaled by `frequency`
// before lattice lookup, so with x in [0, 1) one image width spans
// `frequency` noise cells. `warp_amplitude` is expressed in the same units as
// the coordinates it displaces; render_field() takes it in pixels.
struct PerlinParams {
    std::uint64_t seed = 0;
    double frequency = 4.0;
    int octaves = 4;
    double lacunarity = 2.0;
    double persistence = 0.5;
    double warp_amplitude = 0.0;
    std::array<Offset2, 2> warp_offsets{{{5.2, 1.3}, {1.7, 9.2}}};

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

struct ScalarField {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Permutation-table gradient noise for one seed, with the classic 8-direction
// gradient set and quintic fade. Output lies in [-1, 1] and is exactly 0 on
// integer lattice points.
class GradientNoise {
public:
    explicit GradientNoise(std::uint64_t seed);

    // Raw lattice-space evaluation (no frequency scaling).
    double operator()(double x, double y) const noexcept;

private:
    std::array<std::uint8_t, 512> perm_{};
};

// Seed of octave i; octave 0 keeps the base seed.
std::uint64_t octave_seed(std::uint64_t seed, int octave) noexcept;

// Weighted octave sum normalized by the geometric-series weight, with the
// octave evaluator injected. `octave_fn(i, x, y)` returns the octave-i sample
// at already-scaled coordinates (x * lacunarity^i, y * lacunarity^i).
template <typename OctaveFn>
double fbm_accumulate(const PerlinParams& params, double x, double y, OctaveFn&& octave_fn) {
    double sum = 0.0;
    double norm = 0.0;
    double amplitude = 1.0;
    double scale = 1.0;
    for (int i = 0; i < params.octaves; ++i) {
        sum += amplitude * octave_fn(i, x * scale, y * scale);
        norm += amplitude;
        amplitude *= params.persistence;
        scale *= params.lacunarity;
    }
    return sum / norm;
}

// Cached evaluator for one PerlinParams: one permutation table per octave.
class NoiseField {
public:
    explicit NoiseField(const PerlinParams& params);

    const PerlinParams& params() const noexcept { return params_; }

    double perlin(double x, double y) const noexcept;
    double fbm(double x, double y) const noexcept;

    // (x, y) displaced by the two offset fbm sub-fields, scaled by warp_amplitude.
    Offset2 warp(double x, double y) const noexcept;

    template <typename FieldFn>
    double warped(FieldFn&& field_fn, double x, double y) const {
        if (params_.warp_amplitude == 0.0) {
            return field_fn(x, y);
        }
        const Offset2 p = warp(x, y);
        return field_fn(p.x, p.y);
    }

    double warped_fbm(double x, double y) const noexcept {
        return warped([this](double u, double v) { return fbm(u, v); }, x, y);
    }

private:
    PerlinParams params_;
    std::vector<GradientNoise> octaves_;
};

// Single octave at (x * frequency, y * frequency).
double perlin2(double x, double y, const PerlinParams& params);

double fbm(double x, double y, const PerlinParams& params);

double domain_warp(const std::function<double(double, double)>& field_fn, double x, double y,
                   const PerlinParams& params);

// Rasterizes fbm (optionally domain-warped) at pixel centres. Pixel (px, py)
// maps to ((px + 0.5) / width, (py + 0.5) / width); params.warp_amplitude is in
// pixels. Throws std::invalid_argument on a zero-area raster.
ScalarField render_field(int width, int height, const PerlinParams& params, bool warped);

} // namespace flameforge::noise
