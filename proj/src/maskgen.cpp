#include "flameforge/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "flameforge/random.hpp"

namespace flameforge::masks {

namespace {

constexpr double kBoundsTolerance = 1e-9;

std::uint8_t clamp_channel(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void require_family(const AugmentedMask& mask, MaskFamily expected, std::string_view op) {
    if (mask.family != expected) {
        throw std::invalid_argument(std::string(op) + " expects a " + std::string(to_string(expected)) +
                                    " mask, got " + std::string(to_string(mask.family)));
    }
}

} // namespace

std::string_view to_string(MaskFamily family) {
    switch (family) {
    case MaskFamily::Binary: return "binary";
    case MaskFamily::Colored: return "colored";
    case MaskFamily::Noise: return "noise";
    case MaskFamily::Perlin: return "perlin";
    }
    return "unknown";
}

std::optional<MaskFamily> parse_family(std::string_view name) {
    for (auto f : {MaskFamily::Binary, MaskFamily::Colored, MaskFamily::Noise, MaskFamily::Perlin}) {
        if (name == to_string(f)) {
            return f;
        }
    }
    return std::nullopt;
}

std::string_view to_string(ShapeKind kind) {
    switch (kind) {
    case ShapeKind::Rectangle: return "rectangle";
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Ellipse: return "ellipse";
    }
    return "unknown";
}

double ShapeSpec::area() const noexcept {
    if (kind == ShapeKind::Rectangle) {
        return extent_w * extent_h;
    }
    return std::numbers::pi / 4.0 * extent_w * extent_h;
}

std::pair<double, double> ShapeSpec::half_bounds() const noexcept {
    const double a = extent_w / 2.0;
    const double b = extent_h / 2.0;
    const double c = std::abs(std::cos(rotation));
    const double s = std::abs(std::sin(rotation));
    switch (kind) {
    case ShapeKind::Rectangle: return {a * c + b * s, a * s + b * c};
    case ShapeKind::Circle: return {a, a};
    case ShapeKind::Ellipse: return {std::sqrt(a * a * c * c + b * b * s * s), std::sqrt(a * a * s * s + b * b * c * c)};
    }
    return {a, b};
}

bool ShapeSpec::contains(double x, double y) const noexcept {
    const double dx = x - center_x;
    const double dy = y - center_y;
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    const double lx = dx * c + dy * s;
    const double ly = -dx * s + dy * c;
    const double a = extent_w / 2.0;
    const double b = extent_h / 2.0;
    switch (kind) {
    case ShapeKind::Rectangle: return std::abs(lx) <= a && std::abs(ly) <= b;
    case ShapeKind::Circle: return lx * lx + ly * ly <= a * a;
    case ShapeKind::Ellipse: return (lx * lx) / (a * a) + (ly * ly) / (b * b) <= 1.0;
    }
    return false;
}

noise::PerlinParams PerlinMaskOptions::field_params() const {
    noise::PerlinParams p;
    p.seed = seed;
    p.frequency = frequency;
    p.octaves = octaves;
    p.lacunarity = lacunarity;
    p.persistence = persistence;
    p.warp_amplitude = warp_fraction;
    return p;
}

void PerlinMaskOptions::validate() const {
    field_params().validate();
    if (!std::isfinite(cut_threshold)) {
        throw std::invalid_argument("perlin mask: cut_threshold must be finite");
    }
    if (!(interior_boost >= 0.0) || !std::isfinite(interior_boost)) {
        throw std::invalid_argument("perlin mask: interior_boost must be >= 0");
    }
    if (min_fragment_px < 0) {
        throw std::invalid_argument("perlin mask: min_fragment_px must be >= 0");
    }
}

void MaskSpec::validate() const {
    if (canvas_w < 1 || canvas_h < 1) {
        throw std::invalid_argument("mask spec: canvas must be non-empty");
    }
    if (regions.empty()) {
        throw std::invalid_argument("mask spec: at least one region is required");
    }
    if (static_cast<int>(regions.size()) > max_regions) {
        throw std::invalid_argument("mask spec: " + std::to_string(regions.size()) + " regions exceed the maximum of " +
                                    std::to_string(max_regions));
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& r = regions[i];
        const std::string tag = "mask spec: region " + std::to_string(i) + ": ";
        if (!(r.extent_w > 0.0) || !(r.extent_h > 0.0)) {
            throw std::invalid_argument(tag + "extents must be positive");
        }
        if (r.kind == ShapeKind::Circle && r.extent_w != r.extent_h) {
            throw std::invalid_argument(tag + "circle extents must be equal");
        }
        if (r.area() < min_area_px) {
            throw std::invalid_argument(tag + "area below minimum");
        }
        const auto [hx, hy] = r.half_bounds();
        if (r.center_x - hx < -kBoundsTolerance || r.center_x + hx > canvas_w + kBoundsTolerance ||
            r.center_y - hy < -kBoundsTolerance || r.center_y + hy > canvas_h + kBoundsTolerance) {
            throw std::invalid_argument(tag + "bounding box outside the canvas");
        }
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("mask spec: sigma must be >= 0");
    }
    if (sigma != 0.0 && family != MaskFamily::Noise) {
        throw std::invalid_argument("mask spec: sigma is only valid for the noise family");
    }
    if (family == MaskFamily::Perlin) {
        perlin.validate();
    }
}

AugmentedMask make_mask(Image rgb, Bitmap occupancy, MaskFamily family) {
    if (rgb.width != occupancy.width || rgb.height != occupancy.height) {
        throw std::invalid_argument("make_mask: rgb and occupancy dimensions differ");
    }
    for (std::size_t i = 0; i < occupancy.bits.size(); ++i) {
        if (!occupancy.bits[i]) {
            rgb.data[i * 3] = rgb.data[i * 3 + 1] = rgb.data[i * 3 + 2] = 0;
        }
    }
    AugmentedMask out;
    out.regions = label_components(occupancy).boxes;
    out.rgb = std::move(rgb);
    out.occupancy = std::move(occupancy);
    out.family = family;
    return out;
}

std::optional<std::string> check_invariants(const AugmentedMask& mask) {
    if (mask.rgb.width != mask.occupancy.width || mask.rgb.height != mask.occupancy.height) {
        return "rgb and occupancy dimensions differ";
    }
    if (mask.occupancy.count() == 0) {
        return "occupancy is empty";
    }
    for (std::size_t i = 0; i < mask.occupancy.bits.size(); ++i) {
        if (!mask.occupancy.bits[i] &&
            (mask.rgb.data[i * 3] | mask.rgb.data[i * 3 + 1] | mask.rgb.data[i * 3 + 2]) != 0) {
            return "rgb is non-zero outside the occupancy at pixel " + std::to_string(i);
        }
    }
    const auto components = label_components(mask.occupancy);
    if (components.boxes != mask.regions) {
        return "region boxes do not match the connected components (" + std::to_string(mask.regions.size()) +
               " boxes, " + std::to_string(components.boxes.size()) + " components)";
    }
    return std::nullopt;
}

AugmentedMask gen_binary_mask(const MaskSpec& spec) {
    spec.validate();
    Bitmap occupancy(spec.canvas_w, spec.canvas_h);
    for (const auto& shape : spec.regions) {
        const auto [hx, hy] = shape.half_bounds();
        const int x0 = std::max(0, static_cast<int>(std::floor(shape.center_x - hx)));
        const int x1 = std::min(spec.canvas_w, static_cast<int>(std::ceil(shape.center_x + hx)) + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(shape.center_y - hy)));
        const int y1 = std::min(spec.canvas_h, static_cast<int>(std::ceil(shape.center_y + hy)) + 1);
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                if (shape.contains(x + 0.5, y + 0.5)) {
                    occupancy.set(x, y, true);
                }
            }
        }
    }
    if (occupancy.count() == 0) {
        throw std::invalid_argument("mask spec rasterizes to an empty occupancy");
    }
    Image rgb(spec.canvas_w, spec.canvas_h);
    for (std::size_t i = 0; i < occupancy.bits.size(); ++i) {
        if (occupancy.bits[i]) {
            rgb.data[i * 3] = rgb.data[i * 3 + 1] = rgb.data[i * 3 + 2] = 255;
        }
    }
    return make_mask(std::move(rgb), std::move(occupancy), MaskFamily::Binary);
}

AugmentedMask colorize(const AugmentedMask& mask, const FirePalette& palette, std::uint64_t seed,
                       const ColorizeOptions& options) {
    require_family(mask, MaskFamily::Binary, "colorize");
    if (palette.colors.empty()) {
        throw std::invalid_argument("colorize: palette is empty");
    }
    if (!(options.jitter >= 0.0 && options.jitter < 1.0)) {
        throw std::invalid_argument("colorize: jitter must be in [0, 1)");
    }
    const auto components = label_components(mask.occupancy);
    Rng rng(seed);
    std::vector<Rgb> fills;
    fills.reserve(components.boxes.size());
    for (std::size_t k = 0; k < components.boxes.size(); ++k) {
        fills.push_back(palette.colors[rng.below(palette.colors.size())]);
    }

    Image rgb(mask.width(), mask.height());
    for (std::size_t i = 0; i < components.labels.size(); ++i) {
        const auto label = components.labels[i];
        if (label == 0) {
            continue;
        }
        const Rgb& base = fills[static_cast<std::size_t>(label - 1)];
        const double factor = options.jitter > 0.0 ? 1.0 + options.jitter * rng.uniform(-1.0, 1.0) : 1.0;
        for (int c = 0; c < 3; ++c) {
            rgb.data[i * 3 + c] = clamp_channel(base[c] * factor);
        }
    }
    return make_mask(std::move(rgb), mask.occupancy, MaskFamily::Colored);
}

AugmentedMask add_gaussian(const AugmentedMask& mask, double sigma, std::uint64_t seed) {
    require_family(mask, MaskFamily::Colored, "add_gaussian");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("add_gaussian: sigma must be >= 0");
    }
    AugmentedMask out = mask;
    out.family = MaskFamily::Noise;
    if (sigma == 0.0) {
        return out;
    }
    const double scale = 255.0 * sigma;
    Rng rng(seed);
    for (std::size_t i = 0; i < out.occupancy.bits.size(); ++i) {
        if (!out.occupancy.bits[i]) {
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            auto& v = out.rgb.data[i * 3 + c];
            v = clamp_channel(v + scale * rng.normal());
        }
    }
    return out;
}

AugmentedMask apply_perlin(const AugmentedMask& mask, const PerlinMaskOptions& options) {
    require_family(mask, MaskFamily::Colored, "apply_perlin");
    options.validate();

    const auto components = label_components(mask.occupancy);
    Image rgb = mask.rgb;
    Bitmap occupancy(mask.width(), mask.height());
    const int w = mask.width();

    for (std::size_t k = 0; k < components.boxes.size(); ++k) {
        const PixelBox& box = components.boxes[k];
        const auto label = static_cast<std::int32_t>(k + 1);

        auto params = options.field_params();
        params.seed = derive_seed(options.seed, k);
        auto texture_params = params;
        texture_params.warp_amplitude = 0.0;
        const noise::NoiseField texture(texture_params);
        const noise::NoiseField cut_field(params);

        const double inv = 1.0 / box.width();
        const double cx = (box.x0 + box.x1) / 2.0;
        const double cy = (box.y0 + box.y1) / 2.0;
        const double rx = box.width() / 2.0;
        const double ry = box.height() / 2.0;

        // Cut values of this component's pixels, in raster order over the box.
        std::vector<std::pair<std::size_t, double>> cuts;
        cuts.reserve(components.areas[k]);
        for (int y = box.y0; y < box.y1; ++y) {
            for (int x = box.x0; x < box.x1; ++x) {
                const std::size_t idx = static_cast<std::size_t>(y) * w + x;
                if (components.labels[idx] != label) {
                    continue;
                }
                const double u = (x - box.x0 + 0.5) * inv;
                const double v = (y - box.y0 + 0.5) * inv;
                const double t = (1.0 + texture.fbm(u, v)) / 2.0;
                for (int c = 0; c < 3; ++c) {
                    rgb.data[idx * 3 + c] = clamp_channel(rgb.data[idx * 3 + c] * t);
                }
                const double nx = (x + 0.5 - cx) / rx;
                const double ny = (y + 0.5 - cy) / ry;
                const double boost = options.interior_boost * std::max(0.0, 1.0 - (nx * nx + ny * ny));
                cuts.emplace_back(idx, cut_field.warped_fbm(u, v) + boost);
            }
        }

        // Relax the threshold until the component keeps at least one pixel;
        // the field is bounded below by -1, so this terminates.
        double threshold = options.cut_threshold;
        const auto kept_any = [&] {
            return std::any_of(cuts.begin(), cuts.end(), [&](const auto& c) { return c.second >= threshold; });
        };
        while (!kept_any()) {
            threshold -= 0.25;
        }

        Bitmap local(box.width(), box.height());
        for (const auto& [idx, value] : cuts) {
            if (value >= threshold) {
                local.set(static_cast<int>(idx % w) - box.x0, static_cast<int>(idx / w) - box.y0, true);
            }
        }
        const auto fragments = label_components(local);
        const auto largest = static_cast<std::int32_t>(
            std::max_element(fragments.areas.begin(), fragments.areas.end()) - fragments.areas.begin() + 1);
        for (int y = 0; y < local.height; ++y) {
            for (int x = 0; x < local.width; ++x) {
                const auto f = fragments.labels[static_cast<std::size_t>(y) * local.width + x];
                if (f == 0) {
                    continue;
                }
                const bool big = fragments.areas[static_cast<std::size_t>(f - 1)] >=
                                 static_cast<std::size_t>(options.min_fragment_px);
                if (big || f == largest) {
                    occupancy.set(box.x0 + x, box.y0 + y, true);
                }
            }
        }
    }
    return make_mask(std::move(rgb), std::move(occupancy), MaskFamily::Perlin);
}

void MaskConstraints::validate(int canvas_w, int canvas_h) const {
    if (canvas_w < 1 || canvas_h < 1) {
        throw std::invalid_argument("mask constraints: canvas must be non-empty");
    }
    if (min_regions < 1 || max_regions < min_regions) {
        throw std::invalid_argument("mask constraints: need 1 <= min_regions <= max_regions");
    }
    if (!(min_size_frac > 0.0) || max_size_frac < min_size_frac) {
        throw std::invalid_argument("mask constraints: need 0 < min_size_frac <= max_size_frac");
    }
    if (kinds.empty()) {
        throw std::invalid_argument("mask constraints: no shape kinds allowed");
    }
    const double min_extent = min_size_frac * canvas_w;
    const double max_extent = max_size_frac * canvas_w;
    if (min_extent > std::min(canvas_w, canvas_h)) {
        throw std::invalid_argument("mask constraints unsatisfiable: minimum region size exceeds the canvas");
    }
    const double usable = std::min({max_extent, static_cast<double>(canvas_w), static_cast<double>(canvas_h)});
    bool reachable = false;
    for (auto kind : kinds) {
        const double best = kind == ShapeKind::Rectangle ? usable * usable : std::numbers::pi / 4.0 * usable * usable;
        reachable = reachable || best >= min_area_px;
    }
    if (!reachable) {
        throw std::invalid_argument("mask constraints unsatisfiable: no allowed shape reaches the minimum area");
    }
}

MaskSpec random_mask_spec(int canvas_w, int canvas_h, MaskFamily family, const MaskConstraints& constraints,
                          std::uint64_t seed) {
    constraints.validate(canvas_w, canvas_h);
    Rng rng(seed);
    MaskSpec spec;
    spec.canvas_w = canvas_w;
    spec.canvas_h = canvas_h;
    spec.family = family;
    spec.rng_seed = seed;
    spec.max_regions = constraints.max_regions;
    spec.min_area_px = constraints.min_area_px;

    const double lo = constraints.min_size_frac * canvas_w;
    const double hi = std::min({constraints.max_size_frac * canvas_w, static_cast<double>(canvas_w),
                                static_cast<double>(canvas_h)});
    const auto count =
        constraints.min_regions + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                                      constraints.max_regions - constraints.min_regions + 1)));
    constexpr int kMaxAttempts = 10000;
    for (int r = 0; r < count; ++r) {
        int attempt = 0;
        for (; attempt < kMaxAttempts; ++attempt) {
            ShapeSpec shape;
            shape.kind = constraints.kinds[rng.below(constraints.kinds.size())];
            shape.extent_w = rng.uniform(lo, hi);
            shape.extent_h = shape.kind == ShapeKind::Circle ? shape.extent_w : rng.uniform(lo, hi);
            shape.rotation = shape.kind == ShapeKind::Circle ? 0.0 : rng.uniform(0.0, std::numbers::pi);
            if (shape.area() < constraints.min_area_px) {
                continue;
            }
            const auto [hx, hy] = shape.half_bounds();
            if (2.0 * hx > canvas_w || 2.0 * hy > canvas_h) {
                continue;
            }
            shape.center_x = rng.uniform(hx, canvas_w - hx);
            shape.center_y = rng.uniform(hy, canvas_h - hy);
            spec.regions.push_back(shape);
            break;
        }
        if (attempt == kMaxAttempts) {
            throw std::invalid_argument("mask constraints: could not place a region within the attempt budget");
        }
    }
    return spec;
}

AugmentedMask build_mask(const MaskSpec& spec, const FirePalette& palette, const ColorizeOptions& colorize_options) {
    AugmentedMask mask = gen_binary_mask(spec);
    if (spec.family == MaskFamily::Binary) {
        return mask;
    }
    mask = colorize(mask, palette, stream_seed(spec.rng_seed, SeedStream::Color), colorize_options);
    switch (spec.family) {
    case MaskFamily::Noise: return add_gaussian(mask, spec.sigma, stream_seed(spec.rng_seed, SeedStream::Noise));
    case MaskFamily::Perlin: {
        auto options = spec.perlin;
        options.seed = stream_seed(spec.rng_seed, SeedStream::Perlin) ^ spec.perlin.seed;
        return apply_perlin(mask, options);
    }
    default: return mask;
    }
}

} // namespace flameforge::masks
