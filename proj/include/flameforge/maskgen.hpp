#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flameforge/image.hpp"
#include "flameforge/noisefield.hpp"

namespace flameforge::masks {

enum class MaskFamily { Binary, Colored, Noise, Perlin };

std::string_view to_string(MaskFamily family);
std::optional<MaskFamily> parse_family(std::string_view name);

enum class ShapeKind { Rectangle, Circle, Ellipse };

std::string_view to_string(ShapeKind kind);

// A filled shape in canvas pixel coordinates. `extent_w`/`extent_h` are the
// full width and height before rotation (for circles both equal the diameter).
struct ShapeSpec {
    ShapeKind kind = ShapeKind::Rectangle;
    double center_x = 0.0;
    double center_y = 0.0;
    double extent_w = 0.0;
    double extent_h = 0.0;
    double rotation = 0.0;

    double area() const noexcept;
    // Axis-aligned half extents of the rotated shape.
    std::pair<double, double> half_bounds() const noexcept;
    bool contains(double x, double y) const noexcept;
};

// Perlin-family settings. The noise is rendered per region over the region's
// bounding box: `frequency` counts cells across the box width and the warp
// displacement is `warp_fraction` of the box width.
struct PerlinMaskOptions {
    std::uint64_t seed = 0;
    double frequency = 4.0;
    int octaves = 4;
    double lacunarity = 2.0;
    double persistence = 0.5;
    double warp_fraction = 0.25;
    // Pixels whose centre-boosted warped field falls below this are removed.
    double cut_threshold = 0.0;
    // Boost added to the cut field at the region centre, fading to 0 at the rim.
    double interior_boost = 1.0;
    // Eroded fragments smaller than this are dropped (never the last one).
    int min_fragment_px = 16;

    // Field parameters in box-normalized coordinates (box width = 1).
    noise::PerlinParams field_params() const;
    void validate() const;
};

struct MaskSpec {
    int canvas_w = 0;
    int canvas_h = 0;
    std::vector<ShapeSpec> regions;
    MaskFamily family = MaskFamily::Binary;
    double sigma = 0.0;
    PerlinMaskOptions perlin;
    std::uint64_t rng_seed = 0;
    int max_regions = 3;
    double min_area_px = 32.0 * 32.0;

    // Throws std::invalid_argument naming the violated invariant.
    void validate() const;
};

struct FirePalette {
    std::vector<Rgb> colors;
    int source_count = 0;

    bool operator==(const FirePalette&) const = default;
};

struct AugmentedMask {
    Image rgb;
    Bitmap occupancy;
    std::vector<PixelBox> regions;
    MaskFamily family = MaskFamily::Binary;

    int width() const noexcept { return occupancy.width; }
    int height() const noexcept { return occupancy.height; }
};

// Builds an AugmentedMask of `family` around an occupancy map, filling
// `regions` from its connected components. rgb is zeroed off-occupancy.
AugmentedMask make_mask(Image rgb, Bitmap occupancy, MaskFamily family);

// First violated AugmentedMask invariant, if any: rgb leaking outside the
// occupancy, empty occupancy, or boxes that do not tightly fit the components.
std::optional<std::string> check_invariants(const AugmentedMask& mask);

struct PaletteOptions {
    // D-Fire labels smoke as 0 and fire as 1.
    int fire_class = 1;
    std::size_t max_pixels = 100000;
    std::uint64_t seed = 0;
};

// Reservoir-samples fire-box pixels from a directory of images with same-stem
// YOLO label files, visiting stems in lexicographic order.
FirePalette build_palette(const std::filesystem::path& annotation_root, const PaletteOptions& options);

void save_palette(const std::filesystem::path& path, const FirePalette& palette);
FirePalette load_palette(const std::filesystem::path& path);

// Rasterizes the union of the spec's shapes at pixel centres. Applies to any
// family: the binary stage is the first link of every chain.
AugmentedMask gen_binary_mask(const MaskSpec& spec);

struct ColorizeOptions {
    // Per-pixel multiplicative brightness jitter, uniform in [1 - j, 1 + j].
    double jitter = 0.1;
};

AugmentedMask colorize(const AugmentedMask& mask, const FirePalette& palette, std::uint64_t seed,
                       const ColorizeOptions& options = {});

// `sigma` is on the normalized [0, 1] channel scale.
AugmentedMask add_gaussian(const AugmentedMask& mask, double sigma, std::uint64_t seed);

AugmentedMask apply_perlin(const AugmentedMask& mask, const PerlinMaskOptions& options);

struct MaskConstraints {
    int min_regions = 1;
    int max_regions = 3;
    double min_size_frac = 0.05;
    double max_size_frac = 0.25;
    double min_area_px = 32.0 * 32.0;
    std::vector<ShapeKind> kinds{ShapeKind::Rectangle, ShapeKind::Circle, ShapeKind::Ellipse};

    void validate(int canvas_w, int canvas_h) const;
};

MaskSpec random_mask_spec(int canvas_w, int canvas_h, MaskFamily family, const MaskConstraints& constraints,
                          std::uint64_t seed);

// Runs the whole chain for the spec's family: binary, then colorize, then the
// Gaussian or Perlin stage. Stage seeds are derived from spec.rng_seed.
AugmentedMask build_mask(const MaskSpec& spec, const FirePalette& palette, const ColorizeOptions& colorize_options = {});

} // namespace flameforge::masks
