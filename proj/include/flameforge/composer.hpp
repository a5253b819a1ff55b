#pragma once

#include <filesystem>
#include <string>

#include "flameforge/image.hpp"
#include "flameforge/maskgen.hpp"

namespace flameforge::compose {

// A real photograph brought to the pipeline canvas.
struct StyleImage {
    Image rgb;
    std::string source_id;
};

// The fused init image handed to the diffusion backend.
struct CompositeImage {
    Image rgb;
    std::string mask_ref;
    std::string style_ref;
};

// Saturating element-wise addition of the mask onto the style image:
// out = clamp(style + round(alpha * mask.rgb)). Pixels outside the mask's
// occupancy are copied from the style image unchanged.
CompositeImage fuse(const StyleImage& style, const masks::AugmentedMask& mask, double alpha = 1.0,
                    std::string mask_ref = {});

// Centre-crop to the target aspect ratio, then bilinear resize.
StyleImage prepare_style(const Image& raw, int target_w, int target_h, std::string source_id);

StyleImage load_style(const std::filesystem::path& path, int target_w, int target_h);

// Stand-in init image for arms that run without a real photograph.
StyleImage neutral_canvas(int width, int height);

inline constexpr Rgb kNeutralGray{128, 128, 128};

} // namespace flameforge::compose
