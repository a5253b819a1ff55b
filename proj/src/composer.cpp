#include "flameforge/composer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flameforge::compose {

CompositeImage fuse(const StyleImage& style, const masks::AugmentedMask& mask, double alpha, std::string mask_ref) {
    if (style.rgb.width != mask.width() || style.rgb.height != mask.height()) {
        throw std::invalid_argument("fuse: style is " + std::to_string(style.rgb.width) + "x" +
                                    std::to_string(style.rgb.height) + " but mask is " + std::to_string(mask.width()) +
                                    "x" + std::to_string(mask.height()));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("fuse: alpha must be in [0, 1]");
    }
    CompositeImage out{style.rgb, std::move(mask_ref), style.source_id};
    auto& data = out.rgb.data;
    for (std::size_t i = 0; i < mask.occupancy.bits.size(); ++i) {
        if (!mask.occupancy.bits[i]) {
            continue;
        }
        for (std::size_t c = i * 3; c < i * 3 + 3; ++c) {
            const double v = data[c] + alpha * mask.rgb.data[c];
            data[c] = static_cast<std::uint8_t>(std::min(std::lround(v), 255L));
        }
    }
    return out;
}

StyleImage prepare_style(const Image& raw, int target_w, int target_h, std::string source_id) {
    if (target_w < 1 || target_h < 1) {
        throw std::invalid_argument("prepare_style: target dimensions must be positive");
    }
    if (raw.empty()) {
        throw std::invalid_argument("prepare_style: source image is empty");
    }
    // Largest centred window with the target aspect ratio.
    PixelBox window{0, 0, raw.width, raw.height};
    const auto lhs = static_cast<long long>(raw.width) * target_h;
    const auto rhs = static_cast<long long>(raw.height) * target_w;
    if (lhs > rhs) {
        const int w = std::max(1, static_cast<int>(rhs / target_h));
        window.x0 = (raw.width - w) / 2;
        window.x1 = window.x0 + w;
    } else if (lhs < rhs) {
        const int h = std::max(1, static_cast<int>(lhs / target_w));
        window.y0 = (raw.height - h) / 2;
        window.y1 = window.y0 + h;
    }
    const Image cropped = window == PixelBox{0, 0, raw.width, raw.height} ? raw : crop(raw, window);
    return {resize_bilinear(cropped, target_w, target_h), std::move(source_id)};
}

StyleImage load_style(const std::filesystem::path& path, int target_w, int target_h) {
    return prepare_style(read_image(path), target_w, target_h, path.filename().string());
}

StyleImage neutral_canvas(int width, int height) {
    return {Image(width, height, kNeutralGray), "neutral-gray"};
}

} // namespace flameforge::compose
