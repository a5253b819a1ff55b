#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flameforge {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved 8-bit RGB raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, Rgb fill = {0, 0, 0});

    bool empty() const noexcept { return width == 0 || height == 0; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    std::uint8_t* pixel(int x, int y) noexcept {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    const std::uint8_t* pixel(int x, int y) const noexcept {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    Rgb rgb(int x, int y) const noexcept {
        const auto* p = pixel(x, y);
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) noexcept {
        auto* p = pixel(x, y);
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
    }

    bool operator==(const Image&) const = default;
};

// One byte per pixel, 0 or 1.
struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Bitmap() = default;
    Bitmap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const noexcept { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool on) noexcept { bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }
    std::size_t count() const noexcept;

    bool operator==(const Bitmap&) const = default;
};

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

    bool operator==(const PixelBox&) const = default;
};

// 8-connected component labelling. Labels are 1-based in raster-scan order of
// each component's first pixel; 0 marks background.
struct Components {
    std::vector<std::int32_t> labels;
    std::vector<PixelBox> boxes;
    std::vector<std::size_t> areas;
};

Components label_components(const Bitmap& occupancy);

// Sub-image copy; `box` must lie inside `image`.
Image crop(const Image& image, const PixelBox& box);

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

bool is_image_file(const std::filesystem::path& path);

// Image files directly under `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

Image decode_image(std::span<const std::uint8_t> encoded);
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

// Occupancy maps are stored as 8-bit grayscale PNG, 255 for active pixels.
void write_bitmap_png(const std::filesystem::path& path, const Bitmap& bitmap);
Bitmap read_bitmap_png(const std::filesystem::path& path);

// Bilinear resample to the given size.
Image resize_bilinear(const Image& image, int width, int height);

} // namespace flameforge
