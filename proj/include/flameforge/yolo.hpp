#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "flameforge/image.hpp"

namespace flameforge {

// One YOLO annotation row: class id plus centre/size normalized to [0, 1].
struct YoloBox {
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const YoloBox&) const = default;
};

// Parses `class cx cy w h`. Throws ConfigError naming `source` and `line_no`
// on malformed rows or coordinates outside [0, 1].
YoloBox parse_yolo_row(std::string_view row, const std::string& source, int line_no);

// Rows of a label file; blank lines are skipped.
std::vector<YoloBox> read_yolo_file(const std::filesystem::path& path);

std::string format_yolo_row(const YoloBox& box);

// Normalized box to a half-open pixel rectangle, clamped to the canvas.
PixelBox yolo_to_pixels(const YoloBox& box, int width, int height);

YoloBox pixels_to_yolo(const PixelBox& box, int width, int height, int class_id);

} // namespace flameforge
