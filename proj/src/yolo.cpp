#include "flameforge/yolo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "flameforge/error.hpp"

namespace flameforge {

YoloBox parse_yolo_row(std::string_view row, const std::string& source, int line_no) {
    const auto fail = [&](const std::string& why) {
        return ConfigError(source + ":" + std::to_string(line_no) + ": " + why + " in YOLO row '" +
                           std::string(row) + "'");
    };
    std::istringstream in{std::string(row)};
    YoloBox box;
    double class_value = 0.0;
    if (!(in >> class_value >> box.cx >> box.cy >> box.w >> box.h)) {
        throw fail("expected 5 numeric fields");
    }
    std::string extra;
    if (in >> extra) {
        throw fail("trailing field '" + extra + "'");
    }
    if (class_value < 0 || class_value != std::floor(class_value)) {
        throw fail("class id must be a non-negative integer");
    }
    box.class_id = static_cast<int>(class_value);
    for (double v : {box.cx, box.cy, box.w, box.h}) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw fail("coordinate outside [0, 1]");
        }
    }
    return box;
}

std::vector<YoloBox> read_yolo_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open label file " + path.string());
    }
    std::vector<YoloBox> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        out.push_back(parse_yolo_row(line, path.string(), line_no));
    }
    return out;
}

std::string format_yolo_row(const YoloBox& box) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", box.class_id, box.cx, box.cy, box.w, box.h);
    return buf;
}

PixelBox yolo_to_pixels(const YoloBox& box, int width, int height) {
    const auto edge = [](double v, int extent) {
        return std::clamp(static_cast<int>(std::lround(v * extent)), 0, extent);
    };
    return {edge(box.cx - box.w / 2.0, width), edge(box.cy - box.h / 2.0, height), edge(box.cx + box.w / 2.0, width),
            edge(box.cy + box.h / 2.0, height)};
}

YoloBox pixels_to_yolo(const PixelBox& box, int width, int height, int class_id) {
    return {class_id, (box.x0 + box.x1) / 2.0 / width, (box.y0 + box.y1) / 2.0 / height,
            static_cast<double>(box.width()) / width, static_cast<double>(box.height()) / height};
}

} // namespace flameforge
