#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "flameforge/error.hpp"
#include "flameforge/maskgen.hpp"
#include "flameforge/random.hpp"
#include "flameforge/yolo.hpp"

namespace flameforge::masks {
namespace fs = std::filesystem;

namespace {

// D-Fire ships images/ and labels/ side by side; flat directories holding both
// are accepted too.
std::pair<fs::path, fs::path> resolve_layout(const fs::path& root) {
    if (fs::is_directory(root / "images") && fs::is_directory(root / "labels")) {
        return {root / "images", root / "labels"};
    }
    return {root, root};
}

} // namespace

FirePalette build_palette(const fs::path& annotation_root, const PaletteOptions& options) {
    if (!fs::is_directory(annotation_root)) {
        throw ConfigError("palette source is not a directory: " + annotation_root.string());
    }
    if (options.max_pixels == 0) {
        throw ConfigError("palette max_pixels must be positive");
    }
    const auto [image_dir, label_dir] = resolve_layout(annotation_root);

    std::map<std::string, fs::path> images_by_stem;
    for (const auto& path : list_images(image_dir)) {
        images_by_stem.emplace(path.stem().string(), path);
    }

    FirePalette palette;
    Rng rng(options.seed);
    std::uint64_t seen = 0;
    for (const auto& [stem, image_path] : images_by_stem) {
        const fs::path label_path = label_dir / (stem + ".txt");
        if (!fs::is_regular_file(label_path)) {
            continue;
        }
        std::vector<YoloBox> fire;
        for (const auto& box : read_yolo_file(label_path)) {
            if (box.class_id == options.fire_class) {
                fire.push_back(box);
            }
        }
        if (fire.empty()) {
            continue;
        }
        const Image image = read_image(image_path);
        bool contributed = false;
        for (const auto& box : fire) {
            const PixelBox px = yolo_to_pixels(box, image.width, image.height);
            for (int y = px.y0; y < px.y1; ++y) {
                for (int x = px.x0; x < px.x1; ++x) {
                    ++seen;
                    contributed = true;
                    if (palette.colors.size() < options.max_pixels) {
                        palette.colors.push_back(image.rgb(x, y));
                    } else if (const auto j = rng.below(seen); j < options.max_pixels) {
                        palette.colors[j] = image.rgb(x, y);
                    }
                }
            }
        }
        palette.source_count += contributed ? 1 : 0;
    }
    if (palette.colors.empty()) {
        throw ConfigError("no fire boxes (class " + std::to_string(options.fire_class) + ") found under " +
                          annotation_root.string());
    }
    return palette;
}

void save_palette(const fs::path& path, const FirePalette& palette) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["source_count"] = palette.source_count;
    auto& colors = doc["colors"] = nlohmann::ordered_json::array();
    for (const auto& c : palette.colors) {
        colors.push_back({c[0], c[1], c[2]});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write palette " + path.string());
    }
    out << doc.dump() << '\n';
}

FirePalette load_palette(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open palette " + path.string());
    }
    FirePalette palette;
    try {
        const auto doc = nlohmann::json::parse(in);
        palette.source_count = doc.at("source_count").get<int>();
        for (const auto& c : doc.at("colors")) {
            const auto channels = c.get<std::vector<int>>();
            if (channels.size() != 3 || std::any_of(channels.begin(), channels.end(), [](int v) { return v < 0 || v > 255; })) {
                throw ConfigError("palette " + path.string() + ": colors must be RGB triples in [0, 255]");
            }
            palette.colors.push_back({static_cast<std::uint8_t>(channels[0]), static_cast<std::uint8_t>(channels[1]),
                                      static_cast<std::uint8_t>(channels[2])});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("palette " + path.string() + ": " + e.what());
    }
    if (palette.colors.empty()) {
        throw ConfigError("palette " + path.string() + " has no colors");
    }
    return palette;
}

} // namespace flameforge::masks
