#include "flameforge/annotate.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "flameforge/error.hpp"

namespace flameforge::annotate {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path checked_relative(const std::string& rel, const char* what) {
    const fs::path p(rel);
    if (rel.empty() || p.is_absolute()) {
        throw std::invalid_argument(std::string("dataset ") + what + " must be a non-empty relative path: '" + rel + "'");
    }
    for (const auto& part : p) {
        if (part == "..") {
            throw std::invalid_argument(std::string("dataset ") + what + " escapes the dataset root: '" + rel + "'");
        }
    }
    return p;
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
}

} // namespace

std::vector<YoloBox> boxes_from_mask(const masks::AugmentedMask& mask, int class_id) {
    const auto components = label_components(mask.occupancy);
    if (components.boxes.empty()) {
        throw std::invalid_argument("boxes_from_mask: mask occupancy is empty");
    }
    std::vector<YoloBox> out;
    out.reserve(components.boxes.size());
    for (const auto& box : components.boxes) {
        out.push_back(pixels_to_yolo(box, mask.width(), mask.height(), class_id));
    }
    return out;
}

PixelBox padded_box(const PixelBox& box, double pad, int width, int height) {
    if (!(pad >= 0.0)) {
        throw std::invalid_argument("crop padding must be >= 0");
    }
    const int px = static_cast<int>(std::lround(pad * box.width()));
    const int py = static_cast<int>(std::lround(pad * box.height()));
    return {std::max(0, box.x0 - px), std::max(0, box.y0 - py), std::min(width, box.x1 + px),
            std::min(height, box.y1 + py)};
}

std::vector<Image> crop_regions(const Image& image, const masks::AugmentedMask& mask, double pad) {
    if (image.width != mask.width() || image.height != mask.height()) {
        throw std::invalid_argument("crop_regions: image and mask dimensions differ");
    }
    std::vector<Image> patches;
    patches.reserve(mask.regions.size());
    for (const auto& region : mask.regions) {
        patches.push_back(crop(image, padded_box(region, pad, image.width, image.height)));
    }
    return patches;
}

masks::AugmentedMask mask_from_occupancy(Bitmap occupancy) {
    Image rgb(occupancy.width, occupancy.height);
    for (std::size_t i = 0; i < occupancy.bits.size(); ++i) {
        if (occupancy.bits[i]) {
            rgb.data[i * 3] = rgb.data[i * 3 + 1] = rgb.data[i * 3 + 2] = 255;
        }
    }
    return masks::make_mask(std::move(rgb), std::move(occupancy), masks::MaskFamily::Binary);
}

std::string manifest_line(const DatasetRecord& r) {
    json row;
    row["schema_version"] = kManifestSchemaVersion;
    row["arm"] = r.arm;
    row["family"] = r.family;
    row["image_path"] = r.image_path;
    row["mask_path"] = r.mask_path;
    row["label_path"] = r.label_path;
    row["composite_path"] = r.composite_path;
    auto& boxes = row["boxes"] = json::array();
    for (const auto& b : r.boxes) {
        json box;
        box["class"] = b.class_id;
        box["cx"] = b.cx;
        box["cy"] = b.cy;
        box["w"] = b.w;
        box["h"] = b.h;
        boxes.push_back(std::move(box));
    }
    auto& seeds = row["seeds"];
    seeds["base_seed"] = r.seeds.base_seed;
    seeds["item_index"] = r.seeds.item_index;
    seeds["item_seed"] = r.seeds.item_seed;
    seeds["mask_seed"] = r.seeds.mask_seed;
    seeds["style_seed"] = r.seeds.style_seed;
    seeds["gen_seed"] = r.seeds.gen_seed;
    row["prompt"] = r.prompt;
    row["style_source"] = r.style_source;
    return row.dump();
}

DatasetRecord parse_manifest_line(const std::string& line, const std::string& source, int line_no) {
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    try {
        const auto row = json::parse(line);
        const int version = row.at("schema_version").get<int>();
        if (version != kManifestSchemaVersion) {
            throw ConfigError(where + "unsupported manifest schema_version " + std::to_string(version));
        }
        DatasetRecord r;
        r.arm = row.at("arm").get<std::string>();
        r.family = row.at("family").get<std::string>();
        r.image_path = row.at("image_path").get<std::string>();
        r.mask_path = row.at("mask_path").get<std::string>();
        r.label_path = row.at("label_path").get<std::string>();
        r.composite_path = row.at("composite_path").get<std::string>();
        for (const auto& b : row.at("boxes")) {
            r.boxes.push_back({b.at("class").get<int>(), b.at("cx").get<double>(), b.at("cy").get<double>(),
                               b.at("w").get<double>(), b.at("h").get<double>()});
        }
        const auto& s = row.at("seeds");
        r.seeds.base_seed = s.at("base_seed").get<std::uint64_t>();
        r.seeds.item_index = s.at("item_index").get<std::uint64_t>();
        r.seeds.item_seed = s.at("item_seed").get<std::uint64_t>();
        r.seeds.mask_seed = s.at("mask_seed").get<std::uint64_t>();
        r.seeds.style_seed = s.at("style_seed").get<std::uint64_t>();
        r.seeds.gen_seed = s.at("gen_seed").get<std::uint64_t>();
        r.prompt = row.at("prompt").get<std::string>();
        r.style_source = row.at("style_source").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(where + "malformed manifest row: " + e.what());
    }
}

DatasetWriter::DatasetWriter(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    std::ofstream out(manifest_path(), std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot create " + manifest_path().string());
    }
}

void DatasetWriter::add(const DatasetItem& item) {
    const auto& r = item.record;
    const auto components = label_components(item.mask).boxes.size();
    if (components != r.boxes.size()) {
        throw std::invalid_argument("dataset record " + r.image_path + " has " + std::to_string(r.boxes.size()) +
                                    " boxes but its mask has " + std::to_string(components) + " components");
    }
    if (item.mask.width != item.image.width || item.mask.height != item.image.height) {
        throw std::invalid_argument("dataset record " + r.image_path + ": image and mask dimensions differ");
    }
    for (const auto& b : r.boxes) {
        for (double v : {b.cx, b.cy, b.w, b.h}) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("dataset record " + r.image_path + " has a box outside [0, 1]");
            }
        }
    }

    const fs::path image_path = root_ / checked_relative(r.image_path, "image path");
    const fs::path mask_path = root_ / checked_relative(r.mask_path, "mask path");
    const fs::path label_path = root_ / checked_relative(r.label_path, "label path");
    for (const auto& p : {image_path, mask_path, label_path}) {
        ensure_parent(p);
    }
    write_png(image_path, item.image);
    write_bitmap_png(mask_path, item.mask);
    {
        std::ofstream labels(label_path, std::ios::trunc);
        for (const auto& b : r.boxes) {
            labels << format_yolo_row(b) << '\n';
        }
        if (!labels) {
            throw ConfigError("cannot write " + label_path.string());
        }
    }
    if (item.composite) {
        const fs::path composite_path = root_ / checked_relative(r.composite_path, "composite path");
        ensure_parent(composite_path);
        write_png(composite_path, *item.composite);
    }

    std::ofstream manifest(manifest_path(), std::ios::app);
    manifest << manifest_line(r) << '\n';
    if (!manifest) {
        throw ConfigError("cannot append to " + manifest_path().string());
    }
    ++count_;
}

fs::path write_dataset(std::span<const DatasetItem> items, const fs::path& root) {
    DatasetWriter writer(root);
    for (const auto& item : items) {
        writer.add(item);
    }
    return writer.manifest_path();
}

std::vector<DatasetRecord> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingInputError("manifest not found: " + path.string());
    }
    std::vector<DatasetRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        out.push_back(parse_manifest_line(line, path.string(), line_no));
    }
    return out;
}

} // namespace flameforge::annotate
