#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flameforge/image.hpp"
#include "flameforge/maskgen.hpp"
#include "flameforge/yolo.hpp"

namespace flameforge::annotate {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kManifestName = "manifest.jsonl";

// Every seed that went into one generated item.
struct SeedChain {
    std::uint64_t base_seed = 0;
    std::uint64_t item_index = 0;
    std::uint64_t item_seed = 0;
    std::uint64_t mask_seed = 0;
    std::uint64_t style_seed = 0;
    std::uint64_t gen_seed = 0;

    bool operator==(const SeedChain&) const = default;
};

// One manifest row. Paths are relative to the dataset root.
struct DatasetRecord {
    std::string image_path;
    std::string mask_path;
    std::string label_path;
    std::string composite_path;  // empty unless composites are kept
    std::vector<YoloBox> boxes;
    std::string family;  // mask family, or "none" for mask-free arms
    std::string arm;
    SeedChain seeds;
    std::string prompt;
    std::string style_source;

    bool operator==(const DatasetRecord&) const = default;
};

struct DatasetItem {
    DatasetRecord record;
    Image image;
    Bitmap mask;
    std::optional<Image> composite;
};

// One row per 8-connected component of the occupancy, normalized by the canvas.
std::vector<YoloBox> boxes_from_mask(const masks::AugmentedMask& mask, int class_id = 0);

// `box` grown by `pad` times its width/height on every side, clamped to the canvas.
PixelBox padded_box(const PixelBox& box, double pad, int width, int height);

std::vector<Image> crop_regions(const Image& image, const masks::AugmentedMask& mask, double pad = 0.1);

// Rebuilds the mask view needed for cropping from a stored occupancy map.
masks::AugmentedMask mask_from_occupancy(Bitmap occupancy);

std::string manifest_line(const DatasetRecord& record);
DatasetRecord parse_manifest_line(const std::string& line, const std::string& source = "manifest", int line_no = 0);

// Single-writer dataset sink. Truncates the manifest on construction and
// appends rows in add() order.
class DatasetWriter {
public:
    explicit DatasetWriter(std::filesystem::path root);

    // Writes the image, mask, label file (and composite, if present) at the
    // record's relative paths, then appends the manifest row.
    void add(const DatasetItem& item);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path manifest_path() const { return root_ / kManifestName; }
    std::size_t size() const noexcept { return count_; }

private:
    std::filesystem::path root_;
    std::size_t count_ = 0;
};

std::filesystem::path write_dataset(std::span<const DatasetItem> items, const std::filesystem::path& root);

std::vector<DatasetRecord> read_manifest(const std::filesystem::path& path);

} // namespace flameforge::annotate
