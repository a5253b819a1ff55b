#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flameforge/backend.hpp"
#include "flameforge/maskgen.hpp"
#include "flameforge/metrics.hpp"

namespace flameforge::pipeline {

inline constexpr std::string_view kDefaultPrompt =
    "wildfire with flame and smoke, drone view, photo realistic, high resolution, 4k, HD.";
inline constexpr double kDefaultStrength = 0.5;
inline constexpr double kDefaultGuidance = 5.0;
inline constexpr double kBaselineStrength = 0.99;
inline constexpr int kDefaultSteps = 30;

inline constexpr const char* kBackendUrlEnv = "FLAMEFORGE_BACKEND_URL";
inline constexpr const char* kOutputRootEnv = "FLAMEFORGE_OUTPUT_ROOT";

// One experiment configuration. An empty `family` is the mask-free baseline.
struct ArmConfig {
    std::string name;
    std::optional<masks::MaskFamily> family;
    double sigma = 0.0;
    masks::PerlinMaskOptions perlin;
    bool use_style_image = true;
    double strength = kDefaultStrength;
    double guidance = kDefaultGuidance;
    int steps = kDefaultSteps;
    std::string prompt{kDefaultPrompt};
    std::string negative_prompt;
    int count = 16;
    std::uint64_t base_seed = 0;
    double fuse_alpha = 1.0;
};

struct BackendConfig {
    std::string url{backend::kMockUrl};
    double timeout_s = 120.0;
    int max_in_flight = 4;
    int max_retries = 2;
    backend::EmbeddingDims dims;
};

struct MetricsConfig {
    metrics::Normalization normalization = metrics::Normalization::None;
    double reference = 1.0;
    std::string fire_prompt = "a photo of fire";
    std::string nonfire_prompt = "a photo of a landscape with no fire";
    double temperature = metrics::kDefaultTemperature;
    double crop_pad = 0.1;
};

struct ExperimentConfig {
    std::filesystem::path style_dir;
    std::filesystem::path palette_dir;
    std::filesystem::path palette_file;
    masks::PaletteOptions palette;
    std::filesystem::path output_root = "out";
    int canvas_w = 512;
    int canvas_h = 512;
    masks::MaskConstraints constraints;
    double failure_threshold = 0.05;
    bool save_composites = false;
    int yolo_class = 0;
    std::vector<ArmConfig> arms;
    BackendConfig backend;
    MetricsConfig metrics;

    const ArmConfig& arm(std::string_view name) const;

    // Throws ConfigError naming the first violated constraint.
    void validate() const;
};

// Relative paths in the file are resolved against the file's directory.
// Applies FLAMEFORGE_BACKEND_URL and FLAMEFORGE_OUTPUT_ROOT when set.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir = {});

void apply_env_overrides(ExperimentConfig& config);

} // namespace flameforge::pipeline
