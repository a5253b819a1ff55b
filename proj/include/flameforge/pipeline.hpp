#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flameforge/annotate.hpp"
#include "flameforge/backend.hpp"
#include "flameforge/config.hpp"
#include "flameforge/maskgen.hpp"
#include "flameforge/metrics.hpp"

namespace flameforge::pipeline {

// Seeds for item `index` of an arm. Items never share a seed within a run.
// style_seed is the seed of the style permutation the item draws from (0
// when the arm has no style images).
annotate::SeedChain item_seeds(std::uint64_t base_seed, std::uint64_t index, std::size_t n_styles = 0);

// Style image index for each of `count` items: every block of `n_styles`
// items is a fresh seeded permutation, so all styles are used evenly.
std::vector<std::size_t> style_schedule(std::size_t n_styles, std::size_t count, std::uint64_t base_seed);

// Seed of the permutation that item `index` draws its style from.
std::uint64_t style_epoch_seed(std::uint64_t base_seed, std::size_t n_styles, std::size_t index);

// Loads palette_file when set, otherwise samples palette_dir.
masks::FirePalette resolve_palette(const ExperimentConfig& config);

std::filesystem::path arm_root(const ExperimentConfig& config, const std::string& arm);

struct GenerateSummary {
    std::filesystem::path manifest;
    std::size_t requested = 0;
    std::size_t written = 0;
    std::size_t failed = 0;
};

// Generates arm.count items through `backend` with up to
// config.backend.max_in_flight requests outstanding, writing them under
// <output_root>/<arm>/ in index order. Items whose generate call fails are
// logged and skipped; GenerationFailed is thrown after the run when the
// failure rate exceeds config.failure_threshold.
GenerateSummary run_generate(const ExperimentConfig& config, const ArmConfig& arm, backend::Backend& backend);

// Inception statistics of every image in `real_dir`.
metrics::GaussianStats real_statistics(const std::filesystem::path& real_dir, backend::Backend& backend,
                                      std::size_t max_in_flight = 1);

// Scores one generated arm against precomputed real statistics and writes
// <output_root>/<arm>/metrics.json.
metrics::MetricsReport evaluate_arm(const ExperimentConfig& config, const std::string& arm,
                                    const metrics::GaussianStats& real, backend::Backend& backend);

// Evaluates `arms` (all configured arms when empty) and writes
// <output_root>/report.csv covering every arm with a metrics.json, in config order.
std::vector<metrics::MetricsReport> run_metrics(const ExperimentConfig& config, const std::filesystem::path& real_dir,
                                                std::span<const std::string> arms, backend::Backend& backend);

// Reads <output_root>/<arm>/metrics.json for the given arms (all configured
// arms when empty), in config order. Missing files raise MissingInputError.
std::vector<metrics::MetricsReport> collect_reports(const ExperimentConfig& config,
                                                    std::span<const std::string> arms = {});

std::filesystem::path report_path(const ExperimentConfig& config);

} // namespace flameforge::pipeline
