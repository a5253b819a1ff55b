#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "flameforge/error.hpp"
#include "flameforge/pipeline.hpp"

namespace flameforge::pipeline {
namespace fs = std::filesystem;

namespace {

constexpr const char* kMetricsName = "metrics.json";

Image read_input_image(const fs::path& path) {
    if (!fs::exists(path)) {
        throw MissingInputError("missing image " + path.string());
    }
    return read_image(path);
}

std::vector<std::string> selected_arms(const ExperimentConfig& config, std::span<const std::string> arms) {
    std::vector<std::string> out;
    for (const auto& a : config.arms) {
        if (arms.empty() || std::find(arms.begin(), arms.end(), a.name) != arms.end()) {
            out.push_back(a.name);
        }
    }
    for (const auto& name : arms) {
        config.arm(name);
    }
    return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// stops the remaining work and is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    std::mutex mutex;
    std::size_t next = 0;
    std::exception_ptr error;
    const auto work = [&] {
        for (;;) {
            std::size_t i = 0;
            {
                std::lock_guard lock(mutex);
                if (error || next >= n) {
                    return;
                }
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!error) {
                    error = std::current_exception();
                }
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < workers; ++t) {
        pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
}

} // namespace

fs::path report_path(const ExperimentConfig& config) {
    return config.output_root / "report.csv";
}

metrics::GaussianStats real_statistics(const fs::path& real_dir, backend::Backend& backend,
                                      std::size_t max_in_flight) {
    if (!fs::is_directory(real_dir)) {
        throw MissingInputError("real image directory not found: " + real_dir.string());
    }
    const auto paths = list_images(real_dir);
    if (paths.size() < 2) {
        throw MissingInputError("need at least 2 real images in " + real_dir.string());
    }
    std::vector<backend::EmbeddingVector> embeddings(paths.size());
    parallel_for(paths.size(), max_in_flight,
                 [&](std::size_t i) { embeddings[i] = backend.embed_inception(read_input_image(paths[i])); });
    return metrics::fit_gaussian(embeddings);
}

metrics::MetricsReport evaluate_arm(const ExperimentConfig& config, const std::string& arm,
                                    const metrics::GaussianStats& real, backend::Backend& backend) {
    const fs::path root = arm_root(config, arm);
    const auto records = annotate::read_manifest(root / annotate::kManifestName);
    if (records.size() < 2) {
        throw MissingInputError("arm " + arm + " has fewer than 2 generated images");
    }

    const auto fire = backend.embed_text(config.metrics.fire_prompt);
    const auto nonfire = backend.embed_text(config.metrics.nonfire_prompt);
    std::map<std::string, backend::EmbeddingVector> prompts;
    for (const auto& r : records) {
        if (!prompts.contains(r.prompt)) {
            prompts.emplace(r.prompt, backend.embed_text(r.prompt));
        }
    }

    std::vector<backend::EmbeddingVector> inception(records.size());
    std::vector<metrics::ImageScores> scores(records.size());
    const auto score = [&](std::size_t i) {
        const auto& r = records[i];
        const Image image = read_input_image(root / r.image_path);
        inception[i] = backend.embed_inception(image);
        scores[i].clip_score = metrics::clip_score(backend.embed_image(image), prompts.at(r.prompt));

        const fs::path mask_path = root / r.mask_path;
        if (!fs::exists(mask_path)) {
            throw MissingInputError("missing mask " + mask_path.string());
        }
        Bitmap occupancy = read_bitmap_png(mask_path);
        if (occupancy.count() == 0) {
            return;
        }
        const auto mask = annotate::mask_from_occupancy(std::move(occupancy));
        for (const auto& patch : annotate::crop_regions(image, mask, config.metrics.crop_pad)) {
            scores[i].region_confidences.push_back(
                metrics::clip_confidence(backend.embed_image(patch), fire, nonfire, config.metrics.temperature));
        }
    };
    parallel_for(records.size(), static_cast<std::size_t>(config.backend.max_in_flight), score);

    const auto stats = metrics::fit_gaussian(inception);
    const double fid = metrics::frechet_distance(real, stats);
    const double nfid = metrics::normalize_fid(fid, config.metrics.normalization, config.metrics.reference);
    auto report = metrics::aggregate(arm, scores, fid, nfid, config.metrics.normalization, real.n);
    write_text(root / kMetricsName, metrics::report_to_json(report));
    spdlog::info("arm {}: FID {:.4f}, nFID {:.4f}, CLIP Score {:.2f}", arm, fid, nfid, report.clip_score_mean);
    return report;
}

std::vector<metrics::MetricsReport> run_metrics(const ExperimentConfig& config, const fs::path& real_dir,
                                                std::span<const std::string> arms, backend::Backend& backend) {
    const auto names = selected_arms(config, arms);
    for (const auto& name : names) {
        const fs::path manifest = arm_root(config, name) / annotate::kManifestName;
        if (!fs::exists(manifest)) {
            throw MissingInputError("manifest not found for arm " + name + ": " + manifest.string());
        }
    }
    const auto real = real_statistics(real_dir, backend, static_cast<std::size_t>(config.backend.max_in_flight));
    std::vector<metrics::MetricsReport> reports;
    for (const auto& name : names) {
        reports.push_back(evaluate_arm(config, name, real, backend));
    }

    std::vector<metrics::MetricsReport> all;
    for (const auto& a : config.arms) {
        const fs::path path = arm_root(config, a.name) / kMetricsName;
        if (fs::exists(path)) {
            all.push_back(collect_reports(config, std::span(&a.name, 1)).front());
        }
    }
    write_text(report_path(config), metrics::reports_to_csv(all));
    return reports;
}

std::vector<metrics::MetricsReport> collect_reports(const ExperimentConfig& config, std::span<const std::string> arms) {
    std::vector<metrics::MetricsReport> out;
    for (const auto& name : selected_arms(config, arms)) {
        const fs::path path = arm_root(config, name) / kMetricsName;
        std::ifstream in(path);
        if (!in) {
            throw MissingInputError("metrics not found for arm " + name + ": " + path.string());
        }
        std::ostringstream text;
        text << in.rdbuf();
        try {
            out.push_back(metrics::report_from_json(text.str()));
        } catch (const std::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return out;
}

} // namespace flameforge::pipeline
