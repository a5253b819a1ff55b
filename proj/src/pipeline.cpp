#include "flameforge/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>

#include "flameforge/composer.hpp"
#include "flameforge/error.hpp"
#include "flameforge/random.hpp"

namespace flameforge::pipeline {
namespace fs = std::filesystem;

namespace {

std::string item_name(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return buf;
}

struct ItemOutcome {
    std::optional<annotate::DatasetItem> item;
    std::string error;
};

struct ArmInputs {
    std::vector<fs::path> styles;
    std::vector<std::size_t> schedule;
    masks::FirePalette palette;
};

annotate::DatasetItem make_item(const ExperimentConfig& config, const ArmConfig& arm, const ArmInputs& inputs,
                                std::size_t index, backend::Backend& backend) {
    const int w = config.canvas_w;
    const int h = config.canvas_h;
    const std::string name = item_name(index);

    annotate::DatasetRecord record;
    record.arm = arm.name;
    record.prompt = arm.prompt;
    record.seeds = item_seeds(arm.base_seed, index, inputs.styles.size());
    record.image_path = "images/" + name + ".png";
    record.mask_path = "masks/" + name + ".png";
    record.label_path = "labels/" + name + ".txt";

    compose::StyleImage style;
    if (arm.use_style_image) {
        const auto& path = inputs.styles[inputs.schedule[index]];
        try {
            style = compose::load_style(path, w, h);
        } catch (const ImageIoError& e) {
            throw ConfigError(std::string("style image: ") + e.what());
        }
        record.style_source = path.filename().string();
    } else {
        style = compose::neutral_canvas(w, h);
        record.style_source = "neutral";
    }

    annotate::DatasetItem item;
    item.mask = Bitmap(w, h);
    Image init;
    if (arm.family) {
        auto spec = masks::random_mask_spec(w, h, *arm.family, config.constraints, record.seeds.mask_seed);
        spec.sigma = arm.sigma;
        spec.perlin = arm.perlin;
        const auto mask = masks::build_mask(spec, inputs.palette);
        auto composite = compose::fuse(style, mask, arm.fuse_alpha, record.mask_path);
        record.family = std::string(masks::to_string(*arm.family));
        record.boxes = annotate::boxes_from_mask(mask, config.yolo_class);
        item.mask = mask.occupancy;
        init = std::move(composite.rgb);
        if (config.save_composites) {
            record.composite_path = "composites/" + name + ".png";
            item.composite = init;
        }
    } else {
        record.family = "none";
        init = std::move(style.rgb);
    }

    backend::GenRequest request;
    request.init_image = std::move(init);
    request.prompt = arm.prompt;
    request.negative_prompt = arm.negative_prompt;
    request.denoise_strength = arm.strength;
    request.guidance_scale = arm.guidance;
    request.steps = arm.steps;
    request.seed = record.seeds.gen_seed;
    item.image = backend.generate(request).image;
    item.record = std::move(record);
    return item;
}

} // namespace

std::uint64_t style_epoch_seed(std::uint64_t base_seed, std::size_t n_styles, std::size_t index) {
    if (n_styles == 0) {
        return 0;
    }
    return stream_seed(derive_seed(base_seed, index / n_styles), SeedStream::Style);
}

annotate::SeedChain item_seeds(std::uint64_t base_seed, std::uint64_t index, std::size_t n_styles) {
    annotate::SeedChain s;
    s.base_seed = base_seed;
    s.item_index = index;
    s.item_seed = derive_seed(base_seed, index);
    s.mask_seed = stream_seed(s.item_seed, SeedStream::Mask);
    s.style_seed = style_epoch_seed(base_seed, n_styles, index);
    s.gen_seed = stream_seed(s.item_seed, SeedStream::Generate);
    return s;
}

std::vector<std::size_t> style_schedule(std::size_t n_styles, std::size_t count, std::uint64_t base_seed) {
    std::vector<std::size_t> out;
    if (n_styles == 0) {
        return out;
    }
    out.reserve(count);
    std::vector<std::size_t> perm(n_styles);
    for (std::size_t start = 0; start < count; start += n_styles) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(style_epoch_seed(base_seed, n_styles, start));
        for (std::size_t i = n_styles - 1; i > 0; --i) {
            std::swap(perm[i], perm[rng.below(i + 1)]);
        }
        for (std::size_t i = 0; i < n_styles && start + i < count; ++i) {
            out.push_back(perm[i]);
        }
    }
    return out;
}

masks::FirePalette resolve_palette(const ExperimentConfig& config) {
    if (!config.palette_file.empty()) {
        if (!fs::exists(config.palette_file)) {
            throw ConfigError("palette file not found: " + config.palette_file.string());
        }
        return masks::load_palette(config.palette_file);
    }
    if (config.palette_dir.empty()) {
        throw ConfigError("no fire palette configured: set palette_dir or palette_file");
    }
    if (!fs::is_directory(config.palette_dir)) {
        throw ConfigError("palette_dir is not a directory: " + config.palette_dir.string());
    }
    return masks::build_palette(config.palette_dir, config.palette);
}

fs::path arm_root(const ExperimentConfig& config, const std::string& arm) {
    return config.output_root / arm;
}

GenerateSummary run_generate(const ExperimentConfig& config, const ArmConfig& arm, backend::Backend& backend) {
    config.validate();
    const std::size_t count = static_cast<std::size_t>(arm.count);

    ArmInputs inputs;
    if (arm.use_style_image) {
        if (!fs::is_directory(config.style_dir)) {
            throw ConfigError("style_dir is not a directory: " + config.style_dir.string());
        }
        inputs.styles = list_images(config.style_dir);
        if (inputs.styles.empty()) {
            throw ConfigError("no images in style_dir " + config.style_dir.string());
        }
        inputs.schedule = style_schedule(inputs.styles.size(), count, arm.base_seed);
    }
    if (arm.family && *arm.family != masks::MaskFamily::Binary) {
        inputs.palette = resolve_palette(config);
    }

    const fs::path root = arm_root(config, arm.name);
    for (const char* sub : {"images", "masks", "labels", "composites"}) {
        fs::remove_all(root / sub);
    }
    annotate::DatasetWriter writer(root);

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.backend.max_in_flight), count);
    const std::size_t window = 2 * workers;

    std::mutex mutex;
    std::condition_variable cv;
    std::size_t next_index = 0;
    std::size_t next_write = 0;
    std::map<std::size_t, ItemOutcome> ready;
    std::exception_ptr fatal;
    bool stop = false;

    const auto abort_run = [&](std::exception_ptr e) {
        std::lock_guard lock(mutex);
        if (!fatal) {
            fatal = e;
        }
        stop = true;
        cv.notify_all();
    };

    const auto work = [&] {
        for (;;) {
            std::size_t index = 0;
            {
                std::unique_lock lock(mutex);
                cv.wait(lock, [&] { return stop || next_index >= count || next_index < next_write + window; });
                if (stop || next_index >= count) {
                    return;
                }
                index = next_index++;
            }
            ItemOutcome outcome;
            try {
                outcome.item = make_item(config, arm, inputs, index, backend);
            } catch (const BackendError& e) {
                outcome.error = e.what();
            } catch (...) {
                abort_run(std::current_exception());
                return;
            }
            {
                std::lock_guard lock(mutex);
                ready.emplace(index, std::move(outcome));
            }
            cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
        pool.emplace_back(work);
    }

    GenerateSummary summary;
    summary.requested = count;
    summary.manifest = writer.manifest_path();
    while (true) {
        ItemOutcome outcome;
        {
            std::unique_lock lock(mutex);
            cv.wait(lock, [&] { return stop || next_write >= count || ready.count(next_write) > 0; });
            if (stop || next_write >= count) {
                break;
            }
            auto node = ready.extract(next_write);
            outcome = std::move(node.mapped());
        }
        if (outcome.item) {
            try {
                writer.add(*outcome.item);
                ++summary.written;
            } catch (...) {
                abort_run(std::current_exception());
                break;
            }
        } else {
            spdlog::warn("arm {}: item {} failed: {}", arm.name, next_write, outcome.error);
            ++summary.failed;
        }
        {
            std::lock_guard lock(mutex);
            ++next_write;
        }
        cv.notify_all();
    }
    for (auto& t : pool) {
        t.join();
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }

    const double rate = static_cast<double>(summary.failed) / static_cast<double>(count);
    if (rate > config.failure_threshold) {
        throw GenerationFailed("arm " + arm.name + ": " + std::to_string(summary.failed) + " of " +
                               std::to_string(count) + " generations failed, above the allowed rate " +
                               std::to_string(config.failure_threshold));
    }
    return summary;
}

} // namespace flameforge::pipeline
