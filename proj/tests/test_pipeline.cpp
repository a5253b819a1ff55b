#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "flameforge/composer.hpp"
#include "flameforge/error.hpp"
#include "flameforge/mock_server.hpp"
#include "flameforge/pipeline.hpp"
#include "flameforge/random.hpp"
#include "support.hpp"

using namespace flameforge;
using namespace flameforge::pipeline;
namespace fs = std::filesystem;

namespace {

// Fails generate() for the listed item seeds, otherwise defers to a mock.
class FlakyBackend final : public backend::Backend {
public:
    explicit FlakyBackend(std::set<std::uint64_t> failing) : failing_(std::move(failing)) {}

    backend::GenResult generate(const backend::GenRequest& r) override {
        if (failing_.contains(r.seed)) {
            throw BackendError("injected failure", true);
        }
        return mock_.generate(r);
    }
    backend::EmbeddingVector embed_image(const Image& i) override { return mock_.embed_image(i); }
    backend::EmbeddingVector embed_text(std::string_view t) override { return mock_.embed_text(t); }
    backend::EmbeddingVector embed_inception(const Image& i) override { return mock_.embed_inception(i); }
    std::string id() const override { return "flaky"; }

private:
    std::set<std::uint64_t> failing_;
    backend::MockBackend mock_{0, {64, 16}};
};

ExperimentConfig load_fixture(const fixture::TempDir& dir, int count, int canvas = 96) {
    return load_config(fixture::write_fixture_tree(dir.path(), count, canvas));
}

const char* kMinimal = R"(
style_dir = "styles"
palette_file = "palette.json"

[[arms]]
name = "perlin"
family = "perlin"
)";

} // namespace

TEST(Config, DefaultsAndGenerationSettings) {
    const auto c = parse_config(kMinimal, "/base");
    ASSERT_EQ(c.arms.size(), 1u);
    const auto& a = c.arms[0];
    EXPECT_EQ(a.prompt, "wildfire with flame and smoke, drone view, photo realistic, high resolution, 4k, HD.");
    EXPECT_EQ(a.strength, 0.5);
    EXPECT_EQ(a.guidance, 5.0);
    EXPECT_EQ(a.family, masks::MaskFamily::Perlin);
    EXPECT_TRUE(a.use_style_image);
    EXPECT_EQ(c.style_dir, fs::path("/base/styles"));
    EXPECT_EQ(c.palette_file, fs::path("/base/palette.json"));
    EXPECT_EQ(c.output_root, fs::path("/base/out"));
    EXPECT_EQ(c.backend.url, "mock");
    EXPECT_EQ(c.backend.max_in_flight, 4);
    EXPECT_EQ(c.failure_threshold, 0.05);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, BaselineArmDefaultsToMaximumStrength) {
    const auto c = parse_config(R"(
style_dir = "s"
[[arms]]
name = "baseline"
family = "none"
)");
    EXPECT_FALSE(c.arms[0].family);
    EXPECT_EQ(c.arms[0].strength, 0.99);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, FullArmTable) {
    const auto c = parse_config(R"(
style_dir = "s"
palette_dir = "d"
canvas = { width = 320, height = 240 }
failure_threshold = 0.1
save_composites = true
yolo_class = 2

[masks]
min_regions = 2
max_regions = 2
kinds = ["circle"]

[backend]
url = "http://gpu:8000"
max_in_flight = 8
clip_dim = 768

[metrics]
normalization = "divide_by_reference"
reference = 40.5
temperature = 50

[[arms]]
name = "noise-0.1"
family = "noise"
sigma = 0.1
use_style_image = false
strength = 0.6
guidance = 7.5
steps = 20
negative_prompt = "text"
count = 100
base_seed = 9
alpha = 0.5

[[arms]]
name = "perlin"
family = "perlin"
[arms.perlin]
octaves = 6
warp_fraction = 0.5
)");
    EXPECT_EQ(c.canvas_w, 320);
    EXPECT_EQ(c.canvas_h, 240);
    EXPECT_TRUE(c.save_composites);
    EXPECT_EQ(c.yolo_class, 2);
    EXPECT_EQ(c.constraints.min_regions, 2);
    EXPECT_EQ(c.constraints.kinds, std::vector<masks::ShapeKind>{masks::ShapeKind::Circle});
    EXPECT_EQ(c.backend.url, "http://gpu:8000");
    EXPECT_EQ(c.backend.max_in_flight, 8);
    EXPECT_EQ(c.backend.dims.clip, 768);
    EXPECT_EQ(c.metrics.normalization, metrics::Normalization::DivideByReference);
    EXPECT_EQ(c.metrics.reference, 40.5);
    EXPECT_EQ(c.metrics.temperature, 50.0);
    const auto& n = c.arm("noise-0.1");
    EXPECT_EQ(n.sigma, 0.1);
    EXPECT_FALSE(n.use_style_image);
    EXPECT_EQ(n.steps, 20);
    EXPECT_EQ(n.count, 100);
    EXPECT_EQ(n.base_seed, 9u);
    EXPECT_EQ(n.fuse_alpha, 0.5);
    EXPECT_EQ(c.arm("perlin").perlin.octaves, 6);
    EXPECT_EQ(c.arm("perlin").perlin.warp_fraction, 0.5);
    EXPECT_NO_THROW(c.validate());
    EXPECT_THROW(c.arm("missing"), ConfigError);
}

TEST(Config, InvalidConfigurationsRejected) {
    const auto invalid = [](const std::string& text) {
        try {
            parse_config(text).validate();
        } catch (const ConfigError&) {
            return true;
        }
        return false;
    };
    const std::string head = "style_dir = \"s\"\npalette_dir = \"d\"\n";
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\n[[arms]]\nname = \"a\"\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\ncount = 0\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\nstrength = 0.0\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\nstrength = 1.2\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\nfamily = \"sparkly\"\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a/b\"\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\nsigma = 0.1\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\ncolour = 1\n"));
    EXPECT_TRUE(invalid(head + "bogus = 1\n[[arms]]\nname = \"a\"\n"));
    EXPECT_TRUE(invalid(head + "[[arms]]\nname = \"a\"\ncount = \"three\"\n"));
    EXPECT_TRUE(invalid(head));
    EXPECT_TRUE(invalid("[[arms]]\nname = \"a\"\n"));
    EXPECT_TRUE(invalid("style_dir = [unclosed\n"));
    EXPECT_TRUE(invalid(head + "[backend]\nmax_in_flight = 0\n[[arms]]\nname = \"a\"\n"));
    EXPECT_FALSE(invalid(head + "[[arms]]\nname = \"a\"\n"));
}

TEST(Config, EnvironmentOverrides) {
    fixture::TempDir dir;
    std::ofstream(dir / "c.toml") << kMinimal;
    ::setenv(kBackendUrlEnv, "http://override:1", 1);
    ::setenv(kOutputRootEnv, "/tmp/elsewhere", 1);
    const auto c = load_config(dir / "c.toml");
    ::unsetenv(kBackendUrlEnv);
    ::unsetenv(kOutputRootEnv);
    EXPECT_EQ(c.backend.url, "http://override:1");
    EXPECT_EQ(c.output_root, fs::path("/tmp/elsewhere"));
    EXPECT_EQ(c.style_dir, dir.path() / "styles");
}

TEST(Config, MissingFileIsConfigError) {
    EXPECT_THROW(load_config("/nonexistent/c.toml"), ConfigError);
}

TEST(Seeds, DistinctAcrossItems) {
    std::set<std::uint64_t> item, mask, gen;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        const auto s = item_seeds(42, i);
        item.insert(s.item_seed);
        mask.insert(s.mask_seed);
        gen.insert(s.gen_seed);
    }
    EXPECT_EQ(item.size(), 100000u);
    EXPECT_EQ(mask.size(), 100000u);
    EXPECT_EQ(gen.size(), 100000u);
}

TEST(Seeds, ChainRecordsItsInputs) {
    const auto s = item_seeds(7, 3, 4);
    EXPECT_EQ(s.base_seed, 7u);
    EXPECT_EQ(s.item_index, 3u);
    EXPECT_EQ(s.item_seed, derive_seed(7, 3));
    EXPECT_EQ(s.style_seed, style_epoch_seed(7, 4, 3));
    EXPECT_EQ(s.style_seed, style_epoch_seed(7, 4, 0));
    EXPECT_NE(s.style_seed, style_epoch_seed(7, 4, 4));
}

TEST(StyleSchedule, EachEpochIsAPermutation) {
    const auto order = style_schedule(5, 23, 99);
    ASSERT_EQ(order.size(), 23u);
    for (std::size_t start = 0; start + 5 <= order.size(); start += 5) {
        std::set<std::size_t> epoch(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(start + 5));
        EXPECT_EQ(epoch.size(), 5u);
    }
    EXPECT_EQ(order, style_schedule(5, 23, 99));
    EXPECT_NE(order, style_schedule(5, 23, 100));
    EXPECT_TRUE(style_schedule(0, 10, 1).empty());
}

TEST(Generate, WritesManifestAndFiles) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 5);
    backend::MockBackend mock(0, config.backend.dims);
    const auto summary = run_generate(config, config.arm("perlin"), mock);
    EXPECT_EQ(summary.manifest, dir.path() / "out" / "perlin" / "manifest.jsonl");
    EXPECT_EQ(summary.written, 5u);
    const auto rows = annotate::read_manifest(summary.manifest);
    ASSERT_EQ(rows.size(), 5u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].seeds.item_index, i);
        EXPECT_EQ(rows[i].family, "perlin");
        EXPECT_FALSE(rows[i].boxes.empty());
        const auto img = read_image(dir.path() / "out" / "perlin" / rows[i].image_path);
        EXPECT_EQ(img.width, 96);
        const auto labels = read_yolo_file(dir.path() / "out" / "perlin" / rows[i].label_path);
        ASSERT_EQ(labels.size(), rows[i].boxes.size());
        for (std::size_t k = 0; k < labels.size(); ++k) {
            const auto& want = rows[i].boxes[k];
            EXPECT_EQ(labels[k].class_id, want.class_id);
            EXPECT_NEAR(labels[k].cx, want.cx, 1e-6);
            EXPECT_NEAR(labels[k].cy, want.cy, 1e-6);
            EXPECT_NEAR(labels[k].w, want.w, 1e-6);
            EXPECT_NEAR(labels[k].h, want.h, 1e-6);
        }
    }
}

TEST(Generate, DeterministicAcrossRuns) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 8);
    backend::MockBackend mock(0, config.backend.dims);
    run_generate(config, config.arm("colored"), mock);
    const auto first = fixture::snapshot_tree(dir / "out");
    fs::remove_all(dir / "out");
    auto serial = config;
    serial.backend.max_in_flight = 1;
    run_generate(serial, serial.arm("colored"), mock);
    EXPECT_EQ(fixture::snapshot_tree(dir / "out"), first);
}

TEST(Generate, NoStyleArmFusesMaskOntoGray) {
    fixture::TempDir dir;
    auto config = load_fixture(dir, 3);
    config.save_composites = true;
    auto arm = config.arm("colored");
    arm.use_style_image = false;
    backend::MockBackend mock(0, config.backend.dims);
    run_generate(config, arm, mock);

    const auto palette = resolve_palette(config);
    const fs::path root = dir / "out" / "colored";
    for (const auto& r : annotate::read_manifest(root / annotate::kManifestName)) {
        EXPECT_EQ(r.style_source, "neutral");
        auto spec = masks::random_mask_spec(96, 96, masks::MaskFamily::Colored, config.constraints, r.seeds.mask_seed);
        const auto mask = masks::build_mask(spec, palette);
        const Image composite = read_image(root / r.composite_path);
        for (int y = 0; y < 96; ++y) {
            for (int x = 0; x < 96; ++x) {
                const auto m = mask.rgb.rgb(x, y);
                const Rgb expected{static_cast<std::uint8_t>(std::min(255, 128 + m[0])),
                                   static_cast<std::uint8_t>(std::min(255, 128 + m[1])),
                                   static_cast<std::uint8_t>(std::min(255, 128 + m[2]))};
                ASSERT_EQ(composite.rgb(x, y), expected) << x << "," << y;
            }
        }
        EXPECT_EQ(read_bitmap_png(root / r.mask_path), mask.occupancy);
    }
}

TEST(Generate, BaselineSendsStyleUnfused) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 4);
    const auto& arm = config.arm("baseline");
    backend::MockBackend mock(0, config.backend.dims);
    run_generate(config, arm, mock);
    const fs::path root = dir / "out" / "baseline";
    for (const auto& r : annotate::read_manifest(root / annotate::kManifestName)) {
        EXPECT_EQ(r.family, "none");
        EXPECT_TRUE(r.boxes.empty());
        EXPECT_EQ(read_bitmap_png(root / r.mask_path).count(), 0u);
        backend::GenRequest req;
        req.init_image = compose::load_style(config.style_dir / r.style_source, 96, 96).rgb;
        req.prompt = arm.prompt;
        req.denoise_strength = 0.99;
        req.guidance_scale = arm.guidance;
        req.steps = arm.steps;
        req.seed = r.seeds.gen_seed;
        EXPECT_EQ(read_image(root / r.image_path), mock.generate(req).image);
    }
}

TEST(Generate, StylesUsedRoundRobin) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 8);
    backend::MockBackend mock(0, config.backend.dims);
    run_generate(config, config.arm("perlin"), mock);
    const auto rows = annotate::read_manifest(dir / "out" / "perlin" / annotate::kManifestName);
    std::map<std::string, int> uses;
    for (const auto& r : rows) {
        ++uses[r.style_source];
    }
    EXPECT_EQ(uses.size(), 4u);
    for (const auto& [name, n] : uses) {
        EXPECT_EQ(n, 2) << name;
    }
}

TEST(Generate, FailedItemsAreSkippedUnderThreshold) {
    fixture::TempDir dir;
    auto config = load_fixture(dir, 20);
    config.failure_threshold = 0.05;
    const auto& arm = config.arm("colored");
    FlakyBackend flaky(std::set<std::uint64_t>{item_seeds(arm.base_seed, 4).gen_seed});
    const auto summary = run_generate(config, arm, flaky);
    EXPECT_EQ(summary.failed, 1u);
    EXPECT_EQ(summary.written, 19u);
    const auto rows = annotate::read_manifest(summary.manifest);
    ASSERT_EQ(rows.size(), 19u);
    EXPECT_EQ(rows[3].seeds.item_index, 3u);
    EXPECT_EQ(rows[4].seeds.item_index, 5u);
}

TEST(Generate, FailureRateAboveThresholdThrows) {
    fixture::TempDir dir;
    auto config = load_fixture(dir, 10);
    const auto& arm = config.arm("colored");
    FlakyBackend flaky(std::set<std::uint64_t>{item_seeds(arm.base_seed, 1).gen_seed, item_seeds(arm.base_seed, 2).gen_seed});
    EXPECT_THROW(run_generate(config, arm, flaky), GenerationFailed);
}

TEST(Generate, MissingStyleDirIsConfigError) {
    fixture::TempDir dir;
    auto config = load_fixture(dir, 2);
    config.style_dir = dir / "nope";
    backend::MockBackend mock;
    EXPECT_THROW(run_generate(config, config.arm("perlin"), mock), ConfigError);
}

TEST(Generate, InFlightRequestsAreBounded) {
    fixture::TempDir dir;
    auto config = load_fixture(dir, 8, 64);
    backend::MockServer server(backend::MockServerOptions{0, config.backend.dims, 30});
    server.start();
    backend::HttpOptions http;
    http.base_url = server.url();
    backend::HttpBackend client(http);
    for (int limit : {1, 3}) {
        config.backend.max_in_flight = limit;
        const auto before = server.stats().requests;
        run_generate(config, config.arm("colored"), client);
        const auto stats = server.stats();
        EXPECT_EQ(stats.requests - before, 8u);
        EXPECT_LE(stats.max_in_flight, 3);
        if (limit == 1) {
            EXPECT_EQ(stats.max_in_flight, 1);
        }
    }
    EXPECT_GE(server.stats().max_in_flight, 2);
}

TEST(Metrics, ArmAgainstItselfHasZeroFid) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 6);
    backend::MockBackend mock(0, config.backend.dims);
    run_generate(config, config.arm("perlin"), mock);
    const fs::path real = dir / "self";
    fs::create_directories(real);
    for (const auto& r : annotate::read_manifest(dir / "out" / "perlin" / annotate::kManifestName)) {
        fs::copy_file(dir / "out" / "perlin" / r.image_path, real / fs::path(r.image_path).filename());
    }
    const std::vector<std::string> arms{"perlin"};
    const auto reports = run_metrics(config, real, arms, mock);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_LE(reports[0].fid, 1e-6);
    ASSERT_TRUE(reports[0].clip_confidence_mean);
    EXPECT_GE(*reports[0].clip_confidence_mean, 0.0);
    EXPECT_LE(*reports[0].clip_confidence_mean, 1.0);
    EXPECT_EQ(reports[0].counts.images, 6u);
    EXPECT_EQ(reports[0].counts.real_images, 6u);
}

TEST(Metrics, ReportFollowsConfigOrder) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 3);
    backend::MockBackend mock(0, config.backend.dims);
    for (const char* arm : {"perlin", "baseline", "colored"}) {
        run_generate(config, config.arm(arm), mock);
    }
    const std::vector<std::string> first{"perlin"};
    run_metrics(config, dir / "real", first, mock);
    const std::vector<std::string> rest{"colored", "baseline"};
    run_metrics(config, dir / "real", rest, mock);

    const auto reports = collect_reports(config);
    ASSERT_EQ(reports.size(), 3u);
    EXPECT_EQ(reports[0].arm, "baseline");
    EXPECT_EQ(reports[1].arm, "colored");
    EXPECT_EQ(reports[2].arm, "perlin");
    EXPECT_FALSE(reports[0].clip_confidence_mean);
    EXPECT_TRUE(reports[2].clip_confidence_mean);

    std::ifstream csv(report_path(config));
    std::string header, a, b, c;
    std::getline(csv, header);
    std::getline(csv, a);
    std::getline(csv, b);
    std::getline(csv, c);
    EXPECT_EQ(header, "arm,nFID,CLIP Score,CLIP Conf.");
    EXPECT_TRUE(a.starts_with("baseline,"));
    EXPECT_TRUE(a.ends_with(",NA"));
    EXPECT_TRUE(b.starts_with("colored,"));
    EXPECT_TRUE(c.starts_with("perlin,"));
}

TEST(Metrics, MissingManifestIsReported) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 2);
    backend::MockBackend mock(0, config.backend.dims);
    EXPECT_THROW(run_metrics(config, dir / "real", {}, mock), MissingInputError);
    EXPECT_THROW(collect_reports(config), MissingInputError);
}

TEST(Metrics, MissingRealSetIsReported) {
    fixture::TempDir dir;
    const auto config = load_fixture(dir, 2);
    backend::MockBackend mock(0, config.backend.dims);
    run_generate(config, config.arm("perlin"), mock);
    const std::vector<std::string> arms{"perlin"};
    EXPECT_THROW(run_metrics(config, dir / "no-real", arms, mock), MissingInputError);
}
