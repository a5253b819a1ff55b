#include "flameforge/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "flameforge/error.hpp"

namespace flameforge::pipeline {
namespace fs = std::filesystem;

namespace {

class TableReader {
public:
    TableReader(const toml::table& table, std::string scope) : table_(table), scope_(std::move(scope)) {}

    std::string where(std::string_view key) const {
        return scope_.empty() ? std::string(key) : scope_ + "." + std::string(key);
    }

    bool has(std::string_view key) const { return table_.contains(key); }

    std::string str(std::string_view key, std::string fallback) const {
        return read<std::string>(key, std::move(fallback), "a string");
    }
    double real(std::string_view key, double fallback) const { return read<double>(key, fallback, "a number"); }
    bool flag(std::string_view key, bool fallback) const { return read<bool>(key, fallback, "a boolean"); }

    std::int64_t integer(std::string_view key, std::int64_t fallback) const {
        const auto* node = table_.get(key);
        if (!node) {
            return fallback;
        }
        if (!node->is_integer()) {
            throw ConfigError("config: '" + where(key) + "' must be an integer");
        }
        return node->as_integer()->get();
    }

    std::uint64_t seed(std::string_view key, std::uint64_t fallback) const {
        const auto v = integer(key, static_cast<std::int64_t>(fallback));
        if (v < 0) {
            throw ConfigError("config: '" + where(key) + "' must be non-negative");
        }
        return static_cast<std::uint64_t>(v);
    }

    const toml::table* subtable(std::string_view key) const {
        const auto* node = table_.get(key);
        if (!node) {
            return nullptr;
        }
        if (!node->is_table()) {
            throw ConfigError("config: '" + where(key) + "' must be a table");
        }
        return node->as_table();
    }

    void reject_unknown(std::initializer_list<std::string_view> allowed) const {
        for (const auto& [key, node] : table_) {
            if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
                throw ConfigError("config: unknown key '" + where(key.str()) + "'");
            }
        }
    }

private:
    template <typename T>
    T read(std::string_view key, T fallback, const char* kind) const {
        const auto* node = table_.get(key);
        if (!node) {
            return fallback;
        }
        if constexpr (std::is_same_v<T, double>) {
            if (!node->is_number()) {
                throw ConfigError("config: '" + where(key) + "' must be " + kind);
            }
        }
        const auto v = node->value<T>();
        if (!v) {
            throw ConfigError("config: '" + where(key) + "' must be " + kind);
        }
        return *v;
    }

    const toml::table& table_;
    std::string scope_;
};

fs::path resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) {
        return {};
    }
    const fs::path p(value);
    return p.is_absolute() || base.empty() ? p : base / p;
}

masks::PerlinMaskOptions read_perlin(const TableReader& r) {
    r.reject_unknown({"seed", "frequency", "octaves", "lacunarity", "persistence", "warp_fraction", "cut_threshold",
                      "interior_boost", "min_fragment_px"});
    masks::PerlinMaskOptions p;
    p.seed = r.seed("seed", p.seed);
    p.frequency = r.real("frequency", p.frequency);
    p.octaves = static_cast<int>(r.integer("octaves", p.octaves));
    p.lacunarity = r.real("lacunarity", p.lacunarity);
    p.persistence = r.real("persistence", p.persistence);
    p.warp_fraction = r.real("warp_fraction", p.warp_fraction);
    p.cut_threshold = r.real("cut_threshold", p.cut_threshold);
    p.interior_boost = r.real("interior_boost", p.interior_boost);
    p.min_fragment_px = static_cast<int>(r.integer("min_fragment_px", p.min_fragment_px));
    return p;
}

ArmConfig read_arm(const toml::table& table, std::size_t index) {
    const TableReader r(table, "arms[" + std::to_string(index) + "]");
    r.reject_unknown({"name", "family", "sigma", "perlin", "use_style_image", "strength", "guidance", "steps",
                      "prompt", "negative_prompt", "count", "base_seed", "alpha"});
    ArmConfig arm;
    arm.name = r.str("name", "");
    const auto family = r.str("family", "perlin");
    if (family != "none") {
        arm.family = masks::parse_family(family);
        if (!arm.family) {
            throw ConfigError("config: '" + r.where("family") + "' must be one of none, binary, colored, noise, perlin");
        }
    }
    arm.sigma = r.real("sigma", arm.sigma);
    if (const auto* perlin = r.subtable("perlin")) {
        arm.perlin = read_perlin(TableReader(*perlin, r.where("perlin")));
    }
    arm.use_style_image = r.flag("use_style_image", arm.use_style_image);
    arm.strength = r.real("strength", arm.family ? kDefaultStrength : kBaselineStrength);
    arm.guidance = r.real("guidance", arm.guidance);
    arm.steps = static_cast<int>(r.integer("steps", arm.steps));
    arm.prompt = r.str("prompt", arm.prompt);
    arm.negative_prompt = r.str("negative_prompt", arm.negative_prompt);
    arm.count = static_cast<int>(r.integer("count", arm.count));
    arm.base_seed = r.seed("base_seed", arm.base_seed);
    arm.fuse_alpha = r.real("alpha", arm.fuse_alpha);
    return arm;
}

bool valid_arm_name(const std::string& name) {
    return !name.empty() && name != "." && name != ".." && std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

} // namespace

const ArmConfig& ExperimentConfig::arm(std::string_view name) const {
    const auto it = std::find_if(arms.begin(), arms.end(), [&](const ArmConfig& a) { return a.name == name; });
    if (it == arms.end()) {
        throw ConfigError("unknown arm '" + std::string(name) + "'");
    }
    return *it;
}

void ExperimentConfig::validate() const {
    const auto fail = [](const std::string& why) { throw ConfigError("config: " + why); };
    if (canvas_w < 1 || canvas_h < 1) {
        fail("canvas dimensions must be positive");
    }
    if (arms.empty()) {
        fail("at least one [[arms]] entry is required");
    }
    if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) {
        fail("failure_threshold must be in [0, 1]");
    }
    try {
        constraints.validate(canvas_w, canvas_h);
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    std::set<std::string> names;
    for (const auto& a : arms) {
        const std::string tag = "arm '" + a.name + "': ";
        if (!valid_arm_name(a.name)) {
            fail("arm names must be non-empty and use only letters, digits, '_', '-' or '.' (got '" + a.name + "')");
        }
        if (!names.insert(a.name).second) {
            fail("duplicate arm name '" + a.name + "'");
        }
        if (a.count < 1) {
            fail(tag + "count must be >= 1");
        }
        if (!(a.strength > 0.0 && a.strength <= 1.0)) {
            fail(tag + "strength must be in (0, 1]");
        }
        if (!(a.guidance >= 0.0)) {
            fail(tag + "guidance must be >= 0");
        }
        if (a.steps < 1) {
            fail(tag + "steps must be >= 1");
        }
        if (!(a.sigma >= 0.0)) {
            fail(tag + "sigma must be >= 0");
        }
        if (a.sigma != 0.0 && a.family != masks::MaskFamily::Noise) {
            fail(tag + "sigma is only valid for the noise family");
        }
        if (!(a.fuse_alpha >= 0.0 && a.fuse_alpha <= 1.0)) {
            fail(tag + "alpha must be in [0, 1]");
        }
        if (a.family == masks::MaskFamily::Perlin) {
            try {
                a.perlin.validate();
            } catch (const std::invalid_argument& e) {
                fail(tag + e.what());
            }
        }
        if (!a.family && !a.use_style_image) {
            fail(tag + "a mask-free arm needs a style image");
        }
        if (a.use_style_image && style_dir.empty()) {
            fail(tag + "uses style images but style_dir is not set");
        }
        if (a.family && *a.family != masks::MaskFamily::Binary && palette_dir.empty() && palette_file.empty()) {
            fail(tag + "needs a fire palette: set palette_dir or palette_file");
        }
    }
    if (backend.url.empty()) {
        fail("backend.url must not be empty");
    }
    if (backend.max_in_flight < 1) {
        fail("backend.max_in_flight must be >= 1");
    }
    if (!(backend.timeout_s > 0.0)) {
        fail("backend.timeout_s must be > 0");
    }
    if (backend.max_retries < 0) {
        fail("backend.max_retries must be >= 0");
    }
    if (backend.dims.clip < 1 || backend.dims.inception < 1) {
        fail("backend embedding dimensions must be positive");
    }
    if (!(metrics.temperature > 0.0)) {
        fail("metrics.temperature must be > 0");
    }
    if (metrics.normalization == metrics::Normalization::DivideByReference && !(metrics.reference > 0.0)) {
        fail("metrics.reference must be > 0 for divide_by_reference");
    }
    if (!(metrics.crop_pad >= 0.0)) {
        fail("metrics.crop_pad must be >= 0");
    }
    if (palette.max_pixels == 0) {
        fail("palette.max_pixels must be positive");
    }
}

ExperimentConfig parse_config(std::string_view toml_text, const fs::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(msg.str());
    }
    const TableReader r(root, "");
    r.reject_unknown({"style_dir", "palette_dir", "palette_file", "output_root", "canvas", "failure_threshold",
                      "save_composites", "yolo_class", "palette", "masks", "backend", "metrics", "arms"});

    ExperimentConfig c;
    c.style_dir = resolve(base_dir, r.str("style_dir", ""));
    c.palette_dir = resolve(base_dir, r.str("palette_dir", ""));
    c.palette_file = resolve(base_dir, r.str("palette_file", ""));
    c.output_root = resolve(base_dir, r.str("output_root", "out"));
    c.failure_threshold = r.real("failure_threshold", c.failure_threshold);
    c.save_composites = r.flag("save_composites", c.save_composites);
    c.yolo_class = static_cast<int>(r.integer("yolo_class", c.yolo_class));

    if (const auto* canvas = r.subtable("canvas")) {
        const TableReader cr(*canvas, "canvas");
        cr.reject_unknown({"width", "height"});
        c.canvas_w = static_cast<int>(cr.integer("width", c.canvas_w));
        c.canvas_h = static_cast<int>(cr.integer("height", c.canvas_h));
    }
    if (const auto* palette = r.subtable("palette")) {
        const TableReader pr(*palette, "palette");
        pr.reject_unknown({"fire_class", "max_pixels", "seed"});
        c.palette.fire_class = static_cast<int>(pr.integer("fire_class", c.palette.fire_class));
        const auto max_pixels = pr.integer("max_pixels", static_cast<std::int64_t>(c.palette.max_pixels));
        if (max_pixels < 1) {
            throw ConfigError("config: 'palette.max_pixels' must be positive");
        }
        c.palette.max_pixels = static_cast<std::size_t>(max_pixels);
        c.palette.seed = pr.seed("seed", c.palette.seed);
    }
    if (const auto* m = r.subtable("masks")) {
        const TableReader mr(*m, "masks");
        mr.reject_unknown({"min_regions", "max_regions", "min_size_frac", "max_size_frac", "min_area_px", "kinds"});
        auto& k = c.constraints;
        k.min_regions = static_cast<int>(mr.integer("min_regions", k.min_regions));
        k.max_regions = static_cast<int>(mr.integer("max_regions", k.max_regions));
        k.min_size_frac = mr.real("min_size_frac", k.min_size_frac);
        k.max_size_frac = mr.real("max_size_frac", k.max_size_frac);
        k.min_area_px = mr.real("min_area_px", k.min_area_px);
        if (const auto* kinds = m->get("kinds")) {
            const auto* arr = kinds->as_array();
            if (!arr) {
                throw ConfigError("config: 'masks.kinds' must be an array of strings");
            }
            k.kinds.clear();
            for (const auto& node : *arr) {
                const auto name = node.value<std::string>();
                if (name == "rectangle") {
                    k.kinds.push_back(masks::ShapeKind::Rectangle);
                } else if (name == "circle") {
                    k.kinds.push_back(masks::ShapeKind::Circle);
                } else if (name == "ellipse") {
                    k.kinds.push_back(masks::ShapeKind::Ellipse);
                } else {
                    throw ConfigError("config: 'masks.kinds' entries must be rectangle, circle or ellipse");
                }
            }
        }
    }
    if (const auto* b = r.subtable("backend")) {
        const TableReader br(*b, "backend");
        br.reject_unknown({"url", "timeout_s", "max_in_flight", "max_retries", "clip_dim", "inception_dim"});
        c.backend.url = br.str("url", c.backend.url);
        c.backend.timeout_s = br.real("timeout_s", c.backend.timeout_s);
        c.backend.max_in_flight = static_cast<int>(br.integer("max_in_flight", c.backend.max_in_flight));
        c.backend.max_retries = static_cast<int>(br.integer("max_retries", c.backend.max_retries));
        c.backend.dims.clip = static_cast<int>(br.integer("clip_dim", c.backend.dims.clip));
        c.backend.dims.inception = static_cast<int>(br.integer("inception_dim", c.backend.dims.inception));
    }
    if (const auto* m = r.subtable("metrics")) {
        const TableReader mr(*m, "metrics");
        mr.reject_unknown({"normalization", "reference", "fire_prompt", "nonfire_prompt", "temperature", "crop_pad"});
        const auto mode = metrics::parse_normalization(mr.str("normalization", "none"));
        if (!mode) {
            throw ConfigError("config: 'metrics.normalization' must be none or divide_by_reference");
        }
        c.metrics.normalization = *mode;
        c.metrics.reference = mr.real("reference", c.metrics.reference);
        c.metrics.fire_prompt = mr.str("fire_prompt", c.metrics.fire_prompt);
        c.metrics.nonfire_prompt = mr.str("nonfire_prompt", c.metrics.nonfire_prompt);
        c.metrics.temperature = mr.real("temperature", c.metrics.temperature);
        c.metrics.crop_pad = mr.real("crop_pad", c.metrics.crop_pad);
    }
    if (const auto* arms = root.get("arms")) {
        const auto* arr = arms->as_array();
        if (!arr) {
            throw ConfigError("config: 'arms' must be an array of tables ([[arms]])");
        }
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const auto* t = (*arr)[i].as_table();
            if (!t) {
                throw ConfigError("config: 'arms' must be an array of tables ([[arms]])");
            }
            c.arms.push_back(read_arm(*t, i));
        }
    }
    return c;
}

void apply_env_overrides(ExperimentConfig& config) {
    if (const char* url = std::getenv(kBackendUrlEnv); url && *url) {
        config.backend.url = url;
    }
    if (const char* out = std::getenv(kOutputRootEnv); out && *out) {
        config.output_root = out;
    }
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    ExperimentConfig config = parse_config(text.str(), path.parent_path());
    apply_env_overrides(config);
    return config;
}

} // namespace flameforge::pipeline
