#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>

#include "flameforge/backend.hpp"
#include "flameforge/random.hpp"

namespace flameforge::backend {

namespace {

constexpr int kGrid = 8;
constexpr int kFeatures = kGrid * kGrid * 3 + 6;
constexpr double kNoisePerStrength = 48.0;
constexpr double kWarmImage = 8.0;
constexpr double kWarmText = 40.0;
constexpr double kJitter = 0.01;

constexpr std::uint64_t kClipTag = 0x636c6970ULL;
constexpr std::uint64_t kInceptionTag = 0x696e6365ULL;
constexpr std::uint64_t kTextTag = 0x74657874ULL;
constexpr std::uint64_t kWarmTag = 0x7761726dULL;

Image box_blur(const Image& in) {
    Image out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            std::array<int, 3> sum{};
            for (int dy = -1; dy <= 1; ++dy) {
                const int sy = std::clamp(y + dy, 0, in.height - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sx = std::clamp(x + dx, 0, in.width - 1);
                    const auto* p = in.pixel(sx, sy);
                    sum[0] += p[0];
                    sum[1] += p[1];
                    sum[2] += p[2];
                }
            }
            auto* q = out.pixel(x, y);
            for (int c = 0; c < 3; ++c) {
                q[c] = static_cast<std::uint8_t>((sum[c] + 4) / 9);
            }
        }
    }
    return out;
}

std::vector<float> unit_gaussian_vector(std::uint64_t seed, int dim) {
    Rng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(dim));
    double norm = 0.0;
    for (auto& x : v) {
        x = static_cast<float>(rng.normal());
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) {
        x = static_cast<float>(x / norm);
    }
    return v;
}

// Fraction of pixels that look like flame: bright, red-dominant, warm ordering.
double warmth(const Image& image) {
    std::size_t warm = 0;
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const int r = image.data[i * 3];
        const int g = image.data[i * 3 + 1];
        const int b = image.data[i * 3 + 2];
        if (r >= 150 && r > g && g >= b && r - b >= 60) {
            ++warm;
        }
    }
    return image.pixel_count() == 0 ? 0.0 : static_cast<double>(warm) / image.pixel_count();
}

std::array<double, kFeatures> pixel_features(const Image& image) {
    std::array<double, kFeatures> f{};
    std::array<double, kGrid * kGrid * 3> sums{};
    std::array<std::size_t, kGrid * kGrid> counts{};
    std::array<double, 3> mean{};
    std::array<double, 3> sq{};
    for (int y = 0; y < image.height; ++y) {
        const int gy = y * kGrid / image.height;
        for (int x = 0; x < image.width; ++x) {
            const int gx = x * kGrid / image.width;
            const auto* p = image.pixel(x, y);
            const int cell = gy * kGrid + gx;
            ++counts[cell];
            for (int c = 0; c < 3; ++c) {
                const double v = p[c] / 255.0;
                sums[cell * 3 + c] += v;
                mean[c] += v;
                sq[c] += v * v;
            }
        }
    }
    for (int cell = 0; cell < kGrid * kGrid; ++cell) {
        for (int c = 0; c < 3; ++c) {
            // Cells can be empty for rasters smaller than the grid.
            const double m = counts[cell] ? sums[cell * 3 + c] / counts[cell] : 0.5;
            f[cell * 3 + c] = m - 0.5;
        }
    }
    const auto n = static_cast<double>(image.pixel_count());
    for (int c = 0; c < 3; ++c) {
        const double m = mean[c] / n;
        f[kGrid * kGrid * 3 + c] = m - 0.5;
        f[kGrid * kGrid * 3 + 3 + c] = std::sqrt(std::max(0.0, sq[c] / n - m * m));
    }
    return f;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

bool is_fire_word(const std::string& t) {
    static constexpr std::array<std::string_view, 9> kWords{"fire",     "fires",   "flame", "flames", "wildfire",
                                                             "wildfires", "burning", "blaze", "smoke"};
    return std::find(kWords.begin(), kWords.end(), t) != kWords.end();
}

bool is_negation(const std::string& t) {
    return t == "no" || t == "non" || t == "not" || t == "without";
}

} // namespace

struct MockBackend::Projection {
    int dim = 0;
    std::vector<float> matrix;  // dim x kFeatures, row-major
    std::vector<float> warm;
};

MockBackend::MockBackend(std::uint64_t seed, EmbeddingDims dims) : seed_(seed), dims_(dims) {
    if (dims.clip < 1 || dims.inception < 1) {
        throw std::invalid_argument("mock backend: embedding dimensions must be positive");
    }
    const auto make = [seed](int dim, std::uint64_t tag) {
        auto p = std::make_unique<Projection>();
        p->dim = dim;
        Rng rng(mix64(seed ^ tag));
        const double scale = 1.0 / std::sqrt(static_cast<double>(kFeatures));
        p->matrix.resize(static_cast<std::size_t>(dim) * kFeatures);
        for (auto& m : p->matrix) {
            m = static_cast<float>(rng.normal() * scale);
        }
        p->warm = unit_gaussian_vector(mix64(seed ^ kWarmTag), dim);
        return p;
    };
    clip_ = make(dims.clip, kClipTag);
    inception_ = make(dims.inception, kInceptionTag);
}

MockBackend::~MockBackend() = default;

std::string MockBackend::id() const {
    return "mock:" + std::to_string(seed_);
}

GenResult MockBackend::generate(const GenRequest& request) {
    request.validate();
    const auto start = std::chrono::steady_clock::now();

    Fnv1a hash;
    hash.update_value(seed_);
    hash.update_value(request.init_image.width);
    hash.update_value(request.init_image.height);
    hash.update(request.init_image.data);
    hash.update(request.prompt);
    hash.update_value(std::uint8_t{0});
    hash.update(request.negative_prompt);
    hash.update_value(request.denoise_strength);
    hash.update_value(request.guidance_scale);
    hash.update_value(request.steps);
    hash.update_value(request.seed);

    Image image = request.init_image;
    const auto passes = std::lround(request.denoise_strength * 4.0);
    for (long i = 0; i < passes; ++i) {
        image = box_blur(image);
    }
    Rng rng(mix64(hash.digest()));
    const double sigma = kNoisePerStrength * request.denoise_strength;
    for (auto& v : image.data) {
        v = static_cast<std::uint8_t>(std::clamp(std::lround(v + sigma * rng.normal()), 0L, 255L));
    }

    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    return {std::move(image), id(), elapsed.count()};
}

EmbeddingVector MockBackend::embed_pixels(const Image& image, const Projection& projection, EmbeddingSpace space) const {
    if (image.empty()) {
        throw std::invalid_argument("mock backend: cannot embed an empty image");
    }
    const auto f = pixel_features(image);
    const double warm = kWarmImage * warmth(image);

    Fnv1a hash;
    hash.update_value(seed_);
    hash.update_value(image.width);
    hash.update_value(image.height);
    hash.update(image.data);
    Rng jitter(mix64(hash.digest()));

    EmbeddingVector out{space, std::vector<float>(static_cast<std::size_t>(projection.dim))};
    for (int d = 0; d < projection.dim; ++d) {
        const float* row = projection.matrix.data() + static_cast<std::size_t>(d) * kFeatures;
        double acc = 0.0;
        for (int j = 0; j < kFeatures; ++j) {
            acc += row[j] * f[j];
        }
        acc += warm * projection.warm[d] + kJitter * jitter.normal();
        out.values[d] = static_cast<float>(acc);
    }
    return out;
}

EmbeddingVector MockBackend::embed_image(const Image& image) {
    return embed_pixels(image, *clip_, EmbeddingSpace::ClipImage);
}

EmbeddingVector MockBackend::embed_inception(const Image& image) {
    return embed_pixels(image, *inception_, EmbeddingSpace::Inception);
}

EmbeddingVector MockBackend::embed_text(std::string_view text) {
    const auto tokens = tokenize(text);
    const int dim = clip_->dim;
    std::vector<double> acc(static_cast<std::size_t>(dim), 0.0);
    const auto add_ngram = [&](const std::string& gram) {
        Fnv1a h;
        h.update(gram);
        Rng rng(mix64(h.digest() ^ mix64(seed_ ^ kTextTag)));
        for (auto& a : acc) {
            a += rng.normal();
        }
    };
    double fire = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add_ngram(tokens[i]);
        if (i + 1 < tokens.size()) {
            add_ngram(tokens[i] + " " + tokens[i + 1]);
        }
        if (is_fire_word(tokens[i])) {
            fire += (i > 0 && is_negation(tokens[i - 1])) ? -1.0 : 1.0;
        }
    }
    EmbeddingVector out{EmbeddingSpace::ClipText, std::vector<float>(static_cast<std::size_t>(dim))};
    for (int d = 0; d < dim; ++d) {
        out.values[d] = static_cast<float>(acc[d] + kWarmText * fire * clip_->warm[d]);
    }
    return out;
}

} // namespace flameforge::backend
