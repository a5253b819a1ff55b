#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flameforge/image.hpp"

namespace flameforge::backend {

enum class EmbeddingSpace { ClipImage, ClipText, Inception };

std::string_view to_string(EmbeddingSpace space);
std::optional<EmbeddingSpace> parse_space(std::string_view name);

struct EmbeddingVector {
    EmbeddingSpace space = EmbeddingSpace::ClipImage;
    std::vector<float> values;

    std::size_t dim() const noexcept { return values.size(); }
};

struct GenRequest {
    Image init_image;
    std::string prompt;
    std::string negative_prompt;
    double denoise_strength = 0.5;
    double guidance_scale = 5.0;
    int steps = 30;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument on strength outside (0, 1], negative
    // guidance, steps < 1 or an empty init image.
    void validate() const;
};

struct GenResult {
    Image image;
    std::string backend_id;
    double latency_ms = 0.0;
};

struct EmbeddingDims {
    int clip = 512;
    int inception = 2048;
};

// Denoising and embedding capabilities. Implementations are safe to call
// from several threads at once.
class Backend {
public:
    virtual ~Backend() = default;

    virtual GenResult generate(const GenRequest& request) = 0;
    virtual EmbeddingVector embed_image(const Image& image) = 0;
    virtual EmbeddingVector embed_text(std::string_view text) = 0;
    virtual EmbeddingVector embed_inception(const Image& image) = 0;

    virtual std::string id() const = 0;
};

// Offline stand-in with deterministic outputs.
//
// generate(): box-blurs the init image round(4 * strength) times (3x3,
// edge-clamped), then adds Gaussian noise with a standard deviation of
// 48 * strength channel levels, seeded from the mock seed and a hash of the
// whole request.
//
// Embeddings: image vectors are a fixed random projection of downsampled
// colour statistics, a warm-colour (flame-like pixel) component and a small
// jitter keyed on the exact pixel bytes. Text vectors sum seeded vectors of
// word uni- and bigrams, plus the warm component for fire words (negated
// after "no", "non", "not" or "without").
class MockBackend final : public Backend {
public:
    explicit MockBackend(std::uint64_t seed = 0, EmbeddingDims dims = {});
    ~MockBackend() override;

    GenResult generate(const GenRequest& request) override;
    EmbeddingVector embed_image(const Image& image) override;
    EmbeddingVector embed_text(std::string_view text) override;
    EmbeddingVector embed_inception(const Image& image) override;

    std::string id() const override;

    std::uint64_t seed() const noexcept { return seed_; }
    const EmbeddingDims& dims() const noexcept { return dims_; }

private:
    struct Projection;

    EmbeddingVector embed_pixels(const Image& image, const Projection& projection, EmbeddingSpace space) const;

    std::uint64_t seed_;
    EmbeddingDims dims_;
    std::unique_ptr<Projection> clip_;
    std::unique_ptr<Projection> inception_;
};

struct HttpOptions {
    std::string base_url;
    double timeout_s = 120.0;
    int max_retries = 2;
    int retry_backoff_ms = 250;
    // Expected vector sizes; 0 accepts whatever the server returns.
    EmbeddingDims expected_dims{0, 0};
};

// Client for the JSON wire protocol:
//   POST /v1/generate      {init_png_b64, prompt, negative_prompt, strength, guidance, steps, seed}
//                          -> {image_png_b64, backend_id}
//   POST /v1/embed/image   {image_png_b64, space} -> {values, dim}
//   POST /v1/embed/text    {text} -> {values, dim}
// Transport failures and 429/503 answers are retried; other error answers
// surface as non-retryable BackendError carrying the server's message.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpOptions options);

    GenResult generate(const GenRequest& request) override;
    EmbeddingVector embed_image(const Image& image) override;
    EmbeddingVector embed_text(std::string_view text) override;
    EmbeddingVector embed_inception(const Image& image) override;

    std::string id() const override { return "http:" + options_.base_url; }

private:
    std::string post(const std::string& path, const std::string& body) const;
    EmbeddingVector embed_png(const Image& image, EmbeddingSpace space);

    HttpOptions options_;
};

inline constexpr std::string_view kMockUrl = "mock";

// "mock" (optionally "mock:<seed>") selects MockBackend; anything else is a base URL.
std::unique_ptr<Backend> make_backend(const std::string& url, const HttpOptions& http = {}, EmbeddingDims mock_dims = {});

} // namespace flameforge::backend
