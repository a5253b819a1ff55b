#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "flameforge/backend.hpp"
#include "flameforge/error.hpp"
#include "flameforge/wire.hpp"

namespace flameforge::backend {

std::string_view to_string(EmbeddingSpace space) {
    switch (space) {
    case EmbeddingSpace::ClipImage: return "clip_image";
    case EmbeddingSpace::ClipText: return "clip_text";
    case EmbeddingSpace::Inception: return "inception";
    }
    return "unknown";
}

std::optional<EmbeddingSpace> parse_space(std::string_view name) {
    for (auto s : {EmbeddingSpace::ClipImage, EmbeddingSpace::ClipText, EmbeddingSpace::Inception}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    return std::nullopt;
}

void GenRequest::validate() const {
    if (init_image.empty()) {
        throw std::invalid_argument("generate: init image is empty");
    }
    if (!(denoise_strength > 0.0 && denoise_strength <= 1.0)) {
        throw std::invalid_argument("generate: denoise strength must be in (0, 1]");
    }
    if (!(guidance_scale >= 0.0) || !std::isfinite(guidance_scale)) {
        throw std::invalid_argument("generate: guidance scale must be >= 0");
    }
    if (steps < 1) {
        throw std::invalid_argument("generate: steps must be >= 1");
    }
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
    if (options_.base_url.empty()) {
        throw ConfigError("backend url is empty");
    }
    while (options_.base_url.size() > 1 && options_.base_url.back() == '/') {
        options_.base_url.pop_back();
    }
    if (!(options_.timeout_s > 0.0)) {
        throw ConfigError("backend timeout must be positive");
    }
}

std::string HttpBackend::post(const std::string& path, const std::string& body) const {
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(options_.timeout_s));
    for (int attempt = 0;; ++attempt) {
        // httplib clients are not safe to share across threads; one per call.
        httplib::Client client(options_.base_url);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        std::string failure;
        bool retryable = true;
        if (auto res = client.Post(path, body, "application/json")) {
            if (res->status == 200) {
                return res->body;
            }
            std::string message = res->body;
            try {
                const auto err = wire::json::parse(res->body);
                if (err.contains("error") && err.at("error").is_string()) {
                    message = err.at("error").get<std::string>();
                }
            } catch (const wire::json::exception&) {
            }
            failure = "backend " + path + " answered " + std::to_string(res->status) + ": " + message;
            retryable = res->status == 429 || res->status == 503;
        } else {
            failure = "backend " + options_.base_url + path + " unreachable: " + httplib::to_string(res.error());
        }
        if (!retryable || attempt >= options_.max_retries) {
            throw BackendError(failure, retryable);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(options_.retry_backoff_ms * (attempt + 1)));
    }
}

GenResult HttpBackend::generate(const GenRequest& request) {
    request.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::string body = post("/v1/generate", wire::generate_request(request).dump());
    GenResult result;
    try {
        result = wire::parse_generate_response(wire::json::parse(body));
    } catch (const std::exception& e) {
        throw BackendError(std::string("malformed /v1/generate response: ") + e.what(), false);
    }
    if (result.image.width != request.init_image.width || result.image.height != request.init_image.height) {
        throw BackendError("backend returned a " + std::to_string(result.image.width) + "x" +
                               std::to_string(result.image.height) + " image for a " +
                               std::to_string(request.init_image.width) + "x" +
                               std::to_string(request.init_image.height) + " request",
                           false);
    }
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    result.latency_ms = elapsed.count();
    return result;
}

EmbeddingVector HttpBackend::embed_png(const Image& image, EmbeddingSpace space) {
    const std::string body = post("/v1/embed/image", wire::embed_image_request(image, space).dump());
    EmbeddingVector out;
    try {
        out = wire::parse_embedding_response(wire::json::parse(body), space);
    } catch (const std::exception& e) {
        throw BackendError(std::string("malformed /v1/embed/image response: ") + e.what(), false);
    }
    const int expected = space == EmbeddingSpace::Inception ? options_.expected_dims.inception
                                                            : options_.expected_dims.clip;
    if (expected > 0 && out.dim() != static_cast<std::size_t>(expected)) {
        throw BackendError("backend returned a " + std::to_string(out.dim()) + "-dim " + std::string(to_string(space)) +
                               " embedding, expected " + std::to_string(expected),
                           false);
    }
    return out;
}

EmbeddingVector HttpBackend::embed_image(const Image& image) {
    return embed_png(image, EmbeddingSpace::ClipImage);
}

EmbeddingVector HttpBackend::embed_inception(const Image& image) {
    return embed_png(image, EmbeddingSpace::Inception);
}

EmbeddingVector HttpBackend::embed_text(std::string_view text) {
    const std::string body = post("/v1/embed/text", wire::embed_text_request(text).dump());
    EmbeddingVector out;
    try {
        out = wire::parse_embedding_response(wire::json::parse(body), EmbeddingSpace::ClipText);
    } catch (const std::exception& e) {
        throw BackendError(std::string("malformed /v1/embed/text response: ") + e.what(), false);
    }
    if (options_.expected_dims.clip > 0 && out.dim() != static_cast<std::size_t>(options_.expected_dims.clip)) {
        throw BackendError("backend returned a " + std::to_string(out.dim()) + "-dim text embedding, expected " +
                               std::to_string(options_.expected_dims.clip),
                           false);
    }
    return out;
}

std::unique_ptr<Backend> make_backend(const std::string& url, const HttpOptions& http, EmbeddingDims mock_dims) {
    if (url == kMockUrl) {
        return std::make_unique<MockBackend>(0, mock_dims);
    }
    if (url.starts_with("mock:")) {
        try {
            return std::make_unique<MockBackend>(std::stoull(url.substr(5)), mock_dims);
        } catch (const std::logic_error&) {
            throw ConfigError("invalid mock backend seed in '" + url + "'");
        }
    }
    HttpOptions options = http;
    options.base_url = url;
    return std::make_unique<HttpBackend>(options);
}

} // namespace flameforge::backend
