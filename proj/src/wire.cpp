#include "flameforge/wire.hpp"

#include <cmath>

#include <openssl/evp.h>

#include "flameforge/error.hpp"

namespace flameforge::backend::wire {

namespace {

template <typename T>
T require(const json& body, const char* field) {
    if (!body.is_object() || !body.contains(field)) {
        throw WireError(field, std::string("missing field '") + field + "'");
    }
    const auto& v = body.at(field);
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) {
                throw WireError(field, std::string("field '") + field + "' must be a string");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                throw WireError(field, std::string("field '") + field + "' must be an integer");
            }
            if constexpr (std::is_unsigned_v<T>) {
                if (!v.is_number_unsigned()) {
                    throw WireError(field, std::string("field '") + field + "' must be non-negative");
                }
            }
        } else {
            if (!v.is_number()) {
                throw WireError(field, std::string("field '") + field + "' must be a number");
            }
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw WireError(field, std::string("field '") + field + "': " + e.what());
    }
}

Image decode_png_field(const json& body, const char* field) {
    const auto text = require<std::string>(body, field);
    try {
        return decode_image(decode_base64(text));
    } catch (const WireError& e) {
        throw WireError(field, std::string("field '") + field + "': " + e.what());
    } catch (const ImageIoError& e) {
        throw WireError(field, std::string("field '") + field + "': " + e.what());
    }
}

} // namespace

std::string encode_base64(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> decode_base64(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw WireError("base64", "base64 payload length is not a multiple of 4");
    }
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw WireError("base64", "invalid base64 payload");
    }
    std::size_t padding = 0;
    for (auto it = text.rbegin(); it != text.rend() && *it == '=' && padding < 2; ++it) {
        ++padding;
    }
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

json generate_request(const GenRequest& request) {
    json body;
    body["init_png_b64"] = encode_base64(encode_png(request.init_image));
    body["prompt"] = request.prompt;
    body["negative_prompt"] = request.negative_prompt;
    body["strength"] = request.denoise_strength;
    body["guidance"] = request.guidance_scale;
    body["steps"] = request.steps;
    body["seed"] = request.seed;
    return body;
}

GenRequest parse_generate_request(const json& body) {
    GenRequest request;
    request.init_image = decode_png_field(body, "init_png_b64");
    request.prompt = require<std::string>(body, "prompt");
    request.negative_prompt = body.contains("negative_prompt") ? require<std::string>(body, "negative_prompt") : "";
    request.denoise_strength = require<double>(body, "strength");
    request.guidance_scale = require<double>(body, "guidance");
    request.steps = require<int>(body, "steps");
    request.seed = require<std::uint64_t>(body, "seed");
    if (!(request.denoise_strength > 0.0 && request.denoise_strength <= 1.0)) {
        throw WireError("strength", "strength must be in (0, 1]");
    }
    if (!(request.guidance_scale >= 0.0) || !std::isfinite(request.guidance_scale)) {
        throw WireError("guidance", "guidance must be >= 0");
    }
    if (request.steps < 1) {
        throw WireError("steps", "steps must be >= 1");
    }
    return request;
}

json generate_response(const Image& image, std::string_view backend_id) {
    json body;
    body["image_png_b64"] = encode_base64(encode_png(image));
    body["backend_id"] = backend_id;
    return body;
}

GenResult parse_generate_response(const json& body) {
    GenResult result;
    result.image = decode_png_field(body, "image_png_b64");
    result.backend_id = require<std::string>(body, "backend_id");
    return result;
}

json embed_image_request(const Image& image, EmbeddingSpace space) {
    json body;
    body["image_png_b64"] = encode_base64(encode_png(image));
    body["space"] = to_string(space);
    return body;
}

json embed_text_request(std::string_view text) {
    json body;
    body["text"] = text;
    return body;
}

json embedding_response(const EmbeddingVector& embedding) {
    json body;
    body["values"] = embedding.values;
    body["dim"] = embedding.dim();
    return body;
}

EmbeddingVector parse_embedding_response(const json& body, EmbeddingSpace space) {
    if (!body.is_object() || !body.contains("values") || !body.at("values").is_array()) {
        throw WireError("values", "missing array field 'values'");
    }
    EmbeddingVector out{space, {}};
    out.values.reserve(body.at("values").size());
    for (const auto& v : body.at("values")) {
        if (!v.is_number()) {
            throw WireError("values", "embedding values must be numbers");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            throw WireError("values", "embedding values must be finite");
        }
        out.values.push_back(static_cast<float>(d));
    }
    const auto dim = require<std::size_t>(body, "dim");
    if (dim != out.values.size()) {
        throw WireError("dim", "dim " + std::to_string(dim) + " does not match " + std::to_string(out.values.size()) +
                                   " values");
    }
    return out;
}

json error_body(std::string_view message, std::string_view field) {
    json body;
    body["error"] = message;
    if (!field.empty()) {
        body["field"] = field;
    }
    return body;
}

} // namespace flameforge::backend::wire
