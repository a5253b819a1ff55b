#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flameforge/backend.hpp"

namespace flameforge::backend::wire {

using json = nlohmann::ordered_json;

// A request body that does not match the protocol; `field` names the culprit.
class WireError : public std::runtime_error {
public:
    WireError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

std::string encode_base64(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> decode_base64(std::string_view text);

json generate_request(const GenRequest& request);
GenRequest parse_generate_request(const json& body);

json generate_response(const Image& image, std::string_view backend_id);
GenResult parse_generate_response(const json& body);

json embed_image_request(const Image& image, EmbeddingSpace space);
json embed_text_request(std::string_view text);

json embedding_response(const EmbeddingVector& embedding);
EmbeddingVector parse_embedding_response(const json& body, EmbeddingSpace space);

json error_body(std::string_view message, std::string_view field = {});

} // namespace flameforge::backend::wire
