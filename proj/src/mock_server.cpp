#include "flameforge/mock_server.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>

#include "flameforge/error.hpp"
#include "flameforge/wire.hpp"

namespace flameforge::backend {

struct MockServer::Impl {
    explicit Impl(const MockServerOptions& opts) : options(opts), backend(opts.seed, opts.dims) {}

    MockServerOptions options;
    MockBackend backend;
    httplib::Server server;
    std::thread thread;
    std::string host;
    int port = 0;
    std::atomic<std::uint64_t> requests{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};

    // Counts a request for the lifetime of its handler.
    class Tracker {
    public:
        explicit Tracker(Impl& impl) : impl_(impl) {
            ++impl_.requests;
            const int now = ++impl_.in_flight;
            int seen = impl_.max_in_flight.load();
            while (now > seen && !impl_.max_in_flight.compare_exchange_weak(seen, now)) {
            }
            if (impl_.options.delay_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(impl_.options.delay_ms));
            }
        }
        ~Tracker() { --impl_.in_flight; }

    private:
        Impl& impl_;
    };

    template <typename Handler>
    void post(const std::string& path, Handler handler) {
        server.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
            Tracker tracker(*this);
            try {
                const auto body = wire::json::parse(req.body);
                res.set_content(handler(body).dump(), "application/json");
            } catch (const wire::WireError& e) {
                res.status = 400;
                res.set_content(wire::error_body(e.what(), e.field()).dump(), "application/json");
            } catch (const wire::json::exception& e) {
                res.status = 400;
                res.set_content(wire::error_body(std::string("malformed json: ") + e.what()).dump(),
                                "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(wire::error_body(e.what()).dump(), "application/json");
            }
        });
    }

    void install_routes() {
        post("/v1/generate", [this](const wire::json& body) {
            const auto result = backend.generate(wire::parse_generate_request(body));
            return wire::generate_response(result.image, result.backend_id);
        });
        post("/v1/embed/image", [this](const wire::json& body) {
            if (!body.contains("image_png_b64") || !body.at("image_png_b64").is_string()) {
                throw wire::WireError("image_png_b64", "missing field 'image_png_b64'");
            }
            const auto space_name = body.value("space", std::string(to_string(EmbeddingSpace::ClipImage)));
            const auto space = parse_space(space_name);
            if (!space || *space == EmbeddingSpace::ClipText) {
                throw wire::WireError("space", "unsupported image space '" + space_name + "'");
            }
            const auto bytes = wire::decode_base64(body.at("image_png_b64").get<std::string>());
            Image image;
            try {
                image = decode_image(bytes);
            } catch (const ImageIoError& e) {
                throw wire::WireError("image_png_b64", e.what());
            }
            return wire::embedding_response(*space == EmbeddingSpace::Inception ? backend.embed_inception(image)
                                                                                : backend.embed_image(image));
        });
        post("/v1/embed/text", [this](const wire::json& body) {
            if (!body.contains("text") || !body.at("text").is_string()) {
                throw wire::WireError("text", "missing string field 'text'");
            }
            return wire::embedding_response(backend.embed_text(body.at("text").get<std::string>()));
        });
        server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            wire::json body;
            body["status"] = "ok";
            body["backend_id"] = backend.id();
            body["models"] = {{"diffusion", "mock-img2img"},
                              {"clip", "mock-clip-" + std::to_string(options.dims.clip)},
                              {"inception", "mock-inception-" + std::to_string(options.dims.inception)}};
            res.set_content(body.dump(), "application/json");
        });
        server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
            wire::json body;
            body["requests"] = requests.load();
            body["max_in_flight"] = max_in_flight.load();
            res.set_content(body.dump(), "application/json");
        });
    }
};

MockServer::MockServer(MockServerOptions options) : impl_(std::make_unique<Impl>(options)) {
    impl_->install_routes();
}

MockServer::~MockServer() {
    stop();
}

int MockServer::start(const std::string& host, int port) {
    impl_->host = host;
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) {
        throw ConfigError("mock server cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void MockServer::run(const std::string& host, int port) {
    impl_->host = host;
    impl_->port = port;
    if (!impl_->server.listen(host, port)) {
        throw ConfigError("mock server cannot listen on " + host + ":" + std::to_string(port));
    }
}

void MockServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

std::string MockServer::url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

ServerStats MockServer::stats() const {
    return {impl_->requests.load(), impl_->max_in_flight.load()};
}

} // namespace flameforge::backend
