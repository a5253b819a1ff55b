#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "flameforge/backend.hpp"

namespace flameforge::backend {

struct MockServerOptions {
    std::uint64_t seed = 0;
    EmbeddingDims dims;
    // Artificial per-request service time, to make concurrency observable.
    int delay_ms = 0;
};

struct ServerStats {
    std::uint64_t requests = 0;
    int max_in_flight = 0;
};

// Serves a MockBackend over the HTTP wire protocol, plus
//   GET /v1/health -> {status, backend_id, models}
//   GET /v1/stats  -> {requests, max_in_flight}
class MockServer {
public:
    explicit MockServer(MockServerOptions options = {});
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    // Binds and serves on a background thread. Port 0 picks a free port.
    // Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);

    // Binds and serves on the calling thread until stop() is called.
    void run(const std::string& host, int port);

    void stop();

    std::string url() const;
    ServerStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace flameforge::backend
