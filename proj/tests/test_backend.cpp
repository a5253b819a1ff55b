#include <atomic>
#include <cmath>
#include <thread>

#include <gtest/gtest.h>
#include "flameforge/backend.hpp"
#include "flameforge/error.hpp"
#include "flameforge/metrics.hpp"
#include "flameforge/mock_server.hpp"
#include "flameforge/wire.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace flameforge;
using namespace flameforge::backend;

namespace {

GenRequest sample_request(double strength = 0.5, std::uint64_t seed = 1) {
    GenRequest r;
    r.init_image = fixture::random_image(48, 32, 10);
    r.prompt = "wildfire";
    r.denoise_strength = strength;
    r.seed = seed;
    return r;
}

double mean_abs_diff(const Image& a, const Image& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        sum += std::abs(a.data[i] - b.data[i]);
    }
    return sum / static_cast<double>(a.data.size());
}

HttpOptions fast_options(const std::string& url) {
    HttpOptions o;
    o.base_url = url;
    o.timeout_s = 5.0;
    o.retry_backoff_ms = 5;
    return o;
}

} // namespace

TEST(MockBackend, GenerateIsDeterministic) {
    MockBackend mock(3);
    EXPECT_EQ(mock.generate(sample_request()).image, mock.generate(sample_request()).image);
    MockBackend other(3);
    EXPECT_EQ(other.generate(sample_request()).image, mock.generate(sample_request()).image);
}

TEST(MockBackend, RequestSeedAndMockSeedMatter) {
    MockBackend mock(3);
    EXPECT_NE(mock.generate(sample_request(0.5, 1)).image, mock.generate(sample_request(0.5, 2)).image);
    EXPECT_NE(MockBackend(4).generate(sample_request()).image, mock.generate(sample_request()).image);
}

TEST(MockBackend, SmallStrengthBarelyPerturbs) {
    MockBackend mock;
    const auto req = sample_request(0.01);
    const auto out = mock.generate(req);
    EXPECT_LE(mean_abs_diff(out.image, req.init_image), 2.0);
}

TEST(MockBackend, PerturbationGrowsWithStrength) {
    MockBackend mock;
    double prev = -1.0;
    for (double s : {0.01, 0.25, 0.5, 0.99}) {
        const auto req = sample_request(s);
        const double d = mean_abs_diff(mock.generate(req).image, req.init_image);
        EXPECT_GT(d, prev) << s;
        prev = d;
    }
}

TEST(MockBackend, BaselineStrengthAccepted) {
    MockBackend mock;
    const auto out = mock.generate(sample_request(0.99));
    EXPECT_EQ(out.image.width, 48);
    EXPECT_EQ(out.backend_id, "mock:0");
}

TEST(MockBackend, RequestValidation) {
    MockBackend mock;
    auto r = sample_request();
    r.denoise_strength = 0.0;
    EXPECT_THROW(mock.generate(r), std::invalid_argument);
    r.denoise_strength = 1.01;
    EXPECT_THROW(mock.generate(r), std::invalid_argument);
    r = sample_request();
    r.steps = 0;
    EXPECT_THROW(mock.generate(r), std::invalid_argument);
    r = sample_request();
    r.guidance_scale = -1;
    EXPECT_THROW(mock.generate(r), std::invalid_argument);
    r = sample_request();
    r.init_image = Image();
    EXPECT_THROW(mock.generate(r), std::invalid_argument);
}

TEST(MockBackend, EmbeddingsAreStableAndPixelSensitive) {
    MockBackend mock;
    const auto img = fixture::random_image(40, 40, 5);
    const auto a = mock.embed_image(img);
    EXPECT_EQ(a.values, mock.embed_image(img).values);
    auto tweaked = img;
    tweaked.data[0] ^= 1;
    EXPECT_NE(a.values, mock.embed_image(tweaked).values);
    EXPECT_NE(mock.embed_inception(img).values, mock.embed_inception(tweaked).values);
}

TEST(MockBackend, DimensionsAndSpaces) {
    MockBackend mock;
    const auto text = mock.embed_text("a photo of fire");
    EXPECT_EQ(text.dim(), 512u);
    EXPECT_EQ(text.space, EmbeddingSpace::ClipText);
    const auto img = fixture::random_image(16, 16, 1);
    EXPECT_EQ(mock.embed_image(img).dim(), 512u);
    EXPECT_EQ(mock.embed_image(img).space, EmbeddingSpace::ClipImage);
    EXPECT_EQ(mock.embed_inception(img).dim(), 2048u);
    EXPECT_EQ(mock.embed_inception(img).space, EmbeddingSpace::Inception);
    MockBackend small(0, {32, 8});
    EXPECT_EQ(small.embed_text("x").dim(), 32u);
    EXPECT_EQ(small.embed_inception(img).dim(), 8u);
}

TEST(MockBackend, TextEmbeddingDeterministic) {
    MockBackend a(9);
    MockBackend b(9);
    EXPECT_EQ(a.embed_text("a photo of fire").values, b.embed_text("a photo of fire").values);
    EXPECT_NE(a.embed_text("a photo of fire").values, a.embed_text("a photo of smoke").values);
}

TEST(MockBackend, WarmImagesLeanTowardsFirePrompt) {
    MockBackend mock;
    const auto fire = mock.embed_text("a photo of fire");
    const auto nonfire = mock.embed_text("a photo of a landscape with no fire");
    const auto flame = mock.embed_image(Image(32, 32, {250, 130, 20}));
    const auto forest = mock.embed_image(Image(32, 32, {40, 110, 50}));
    EXPECT_GT(metrics::clip_confidence(flame, fire, nonfire), 0.5);
    EXPECT_LT(metrics::clip_confidence(forest, fire, nonfire), 0.5);
}

TEST(Wire, Base64KnownVectors) {
    const auto enc = [](std::string s) {
        return wire::encode_base64({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foo"), "Zm9v");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
    for (std::size_t n = 0; n < 40; ++n) {
        std::vector<std::uint8_t> bytes(n);
        for (std::size_t i = 0; i < n; ++i) {
            bytes[i] = static_cast<std::uint8_t>(i * 37 + 11);
        }
        EXPECT_EQ(wire::decode_base64(wire::encode_base64(bytes)), bytes) << n;
    }
    EXPECT_THROW(wire::decode_base64("abc"), std::exception);
}

TEST(Wire, GenerateRequestRoundTrip) {
    auto req = sample_request(0.75, 123456789012345ULL);
    req.negative_prompt = "blurry";
    req.guidance_scale = 7.5;
    req.steps = 20;
    const auto body = wire::generate_request(req);
    const auto keys = std::vector<std::string>{"init_png_b64", "prompt", "negative_prompt", "strength",
                                               "guidance",     "steps",  "seed"};
    std::vector<std::string> got;
    for (const auto& [k, v] : body.items()) {
        got.push_back(k);
    }
    EXPECT_EQ(got, keys);
    const auto back = wire::parse_generate_request(wire::json::parse(body.dump()));
    EXPECT_EQ(back.init_image, req.init_image);
    EXPECT_EQ(back.prompt, req.prompt);
    EXPECT_EQ(back.negative_prompt, req.negative_prompt);
    EXPECT_EQ(back.denoise_strength, req.denoise_strength);
    EXPECT_EQ(back.guidance_scale, req.guidance_scale);
    EXPECT_EQ(back.steps, req.steps);
    EXPECT_EQ(back.seed, req.seed);
}

TEST(Wire, MalformedRequestsNameTheField) {
    auto body = wire::generate_request(sample_request());
    const auto field_of = [](const wire::json& b) -> std::string {
        try {
            wire::parse_generate_request(b);
        } catch (const wire::WireError& e) {
            return e.field();
        }
        return "";
    };
    auto b = body;
    b.erase("prompt");
    EXPECT_EQ(field_of(b), "prompt");
    b = body;
    b["strength"] = 0.0;
    EXPECT_EQ(field_of(b), "strength");
    b = body;
    b["steps"] = "many";
    EXPECT_EQ(field_of(b), "steps");
    b = body;
    b["init_png_b64"] = "!!!!";
    EXPECT_EQ(field_of(b), "init_png_b64");
}

TEST(Wire, EmbeddingResponseRoundTrip) {
    EmbeddingVector v{EmbeddingSpace::Inception, {0.25f, -1.5f, 3.0e-7f, 12345.678f}};
    const auto body = wire::embedding_response(v);
    EXPECT_EQ(body.at("dim"), 4);
    const auto back = wire::parse_embedding_response(wire::json::parse(body.dump()), EmbeddingSpace::Inception);
    EXPECT_EQ(back.values, v.values);
    auto bad = body;
    bad["dim"] = 5;
    EXPECT_THROW(wire::parse_embedding_response(bad, EmbeddingSpace::Inception), wire::WireError);
}

TEST(MakeBackend, SelectsImplementation) {
    EXPECT_EQ(make_backend("mock")->id(), "mock:0");
    EXPECT_EQ(make_backend("mock:17")->id(), "mock:17");
    EXPECT_THROW(make_backend("mock:x"), ConfigError);
    EXPECT_EQ(make_backend("http://127.0.0.1:9")->id(), "http:http://127.0.0.1:9");
}

TEST(HttpBackend, MatchesInProcessMock) {
    MockServer server({7, {64, 32}, 0});
    server.start();
    HttpBackend http(fast_options(server.url()));
    MockBackend local(7, {64, 32});

    const auto req = sample_request(0.6, 99);
    const auto remote = http.generate(req);
    EXPECT_EQ(remote.image, local.generate(req).image);
    EXPECT_EQ(remote.backend_id, "mock:7");
    EXPECT_GE(remote.latency_ms, 0.0);

    const auto img = fixture::random_image(30, 20, 4);
    EXPECT_EQ(http.embed_image(img).values, local.embed_image(img).values);
    EXPECT_EQ(http.embed_inception(img).values, local.embed_inception(img).values);
    EXPECT_EQ(http.embed_text("a photo of fire").values, local.embed_text("a photo of fire").values);
    EXPECT_EQ(server.stats().requests, 4u);
}

TEST(HttpBackend, HealthAndStatsEndpoints) {
    MockServer server;
    const int port = server.start();
    httplib::Client client("127.0.0.1", port);
    const auto health = client.Get("/v1/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(wire::json::parse(health->body).at("status"), "ok");
    const auto stats = client.Get("/v1/stats");
    ASSERT_TRUE(stats);
    const auto body = wire::json::parse(stats->body);
    EXPECT_TRUE(body.contains("requests"));
    EXPECT_TRUE(body.contains("max_in_flight"));
}

TEST(HttpBackend, BadRequestIsReportedWithField) {
    MockServer server;
    const int port = server.start();
    httplib::Client client("127.0.0.1", port);
    auto body = wire::generate_request(sample_request());
    body["strength"] = 2.0;
    const auto res = client.Post("/v1/generate", body.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    const auto err = wire::json::parse(res->body);
    EXPECT_EQ(err.at("field"), "strength");
    EXPECT_TRUE(err.at("error").is_string());

    const auto junk = client.Post("/v1/embed/text", "{not json", "application/json");
    ASSERT_TRUE(junk);
    EXPECT_EQ(junk->status, 400);
}

TEST(HttpBackend, ServerErrorsAreNotRetried) {
    httplib::Server fake;
    std::atomic<int> hits{0};
    fake.Post("/v1/embed/text", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
        res.set_content(R"({"error":"text is required","field":"text"})", "application/json");
    });
    const int port = fake.bind_to_any_port("127.0.0.1");
    std::thread t([&] { fake.listen_after_bind(); });
    fake.wait_until_ready();

    HttpBackend http(fast_options("http://127.0.0.1:" + std::to_string(port)));
    try {
        http.embed_text("x");
        ADD_FAILURE() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_FALSE(e.retryable());
        EXPECT_NE(std::string(e.what()).find("text is required"), std::string::npos);
    }
    EXPECT_EQ(hits.load(), 1);
    fake.stop();
    t.join();
}

TEST(HttpBackend, OverloadIsRetried) {
    MockBackend mock;
    httplib::Server fake;
    std::atomic<int> hits{0};
    fake.Post("/v1/embed/text", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits++ < 2) {
            res.status = 503;
            res.set_content(R"({"error":"busy"})", "application/json");
            return;
        }
        const auto text = wire::json::parse(req.body).at("text").get<std::string>();
        res.set_content(wire::embedding_response(mock.embed_text(text)).dump(), "application/json");
    });
    const int port = fake.bind_to_any_port("127.0.0.1");
    std::thread t([&] { fake.listen_after_bind(); });
    fake.wait_until_ready();
    const std::string url = "http://127.0.0.1:" + std::to_string(port);

    auto options = fast_options(url);
    options.max_retries = 2;
    EXPECT_EQ(HttpBackend(options).embed_text("fire").values, mock.embed_text("fire").values);
    EXPECT_EQ(hits.load(), 3);

    hits = 0;
    options.max_retries = 1;
    try {
        HttpBackend(options).embed_text("fire");
        ADD_FAILURE() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_TRUE(e.retryable());
    }
    EXPECT_EQ(hits.load(), 2);
    fake.stop();
    t.join();
}

TEST(HttpBackend, UnreachableServerFails) {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    auto options = fast_options("http://127.0.0.1:" + std::to_string(port));
    options.max_retries = 1;
    options.timeout_s = 1.0;
    HttpBackend http(options);
    EXPECT_THROW(http.embed_text("x"), BackendError);
}

TEST(HttpBackend, DimensionMismatchIsRejected) {
    MockServer server({0, {64, 32}, 0});
    server.start();
    auto options = fast_options(server.url());
    options.expected_dims = {128, 32};
    HttpBackend http(options);
    EXPECT_THROW(http.embed_text("x"), BackendError);
    EXPECT_NO_THROW(http.embed_inception(Image(8, 8)));
}

TEST(MockServer, TracksConcurrentRequests) {
    MockServer server({0, {16, 8}, 40});
    server.start();
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&] {
            HttpBackend http(fast_options(server.url()));
            http.embed_text("x");
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    const auto stats = server.stats();
    EXPECT_EQ(stats.requests, 4u);
    EXPECT_GE(stats.max_in_flight, 2);
    EXPECT_LE(stats.max_in_flight, 4);
}
