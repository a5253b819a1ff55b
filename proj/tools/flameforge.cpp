#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flameforge/backend.hpp"
#include "flameforge/config.hpp"
#include "flameforge/error.hpp"
#include "flameforge/maskgen.hpp"
#include "flameforge/mock_server.hpp"
#include "flameforge/pipeline.hpp"

namespace fs = std::filesystem;
using namespace flameforge;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kBackend = 3, kMissingInput = 4 };

struct RunOptions {
    std::string config;
    std::vector<std::string> arms;
    std::string backend_url;
    std::optional<std::uint64_t> seed;
    std::optional<int> count;
    std::string out;
    std::string real;
};

pipeline::ExperimentConfig load(const RunOptions& o) {
    auto config = pipeline::load_config(o.config);
    if (!o.backend_url.empty()) {
        config.backend.url = o.backend_url;
    }
    if (!o.out.empty()) {
        config.output_root = o.out;
    }
    for (auto& arm : config.arms) {
        if (o.seed) {
            arm.base_seed = *o.seed;
        }
        if (o.count) {
            arm.count = *o.count;
        }
    }
    config.validate();
    for (const auto& name : o.arms) {
        config.arm(name);
    }
    return config;
}

std::unique_ptr<backend::Backend> connect(const pipeline::ExperimentConfig& config) {
    backend::HttpOptions http;
    http.base_url = config.backend.url;
    http.timeout_s = config.backend.timeout_s;
    http.max_retries = config.backend.max_retries;
    http.expected_dims = config.backend.dims;
    return backend::make_backend(config.backend.url, http, config.backend.dims);
}

int cmd_generate(const RunOptions& o) {
    const auto config = load(o);
    auto backend = connect(config);
    for (const auto& arm : config.arms) {
        if (!o.arms.empty() && std::find(o.arms.begin(), o.arms.end(), arm.name) == o.arms.end()) {
            continue;
        }
        const auto summary = pipeline::run_generate(config, arm, *backend);
        std::cout << arm.name << ": wrote " << summary.written << "/" << summary.requested << " items to "
                  << summary.manifest.string() << '\n';
    }
    return kOk;
}

int cmd_evaluate(const RunOptions& o) {
    const auto config = load(o);
    auto backend = connect(config);
    const auto reports = pipeline::run_metrics(config, o.real, o.arms, *backend);
    std::cout << metrics::reports_to_csv(reports);
    std::cout << "report: " << pipeline::report_path(config).string() << '\n';
    return kOk;
}

int cmd_report(const RunOptions& o, const std::string& csv_out) {
    const auto config = load(o);
    const auto csv = metrics::reports_to_csv(pipeline::collect_reports(config, o.arms));
    if (csv_out.empty()) {
        std::cout << csv;
        return kOk;
    }
    std::ofstream out(csv_out, std::ios::trunc);
    out << csv;
    if (!out) {
        throw ConfigError("cannot write " + csv_out);
    }
    return kOk;
}

int cmd_palette(const std::string& from, const std::string& out, const masks::PaletteOptions& options) {
    if (!fs::is_directory(from)) {
        throw ConfigError("annotation directory not found: " + from);
    }
    const auto palette = masks::build_palette(from, options);
    masks::save_palette(out, palette);
    std::cout << "palette: " << palette.colors.size() << " colours from " << palette.source_count << " boxes -> "
              << out << '\n';
    return kOk;
}

int cmd_mock_serve(const std::string& host, int port, const backend::MockServerOptions& options) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    backend::MockServer server(options);
    server.start(host, port);
    std::cout << "listening on " << server.url() << std::endl;
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    const auto stats = server.stats();
    std::cout << "served " << stats.requests << " requests, max in flight " << stats.max_in_flight << '\n';
    return kOk;
}

void add_run_options(CLI::App& cmd, RunOptions& o, bool generation) {
    cmd.add_option("--config", o.config, "Experiment TOML file")->required()->check(CLI::ExistingFile);
    cmd.add_option("--arm", o.arms, "Restrict to these arms (repeatable)");
    cmd.add_option("--out", o.out, "Override output_root");
    if (generation) {
        cmd.add_option("--backend-url", o.backend_url, "Backend base URL, or mock[:seed]");
        cmd.add_option("--seed", o.seed, "Override every arm's base_seed");
        cmd.add_option("--count", o.count, "Override every arm's item count")->check(CLI::PositiveNumber);
    }
}

} // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("flameforge"));
    spdlog::set_pattern("%^%l%$: %v");

    CLI::App app{"Mask-guided synthetic wildfire images and their evaluation"};
    app.require_subcommand(1);
    std::string level = "warn";
    app.add_option("--log-level", level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    RunOptions gen;
    auto* generate = app.add_subcommand("generate", "Generate images, masks and labels for configured arms");
    add_run_options(*generate, gen, true);

    RunOptions eval;
    auto* evaluate = app.add_subcommand("evaluate", "Score generated arms against a real image set");
    add_run_options(*evaluate, eval, false);
    evaluate->add_option("--backend-url", eval.backend_url, "Backend base URL, or mock[:seed]");
    evaluate->add_option("--real", eval.real, "Directory of real images")->required();

    RunOptions rep;
    std::string csv_out;
    auto* report = app.add_subcommand("report", "Print the metrics table of evaluated arms as CSV");
    report->add_option("--config", rep.config, "Experiment TOML file")->required()->check(CLI::ExistingFile);
    report->add_option("--arm", rep.arms, "Restrict to these arms (repeatable)");
    report->add_option("--out", csv_out, "Write the CSV here instead of stdout");

    auto* palette = app.add_subcommand("palette", "Fire colour palette tools");
    palette->require_subcommand(1);
    auto* palette_build = palette->add_subcommand("build", "Sample fire colours from YOLO-annotated images");
    std::string palette_from;
    std::string palette_out;
    masks::PaletteOptions palette_options;
    palette_build->add_option("--from", palette_from, "Annotated image directory")->required();
    palette_build->add_option("--out", palette_out, "Output palette JSON")->required();
    palette_build->add_option("--fire-class", palette_options.fire_class, "YOLO class id of fire boxes");
    palette_build->add_option("--max-pixels", palette_options.max_pixels, "Reservoir size")
        ->check(CLI::PositiveNumber);
    palette_build->add_option("--seed", palette_options.seed, "Sampling seed");

    auto* serve = app.add_subcommand("mock-serve", "Serve the mock backend over the HTTP wire protocol");
    std::string host = "127.0.0.1";
    int port = 8765;
    backend::MockServerOptions serve_options;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--seed", serve_options.seed, "Mock seed");
    serve->add_option("--delay-ms", serve_options.delay_ms, "Artificial service time per request")
        ->check(CLI::NonNegativeNumber);
    serve->add_option("--clip-dim", serve_options.dims.clip, "CLIP embedding size")->check(CLI::PositiveNumber);
    serve->add_option("--inception-dim", serve_options.dims.inception, "Inception embedding size")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    }
    spdlog::set_level(spdlog::level::from_str(level));

    try {
        if (*generate) {
            return cmd_generate(gen);
        }
        if (*evaluate) {
            return cmd_evaluate(eval);
        }
        if (*report) {
            return cmd_report(rep, csv_out);
        }
        if (*palette_build) {
            return cmd_palette(palette_from, palette_out, palette_options);
        }
        if (*serve) {
            return cmd_mock_serve(host, port, serve_options);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const GenerationFailed& e) {
        std::cerr << "generation failed: " << e.what() << '\n';
        return kBackend;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return kBackend;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << '\n';
        return kMissingInput;
    } catch (const ImageIoError& e) {
        std::cerr << "image error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
