#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace flameforge::fixture {

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("flameforge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Image random_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Image img(w, h);
    for (auto& b : img.data) {
        b = static_cast<std::uint8_t>(rng() & 0xff);
    }
    return img;
}

void write_style_dir(const fs::path& dir, int count, std::uint64_t seed) {
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        const int w = 96 + 40 * (i % 3);
        const int h = 80 + 24 * (i % 2);
        Image img = random_image(w, h, seed + static_cast<std::uint64_t>(i));
        // A smooth gradient under the noise so styles differ in colour.
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                auto* p = img.pixel(x, y);
                p[0] = static_cast<std::uint8_t>((p[0] / 4) + 150 * x / w);
                p[1] = static_cast<std::uint8_t>((p[1] / 4) + 120 * y / h);
                p[2] = static_cast<std::uint8_t>((p[2] / 4) + 40 * i);
            }
        }
        char name[32];
        std::snprintf(name, sizeof name, "style_%02d.png", i);
        write_png(dir / name, img);
    }
}

void write_annotated_dir(const fs::path& dir) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "labels");
    const std::array<Rgb, 3> flames{{{250, 120, 20}, {255, 200, 60}, {230, 60, 10}}};
    for (int i = 0; i < 3; ++i) {
        Image img(80, 60, {30, 60, 30});
        for (int y = 12; y < 36; ++y) {
            for (int x = 8; x < 40; ++x) {
                img.set(x, y, flames[static_cast<std::size_t>(i)]);
            }
        }
        for (int y = 30; y < 54; ++y) {
            for (int x = 50; x < 74; ++x) {
                img.set(x, y, {128, 128, 128});
            }
        }
        const std::string stem = "frame_" + std::to_string(i);
        write_png(dir / "images" / (stem + ".png"), img);
        std::ofstream labels(dir / "labels" / (stem + ".txt"));
        labels << "1 0.3 0.4 0.4 0.4\n";
        labels << "0 0.775 0.7 0.3 0.4\n";
    }
}

void write_real_dir(const fs::path& dir, int count, std::uint64_t seed) {
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "real_%03d.png", i);
        write_png(dir / name, random_image(64, 64, seed * 1000 + static_cast<std::uint64_t>(i)));
    }
}

std::string fixture_config(const fs::path& root, int count, int canvas) {
    std::ostringstream c;
    c << "style_dir = \"" << (root / "style").string() << "\"\n"
      << "palette_dir = \"" << (root / "dfire").string() << "\"\n"
      << "output_root = \"" << (root / "out").string() << "\"\n"
      << "canvas = { width = " << canvas << ", height = " << canvas << " }\n"
      << "\n[masks]\nmin_area_px = 64\n"
      << "\n[backend]\nurl = \"mock\"\nclip_dim = 64\ninception_dim = 16\n"
      << "\n[[arms]]\nname = \"baseline\"\nfamily = \"none\"\ncount = " << count << "\nbase_seed = 11\n"
      << "\n[[arms]]\nname = \"colored\"\nfamily = \"colored\"\ncount = " << count << "\nbase_seed = 12\n"
      << "\n[[arms]]\nname = \"perlin\"\nfamily = \"perlin\"\ncount = " << count << "\nbase_seed = 13\n";
    return c.str();
}

fs::path write_fixture_tree(const fs::path& root, int count, int canvas) {
    write_style_dir(root / "style", 4, 5);
    write_annotated_dir(root / "dfire");
    write_real_dir(root / "real", 8, 3);
    const fs::path config = root / "c.toml";
    std::ofstream(config) << fixture_config(root, count, canvas);
    return config;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> snapshot_tree(const fs::path& root) {
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            out.emplace_back(fs::relative(entry.path(), root).generic_string(), read_bytes(entry.path()));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

masks::FirePalette test_palette() {
    return {{{250, 120, 20}, {255, 200, 60}, {230, 60, 10}, {200, 80, 10}}, 4};
}

namespace {

std::uint64_t splitmix_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

ReferencePerlin::ReferencePerlin(std::uint64_t seed) : perm_(512) {
    std::vector<int> p(256);
    for (int i = 0; i < 256; ++i) {
        p[static_cast<std::size_t>(i)] = i;
    }
    std::uint64_t state = seed;
    for (int i = 255; i > 0; --i) {
        const auto j = splitmix_next(state) % static_cast<std::uint64_t>(i + 1);
        std::swap(p[static_cast<std::size_t>(i)], p[j]);
    }
    for (int i = 0; i < 512; ++i) {
        perm_[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i % 256)];
    }
}

double ReferencePerlin::operator()(double x, double y) const {
    static constexpr double gx[8] = {1, -1, 1, -1, 1, -1, 0, 0};
    static constexpr double gy[8] = {1, 1, -1, -1, 0, 0, 1, -1};
    const double x0 = std::floor(x);
    const double y0 = std::floor(y);
    const int X = static_cast<int>(((static_cast<long long>(x0) % 256) + 256) % 256);
    const int Y = static_cast<int>(((static_cast<long long>(y0) % 256) + 256) % 256);
    const double fx = x - x0;
    const double fy = y - y0;
    const auto hash = [&](int i, int j) { return perm_[static_cast<std::size_t>(perm_[static_cast<std::size_t>(X + i)] + Y + j)] % 8; };
    const auto dot = [&](int i, int j) {
        const int g = hash(i, j);
        return gx[g] * (fx - i) + gy[g] * (fy - j);
    };
    const auto s = [](double t) { return 6 * std::pow(t, 5) - 15 * std::pow(t, 4) + 10 * std::pow(t, 3); };
    const double u = s(fx);
    const double v = s(fy);
    const double bottom = dot(0, 0) * (1 - u) + dot(1, 0) * u;
    const double top = dot(0, 1) * (1 - u) + dot(1, 1) * u;
    return bottom * (1 - v) + top * v;
}

double marching_squares_perimeter(const Bitmap& b) {
    const auto at = [&](int x, int y) -> int {
        return (x >= 0 && y >= 0 && x < b.width && y < b.height && b.at(x, y)) ? 1 : 0;
    };
    // Cells between pixel centres; boundary segments join edge midpoints.
    double perimeter = 0.0;
    const double diag = std::sqrt(0.5);
    for (int y = -1; y < b.height; ++y) {
        for (int x = -1; x < b.width; ++x) {
            const int code = at(x, y) | (at(x + 1, y) << 1) | (at(x + 1, y + 1) << 2) | (at(x, y + 1) << 3);
            switch (code) {
            case 0:
            case 15:
                break;
            case 1: case 2: case 4: case 8:
            case 14: case 13: case 11: case 7:
                perimeter += diag;
                break;
            case 3: case 6: case 12: case 9:
                perimeter += 1.0;
                break;
            case 5: case 10:
                perimeter += 2.0 * diag;
                break;
            }
        }
    }
    return perimeter;
}

} // namespace flameforge::fixture
