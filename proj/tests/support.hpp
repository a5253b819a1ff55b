#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flameforge/image.hpp"
#include "flameforge/maskgen.hpp"

namespace flameforge::fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

Image random_image(int w, int h, std::uint64_t seed);

// `count` textured PNG stand-ins for style photos, in assorted sizes.
void write_style_dir(const std::filesystem::path& dir, int count, std::uint64_t seed);

// A small images/ + labels/ tree whose class-1 boxes cover flame-coloured
// patches and whose class-0 boxes cover grey smoke.
void write_annotated_dir(const std::filesystem::path& dir);

// `count` random images for use as a real set.
void write_real_dir(const std::filesystem::path& dir, int count, std::uint64_t seed);

// A minimal experiment config (TOML) pointing at the fixture directories.
std::string fixture_config(const std::filesystem::path& root, int count, int canvas = 128);

// Sets up style/, dfire/, real/ and c.toml under `root`; returns the config path.
std::filesystem::path write_fixture_tree(const std::filesystem::path& root, int count, int canvas = 128);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

// Every regular file under `root` keyed by relative path, with its bytes.
std::vector<std::pair<std::string, std::vector<std::uint8_t>>> snapshot_tree(const std::filesystem::path& root);

masks::FirePalette test_palette();

// Textbook 2D Perlin noise written directly from the table convention, used
// as an oracle for the library implementation.
class ReferencePerlin {
public:
    explicit ReferencePerlin(std::uint64_t seed);
    double operator()(double x, double y) const;

private:
    std::vector<int> perm_;
};

// Shoelace-free perimeter estimate of a raster shape by marching squares
// over the 0/1 occupancy, in pixels.
double marching_squares_perimeter(const Bitmap& bitmap);

} // namespace flameforge::fixture
