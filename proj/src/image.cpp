#include "flameforge/image.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace flameforge {
namespace fs = std::filesystem;

namespace {

cv::Mat to_bgr(const Image& image) {
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

Image from_mat(const cv::Mat& mat) {
    cv::Mat rgb;
    switch (mat.channels()) {
    case 1: cv::cvtColor(mat, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(mat, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(mat, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw ImageIoError("unsupported channel count " + std::to_string(mat.channels()));
    }
    if (rgb.depth() != CV_8U) {
        throw ImageIoError("only 8-bit images are supported");
    }
    Image out(rgb.cols, rgb.rows);
    for (int y = 0; y < rgb.rows; ++y) {
        std::copy_n(rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3, out.pixel(0, y));
    }
    return out;
}

const std::vector<int> kPngParams = {cv::IMWRITE_PNG_COMPRESSION, 6};

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ImageIoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw ImageIoError("short write to " + path.string());
    }
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageIoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
    if (w < 0 || h < 0) {
        throw std::invalid_argument("negative image dimensions");
    }
    data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = fill[0];
        data[i + 1] = fill[1];
        data[i + 2] = fill[2];
    }
}

std::size_t Bitmap::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

Components label_components(const Bitmap& occupancy) {
    Components out;
    const int w = occupancy.width;
    const int h = occupancy.height;
    out.labels.assign(static_cast<std::size_t>(w) * h, 0);
    std::vector<int> stack;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!occupancy.bits[idx] || out.labels[idx] != 0) {
                continue;
            }
            const auto label = static_cast<std::int32_t>(out.boxes.size() + 1);
            PixelBox box{x, y, x + 1, y + 1};
            std::size_t area = 0;
            out.labels[idx] = label;
            stack.push_back(static_cast<int>(idx));
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cx = cur % w;
                const int cy = cur / w;
                ++area;
                box.x0 = std::min(box.x0, cx);
                box.y0 = std::min(box.y0, cy);
                box.x1 = std::max(box.x1, cx + 1);
                box.y1 = std::max(box.y1, cy + 1);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                            continue;
                        }
                        const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                        if (occupancy.bits[n] && out.labels[n] == 0) {
                            out.labels[n] = label;
                            stack.push_back(static_cast<int>(n));
                        }
                    }
                }
            }
            out.boxes.push_back(box);
            out.areas.push_back(area);
        }
    }
    return out;
}

Image crop(const Image& image, const PixelBox& box) {
    if (box.x0 < 0 || box.y0 < 0 || box.x1 > image.width || box.y1 > image.height || box.width() <= 0 ||
        box.height() <= 0) {
        throw std::invalid_argument("crop box outside image");
    }
    Image out(box.width(), box.height());
    for (int y = 0; y < out.height; ++y) {
        std::copy_n(image.pixel(box.x0, box.y0 + y), static_cast<std::size_t>(out.width) * 3, out.pixel(0, y));
    }
    return out;
}

bool is_image_file(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw ImageIoError("not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return out;
}

Image decode_image(std::span<const std::uint8_t> encoded) {
    if (encoded.empty()) {
        throw ImageIoError("empty image payload");
    }
    const cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8UC1, const_cast<std::uint8_t*>(encoded.data()));
    const cv::Mat mat = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw ImageIoError("undecodable image payload");
    }
    return from_mat(mat);
}

Image read_image(const fs::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const ImageIoError& e) {
        throw ImageIoError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.empty()) {
        throw ImageIoError("cannot encode an empty image");
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", to_bgr(image), out, kPngParams)) {
        throw ImageIoError("png encoding failed");
    }
    return out;
}

void write_png(const fs::path& path, const Image& image) {
    write_bytes(path, encode_png(image));
}

void write_bitmap_png(const fs::path& path, const Bitmap& bitmap) {
    cv::Mat gray(bitmap.height, bitmap.width, CV_8UC1);
    for (int y = 0; y < bitmap.height; ++y) {
        auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < bitmap.width; ++x) {
            row[x] = bitmap.at(x, y) ? 255 : 0;
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", gray, out, kPngParams)) {
        throw ImageIoError("png encoding failed");
    }
    write_bytes(path, out);
}

Bitmap read_bitmap_png(const fs::path& path) {
    const auto bytes = read_bytes(path);
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    const cv::Mat gray = cv::imdecode(buf, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) {
        throw ImageIoError("undecodable mask " + path.string());
    }
    Bitmap out(gray.cols, gray.rows);
    for (int y = 0; y < gray.rows; ++y) {
        const auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < gray.cols; ++x) {
            out.set(x, y, row[x] >= 128);
        }
    }
    return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("resize target must be non-empty");
    }
    if (image.width == width && image.height == height) {
        return image;
    }
    cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        std::copy_n(dst.ptr<std::uint8_t>(y), static_cast<std::size_t>(width) * 3, out.pixel(0, y));
    }
    return out;
}

} // namespace flameforge
