#include "deduce/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <png.h>

#include "deduce/attention.hpp"
#include "deduce/error.hpp"

namespace deduce {

RgbImage::RgbImage(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height), pixels_(width * height * 3) {
    for (std::size_t i = 0; i < width * height; ++i) {
        pixels_[3 * i] = fill.r;
        pixels_[3 * i + 1] = fill.g;
        pixels_[3 * i + 2] = fill.b;
    }
}

Rgb RgbImage::at(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (y * width_ + x);
    return {pixels_.at(i), pixels_.at(i + 1), pixels_.at(i + 2)};
}

void RgbImage::set(std::size_t x, std::size_t y, Rgb c) {
    if (x >= width_ || y >= height_) {
        return;
    }
    const std::size_t i = 3 * (y * width_ + x);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
}

void RgbImage::fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, Rgb c) {
    for (std::size_t yy = y; yy < std::min(y + h, height_); ++yy) {
        for (std::size_t xx = x; xx < std::min(x + w, width_); ++xx) {
            set(xx, yy, c);
        }
    }
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Only trivially destructible locals here: libpng reports errors by longjmp.
bool encode_png(std::FILE* fp, png_uint_32 width, png_uint_32 height, int color_type,
                png_bytep* rows, png_text* text, int n_text) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (n_text > 0) {
        png_set_text(png, info, text, n_text);
    }
    png_write_info(png, info);
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

void write_png_rows(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    int color_type, const std::vector<std::uint8_t>& data, std::size_t channels,
                    const TextChunks& text) {
    if (width == 0 || height == 0) {
        throw DataError("cannot write an empty image to '" + path.string() + "'");
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw DataError("cannot write image '" + path.string() + "'");
    }
    std::vector<png_text> chunks(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
        chunks[i].key = const_cast<char*>(text[i].first.c_str());
        chunks[i].text = const_cast<char*>(text[i].second.c_str());
        chunks[i].text_length = text[i].second.size();
    }
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(data.data() + y * width * channels);
    }
    if (!encode_png(fp.get(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                    color_type, rows.data(), chunks.data(), static_cast<int>(chunks.size()))) {
        throw DataError("libpng failed while writing '" + path.string() + "'");
    }
}

RgbImage read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw DataError("cannot decode PNG '" + path.string() + "': " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
    }
    RgbImage img(image.width, image.height);
    for (std::size_t i = 0; i < static_cast<std::size_t>(image.width) * image.height; ++i) {
        img.set(i % image.width, i / image.width,
                Rgb{buffer[3 * i], buffer[3 * i + 1], buffer[3 * i + 2]});
    }
    return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || magic != "P6" || maxval != 255 || w == 0 || h == 0) {
        throw DataError("'" + path.string() + "' is not an 8-bit P6 PPM");
    }
    in.get();
    std::vector<char> raw(w * h * 3);
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
        throw DataError("truncated PPM '" + path.string() + "'");
    }
    RgbImage img(w, h);
    for (std::size_t i = 0; i < w * h; ++i) {
        img.set(i % w, i / w,
                Rgb{static_cast<std::uint8_t>(raw[3 * i]), static_cast<std::uint8_t>(raw[3 * i + 1]),
                    static_cast<std::uint8_t>(raw[3 * i + 2])});
    }
    return img;
}

// 5x7 glyph rows, most significant of the low five bits is the leftmost pixel.
using Glyph = std::array<std::uint8_t, 7>;

const Glyph& glyph(char ch) {
    static const Glyph kLetters[26] = {
        {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
        {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
        {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
        {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
        {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
        {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
        {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
        {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
        {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},
    };
    static const Glyph kDigits[10] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
    };
    static const Glyph kUnderscore = {0, 0, 0, 0, 0, 0, 0x1F};
    static const Glyph kDash = {0, 0, 0, 0x1F, 0, 0, 0};
    static const Glyph kBlank = {0, 0, 0, 0, 0, 0, 0};
    static const Glyph kBox = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalpha(u)) {
        return kLetters[std::toupper(u) - 'A'];
    }
    if (std::isdigit(u)) {
        return kDigits[u - '0'];
    }
    switch (ch) {
    case '_': return kUnderscore;
    case '-': return kDash;
    case ' ': return kBlank;
    default: return kBox;
    }
}

} // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image, const TextChunks& text) {
    write_png_rows(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, image.bytes(), 3, text);
}

void write_png_gray(const std::filesystem::path& path, const Eigen::MatrixXd& values,
                    const TextChunks& text) {
    const auto h = static_cast<std::size_t>(values.rows());
    const auto w = static_cast<std::size_t>(values.cols());
    std::vector<std::uint8_t> data(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double v = std::clamp(values(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)), 0.0, 1.0);
            data[y * w + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    write_png_rows(path, w, h, PNG_COLOR_TYPE_GRAY, data, 1, text);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write image '" + path.string() + "'");
    }
    out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.bytes().data()),
              static_cast<std::streamsize>(image.bytes().size()));
}

RgbImage read_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
        throw DataError("cannot open image '" + path.string() + "'");
    }
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    if (magic[0] == 'P' && magic[1] == '6') {
        return read_ppm(path);
    }
    return read_png(path);
}

Rgb jet(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto channel = [](double x) {
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(1.5 - std::abs(x), 0.0, 1.0)));
    };
    return {channel(4.0 * v - 3.0), channel(4.0 * v - 2.0), channel(4.0 * v - 1.0)};
}

RgbImage overlay_heatmap(const RgbImage& base, const Eigen::MatrixXd& heat, double alpha) {
    Eigen::MatrixXd map = heat;
    if (static_cast<std::size_t>(map.rows()) != base.height() ||
        static_cast<std::size_t>(map.cols()) != base.width()) {
        map = upsample_bilinear(heat, base.height(), base.width());
    }
    RgbImage out = base;
    for (std::size_t y = 0; y < base.height(); ++y) {
        for (std::size_t x = 0; x < base.width(); ++x) {
            const Rgb h = jet(map(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)));
            const Rgb b = base.at(x, y);
            auto mix = [alpha](std::uint8_t a, std::uint8_t c) {
                return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * a + alpha * c));
            };
            out.set(x, y, Rgb{mix(b.r, h.r), mix(b.g, h.g), mix(b.b, h.b)});
        }
    }
    return out;
}

void draw_text(RgbImage& image, std::size_t x, std::size_t y, std::string_view text, Rgb color,
               std::size_t scale) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const Glyph& g = glyph(text[i]);
        const std::size_t gx = x + i * kGlyphAdvance * scale;
        for (std::size_t row = 0; row < kGlyphHeight; ++row) {
            for (std::size_t col = 0; col < 5; ++col) {
                if (g[row] & (0x10 >> col)) {
                    image.fill_rect(gx + col * scale, y + row * scale, scale, scale, color);
                }
            }
        }
    }
}

} // namespace deduce
