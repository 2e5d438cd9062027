#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace deduce {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};

class RgbImage {
public:
    RgbImage() = default;
    RgbImage(std::size_t width, std::size_t height, Rgb fill = kWhite);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    Rgb at(std::size_t x, std::size_t y) const;
    void set(std::size_t x, std::size_t y, Rgb c);
    void fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, Rgb c);
    const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }

    bool operator==(const RgbImage&) const = default;

private:
    std::size_t width_ = 0, height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

using TextChunks = std::vector<std::pair<std::string, std::string>>;

/// 8-bit RGB PNG with optional tEXt chunks.
void write_png(const std::filesystem::path& path, const RgbImage& image, const TextChunks& text = {});

/// 8-bit grayscale PNG of values in [0,1] (rows = image rows).
void write_png_gray(const std::filesystem::path& path, const Eigen::MatrixXd& values,
                    const TextChunks& text = {});

/// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

/// Reads an 8-bit PNG (any colour type is converted to RGB) or a P6 PPM.
RgbImage read_image(const std::filesystem::path& path);

/// Blue-cyan-yellow-red ramp for v in [0,1].
Rgb jet(double v);

/// Blends a false-colour heatmap over `base`; the map is resampled to the
/// image size when the shapes differ.
RgbImage overlay_heatmap(const RgbImage& base, const Eigen::MatrixXd& heat, double alpha = 0.5);

/// Draws upper-cased text in a 5x7 bitmap font; each glyph advances 6*scale px.
void draw_text(RgbImage& image, std::size_t x, std::size_t y, std::string_view text, Rgb color,
               std::size_t scale = 1);

inline constexpr std::size_t kGlyphAdvance = 6;
inline constexpr std::size_t kGlyphHeight = 7;

} // namespace deduce
