#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deduce/fusion.hpp"
#include "deduce/image.hpp"
#include "deduce/types.hpp"

namespace deduce {

inline constexpr double kDefaultResolution = 0.1;  // metres per cell
inline constexpr double kDefaultStampRadius = 0.5; // metres
inline constexpr std::size_t kDefaultSmoothingWindow = 5;

/// Sliding-window majority vote (window truncated at the ends). Ties go to
/// the centre frame's label when it is among the leaders, else to the lowest
/// label id. Throws DataError on an empty sequence or an even window.
std::vector<std::size_t> smooth_sequence(std::span<const std::size_t> labels, std::size_t window);

struct GridCell {
    std::optional<std::size_t> label; ///< empty = Unknown
    double confidence = 0;            ///< majority count / visit count
    std::size_t visit_count = 0;
};

/// Label-vote grid over world coordinates. Cell (i, j) covers
/// [i*res, (i+1)*res) x [j*res, (j+1)*res); the grid grows to cover every
/// stamp, so the origin moves in whole cells.
class SemanticGrid {
public:
    SemanticGrid(ClassSet classes, double resolution);

    /// Pre-sizes the grid to cover the given world rectangle.
    void reserve(double x_min, double y_min, double x_max, double y_max);

    /// One vote for `label` in every cell whose centre lies within `radius`
    /// of the centre of the cell containing (x, y).
    void stamp(double x, double y, std::size_t label, double radius);

    const ClassSet& classes() const noexcept { return classes_; }
    double resolution() const noexcept { return resolution_; }
    double origin_x() const noexcept { return static_cast<double>(min_ix_) * resolution_; }
    double origin_y() const noexcept { return static_cast<double>(min_iy_) * resolution_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    /// Local indices, column from the origin to the right, row upwards.
    GridCell cell(std::size_t col, std::size_t row) const;
    /// Cell containing the world point, if inside the grid.
    std::optional<GridCell> cell_at(double x, double y) const;
    std::size_t votes(std::size_t col, std::size_t row, std::size_t label) const;

    /// Global index of the cell containing a world coordinate.
    long index_of(double coord) const;

private:
    void grow_to(long ix_lo, long iy_lo, long ix_hi, long iy_hi);

    ClassSet classes_;
    double resolution_;
    long min_ix_ = 0, min_iy_ = 0;
    std::size_t width_ = 0, height_ = 0;
    std::vector<std::size_t> counts_; ///< [row][col][label]
};

struct PosedLabel {
    Pose pose;
    std::size_t label = 0;
};

/// Throws DataError when `stamps` is empty or resolution <= 0.
SemanticGrid rasterize(const ClassSet& classes, std::span<const PosedLabel> stamps,
                       double resolution = kDefaultResolution,
                       double radius = kDefaultStampRadius);

struct MapConfig {
    double resolution = kDefaultResolution;
    double radius = kDefaultStampRadius;
    std::size_t window = kDefaultSmoothingWindow;
};

/// Orders posed frames by time, smooths their predicted labels and
/// rasterizes them. Frames without pose are skipped; throws DataError if
/// none has one.
SemanticGrid build_semantic_map(const ClassSet& classes, std::span<const FrameRecord> frames,
                                std::span<const Prediction> predictions, const MapConfig& cfg = {});

using Palette = std::map<std::string, Rgb>;

/// Fixed colours for the built-in scene names; other names take colours
/// from a fallback list in class-set order. Never white.
Palette default_palette(const ClassSet& classes);

struct RenderedMap {
    RgbImage image;
    std::vector<std::pair<std::string, Rgb>> legend; ///< class-set order, then "unknown"
    std::size_t map_height_px = 0;                   ///< rows above the legend strip
};

/// One cell_px block per cell (north up), Unknown in white, legend strip
/// below when `with_legend`. Throws DataError on a missing palette entry or
/// non-distinct colours.
RenderedMap render(const SemanticGrid& grid, const Palette& palette, std::size_t cell_px = 4,
                   bool with_legend = true);

} // namespace deduce
