#include "deduce/semmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "deduce/error.hpp"

namespace deduce {

std::vector<std::size_t> smooth_sequence(std::span<const std::size_t> labels, std::size_t window) {
    if (labels.empty()) {
        throw DataError("cannot smooth an empty label sequence");
    }
    if (window == 0 || window % 2 == 0) {
        throw DataError("smoothing window must be a positive odd number");
    }
    const std::size_t half = window / 2;
    const std::size_t n = labels.size();
    std::vector<std::size_t> out(n);
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) {
        counts.clear();
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        for (std::size_t j = lo; j <= hi; ++j) {
            ++counts[labels[j]];
        }
        std::size_t best_count = 0;
        for (const auto& [label, c] : counts) {
            best_count = std::max(best_count, c);
        }
        if (counts[labels[i]] == best_count) {
            out[i] = labels[i];
            continue;
        }
        // std::map iterates in ascending label order.
        for (const auto& [label, c] : counts) {
            if (c == best_count) {
                out[i] = label;
                break;
            }
        }
    }
    return out;
}

SemanticGrid::SemanticGrid(ClassSet classes, double resolution)
    : classes_(std::move(classes)), resolution_(resolution) {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw DataError("grid resolution must be positive");
    }
}

long SemanticGrid::index_of(double coord) const {
    return static_cast<long>(std::floor(coord / resolution_));
}

void SemanticGrid::reserve(double x_min, double y_min, double x_max, double y_max) {
    grow_to(index_of(x_min), index_of(y_min), index_of(x_max), index_of(y_max));
}

void SemanticGrid::grow_to(long ix_lo, long iy_lo, long ix_hi, long iy_hi) {
    if (!empty()) {
        ix_lo = std::min(ix_lo, min_ix_);
        iy_lo = std::min(iy_lo, min_iy_);
        ix_hi = std::max(ix_hi, min_ix_ + static_cast<long>(width_) - 1);
        iy_hi = std::max(iy_hi, min_iy_ + static_cast<long>(height_) - 1);
        if (ix_lo == min_ix_ && iy_lo == min_iy_ &&
            ix_hi == min_ix_ + static_cast<long>(width_) - 1 &&
            iy_hi == min_iy_ + static_cast<long>(height_) - 1) {
            return;
        }
    }
    const auto new_w = static_cast<std::size_t>(ix_hi - ix_lo + 1);
    const auto new_h = static_cast<std::size_t>(iy_hi - iy_lo + 1);
    const std::size_t k = classes_.size();
    std::vector<std::size_t> grown(new_w * new_h * k, 0);
    for (std::size_t row = 0; row < height_; ++row) {
        for (std::size_t col = 0; col < width_; ++col) {
            const auto nc = static_cast<std::size_t>(min_ix_ - ix_lo) + col;
            const auto nr = static_cast<std::size_t>(min_iy_ - iy_lo) + row;
            std::copy_n(counts_.begin() + static_cast<std::ptrdiff_t>((row * width_ + col) * k), k,
                        grown.begin() + static_cast<std::ptrdiff_t>((nr * new_w + nc) * k));
        }
    }
    counts_ = std::move(grown);
    min_ix_ = ix_lo;
    min_iy_ = iy_lo;
    width_ = new_w;
    height_ = new_h;
}

void SemanticGrid::stamp(double x, double y, std::size_t label, double radius) {
    if (label >= classes_.size()) {
        throw DataError("stamp label outside the class set");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !(radius >= 0.0)) {
        throw DataError("stamp position and radius must be finite");
    }
    const long cx = index_of(x);
    const long cy = index_of(y);
    const double r_cells = radius / resolution_;
    const long reach = static_cast<long>(std::floor(r_cells + 1e-9));
    grow_to(cx - reach, cy - reach, cx + reach, cy + reach);
    const std::size_t k = classes_.size();
    for (long dy = -reach; dy <= reach; ++dy) {
        for (long dx = -reach; dx <= reach; ++dx) {
            if (static_cast<double>(dx * dx + dy * dy) > r_cells * r_cells + 1e-9) {
                continue;
            }
            const auto col = static_cast<std::size_t>(cx + dx - min_ix_);
            const auto row = static_cast<std::size_t>(cy + dy - min_iy_);
            ++counts_[(row * width_ + col) * k + label];
        }
    }
}

std::size_t SemanticGrid::votes(std::size_t col, std::size_t row, std::size_t label) const {
    if (col >= width_ || row >= height_ || label >= classes_.size()) {
        throw DataError("grid cell index out of range");
    }
    return counts_[(row * width_ + col) * classes_.size() + label];
}

GridCell SemanticGrid::cell(std::size_t col, std::size_t row) const {
    if (col >= width_ || row >= height_) {
        throw DataError("grid cell index out of range");
    }
    const std::size_t k = classes_.size();
    const auto first = counts_.begin() + static_cast<std::ptrdiff_t>((row * width_ + col) * k);
    GridCell c;
    c.visit_count = std::accumulate(first, first + static_cast<std::ptrdiff_t>(k), std::size_t{0});
    if (c.visit_count == 0) {
        return c;
    }
    const auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(k));
    c.label = static_cast<std::size_t>(best - first);
    c.confidence = static_cast<double>(*best) / static_cast<double>(c.visit_count);
    return c;
}

std::optional<GridCell> SemanticGrid::cell_at(double x, double y) const {
    const long ix = index_of(x) - min_ix_;
    const long iy = index_of(y) - min_iy_;
    if (ix < 0 || iy < 0 || ix >= static_cast<long>(width_) || iy >= static_cast<long>(height_)) {
        return std::nullopt;
    }
    return cell(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy));
}

SemanticGrid rasterize(const ClassSet& classes, std::span<const PosedLabel> stamps,
                       double resolution, double radius) {
    if (stamps.empty()) {
        throw DataError("no posed frames to rasterize");
    }
    SemanticGrid grid(classes, resolution);
    for (const auto& s : stamps) {
        grid.stamp(s.pose.x, s.pose.y, s.label, radius);
    }
    return grid;
}

SemanticGrid build_semantic_map(const ClassSet& classes, std::span<const FrameRecord> frames,
                                std::span<const Prediction> predictions, const MapConfig& cfg) {
    if (frames.size() != predictions.size()) {
        throw DataError("frame and prediction counts differ");
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].pose) {
            order.push_back(i);
        }
    }
    if (order.empty()) {
        throw DataError("no frame carries a pose");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frames[a].pose->t < frames[b].pose->t;
    });
    std::vector<std::size_t> raw;
    raw.reserve(order.size());
    for (auto i : order) {
        raw.push_back(predictions[i].label.id);
    }
    const auto smoothed = smooth_sequence(raw, cfg.window);
    std::vector<PosedLabel> stamps;
    stamps.reserve(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
        stamps.push_back({*frames[order[j]].pose, smoothed[j]});
    }
    return rasterize(classes, stamps, cfg.resolution, cfg.radius);
}

Palette default_palette(const ClassSet& classes) {
    static const std::map<std::string, Rgb, std::less<>> kNamed = {
        {"bathroom", {31, 119, 180}},    {"bedroom", {255, 127, 14}},
        {"corridor", {44, 160, 44}},     {"dining_room", {214, 39, 40}},
        {"kitchen", {148, 103, 189}},    {"living_room", {140, 86, 75}},
        {"office", {227, 119, 194}},     {"conference_room", {188, 189, 34}},
    };
    static const std::vector<Rgb> kFallback = {
        {23, 190, 207}, {127, 127, 127}, {0, 0, 128},   {128, 128, 0}, {0, 128, 128},
        {128, 0, 128},  {255, 215, 0},   {70, 130, 180}, {0, 0, 0},     {220, 20, 60},
    };
    Palette p;
    std::set<std::tuple<int, int, int>> used;
    std::size_t next = 0;
    for (const auto& name : classes.names()) {
        if (auto it = kNamed.find(name); it != kNamed.end() &&
                                          !used.count({it->second.r, it->second.g, it->second.b})) {
            p[name] = it->second;
        } else {
            // After the fixed list, walk a 6x6x6 colour cube.
            const auto candidate = [&](std::size_t i) -> Rgb {
                if (i < kFallback.size()) {
                    return kFallback[i];
                }
                const std::size_t j = i - kFallback.size();
                return {static_cast<std::uint8_t>(51 * (j % 6)), static_cast<std::uint8_t>(51 * (j / 6 % 6)),
                        static_cast<std::uint8_t>(51 * (j / 36))};
            };
            const std::size_t limit = kFallback.size() + 216;
            while (next < limit) {
                const Rgb c = candidate(next);
                if (!(c == kWhite) && !used.count({c.r, c.g, c.b})) {
                    break;
                }
                ++next;
            }
            if (next >= limit) {
                throw DataError("default palette has no colour left for '" + name + "'");
            }
            p[name] = candidate(next++);
        }
        const Rgb c = p[name];
        used.insert({c.r, c.g, c.b});
    }
    return p;
}

RenderedMap render(const SemanticGrid& grid, const Palette& palette, std::size_t cell_px,
                   bool with_legend) {
    if (cell_px == 0) {
        throw DataError("cell size in pixels must be positive");
    }
    const ClassSet& classes = grid.classes();
    std::vector<Rgb> colours;
    std::set<std::tuple<int, int, int>> seen{{kWhite.r, kWhite.g, kWhite.b}};
    for (const auto& name : classes.names()) {
        const auto it = palette.find(name);
        if (it == palette.end()) {
            throw DataError("palette has no colour for '" + name + "'");
        }
        if (!seen.insert({it->second.r, it->second.g, it->second.b}).second) {
            throw DataError("palette colour for '" + name + "' is white or used twice");
        }
        colours.push_back(it->second);
    }

    RenderedMap out;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        out.legend.emplace_back(classes.name(c), colours[c]);
    }
    out.legend.emplace_back("unknown", kWhite);

    const std::size_t map_w = std::max<std::size_t>(grid.width(), 1) * cell_px;
    const std::size_t map_h = std::max<std::size_t>(grid.height(), 1) * cell_px;
    out.map_height_px = map_h;

    constexpr std::size_t kRow = kGlyphHeight + 4;
    constexpr std::size_t kTextX = 14;
    std::size_t width = map_w;
    std::size_t height = map_h;
    if (with_legend) {
        std::size_t longest = 0;
        for (const auto& [name, c] : out.legend) {
            longest = std::max(longest, name.size());
        }
        width = std::max(width, kTextX + longest * kGlyphAdvance + 2);
        height += 2 + out.legend.size() * kRow;
    }
    out.image = RgbImage(width, height, kWhite);

    for (std::size_t row = 0; row < grid.height(); ++row) {
        for (std::size_t col = 0; col < grid.width(); ++col) {
            const GridCell cell = grid.cell(col, row);
            if (!cell.label) {
                continue;
            }
            const std::size_t py = (grid.height() - 1 - row) * cell_px;
            out.image.fill_rect(col * cell_px, py, cell_px, cell_px, colours[*cell.label]);
        }
    }

    if (with_legend) {
        std::size_t y = map_h + 2;
        for (const auto& [name, colour] : out.legend) {
            out.image.fill_rect(2, y, 9, 9, kBlack);
            out.image.fill_rect(3, y + 1, 7, 7, colour);
            draw_text(out.image, kTextX, y + 1, name, kBlack);
            y += kRow;
        }
    }
    return out;
}

} // namespace deduce
