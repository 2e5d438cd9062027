#include "deduce/attention.hpp"

#include <algorithm>
#include <cmath>

#include "deduce/error.hpp"

namespace deduce {

namespace {

void require_channels(const FeatureBlob& blob, const LinearHead& head) {
    if (blob.shape().channels != head.input_dim()) {
        throw DataError("feature blob has " + std::to_string(blob.shape().channels) +
                        " channels, attention head expects " + std::to_string(head.input_dim()));
    }
    if (blob.shape().height == 0 || blob.shape().width == 0) {
        throw DataError("feature blob has an empty spatial grid");
    }
}

} // namespace

Eigen::VectorXd global_average_pool(const FeatureBlob& blob) {
    const auto& s = blob.shape();
    const std::size_t cells = s.height * s.width;
    if (cells == 0) {
        throw DataError("feature blob has an empty spatial grid");
    }
    Eigen::VectorXd pooled(static_cast<Eigen::Index>(s.channels));
    const auto values = blob.values();
    for (std::size_t c = 0; c < s.channels; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            sum += values[c * cells + i];
        }
        pooled(static_cast<Eigen::Index>(c)) = sum / static_cast<double>(cells);
    }
    return pooled;
}

Eigen::VectorXd blob_to_logits(const FeatureBlob& blob, const LinearHead& head) {
    require_channels(blob, head);
    return head.logits(global_average_pool(blob));
}

Eigen::MatrixXd class_activation(const FeatureBlob& blob, const LinearHead& head,
                                 std::size_t target) {
    require_channels(blob, head);
    if (target >= head.num_classes()) {
        throw DataError("activation target outside the class set");
    }
    const auto& s = blob.shape();
    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.height),
                                                static_cast<Eigen::Index>(s.width));
    const auto row = head.weights().row(static_cast<Eigen::Index>(target));
    for (std::size_t c = 0; c < s.channels; ++c) {
        const double w = row(static_cast<Eigen::Index>(c));
        for (std::size_t h = 0; h < s.height; ++h) {
            for (std::size_t x = 0; x < s.width; ++x) {
                raw(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(x)) += w * blob(c, h, x);
            }
        }
    }
    return raw;
}

Eigen::MatrixXd upsample_bilinear(const Eigen::MatrixXd& src, std::size_t out_height,
                                  std::size_t out_width) {
    if (out_height == 0 || out_width == 0) {
        throw DataError("upsample target has zero area");
    }
    if (src.size() == 0) {
        throw DataError("upsample source is empty");
    }
    const auto in_h = static_cast<std::size_t>(src.rows());
    const auto in_w = static_cast<std::size_t>(src.cols());
    // Source coordinate of output index i under the align-corners mapping.
    auto source_coord = [](std::size_t i, std::size_t in, std::size_t out) {
        if (out == 1 || in == 1) {
            return 0.0;
        }
        return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
    };
    Eigen::MatrixXd out(static_cast<Eigen::Index>(out_height), static_cast<Eigen::Index>(out_width));
    for (std::size_t y = 0; y < out_height; ++y) {
        const double sy = source_coord(y, in_h, out_height);
        const auto y0 = std::min(static_cast<std::size_t>(std::floor(sy)), in_h - 1);
        const auto y1 = std::min(y0 + 1, in_h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_width; ++x) {
            const double sx = source_coord(x, in_w, out_width);
            const auto x0 = std::min(static_cast<std::size_t>(std::floor(sx)), in_w - 1);
            const auto x1 = std::min(x0 + 1, in_w - 1);
            const double fx = sx - static_cast<double>(x0);
            const auto at = [&](std::size_t r, std::size_t c) {
                return src(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            };
            const double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
            const double bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
            out(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) =
                (1.0 - fy) * top + fy * bottom;
        }
    }
    return out;
}

Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& map) {
    if (map.size() == 0) {
        return map;
    }
    const double lo = map.minCoeff();
    const double hi = map.maxCoeff();
    const double span = hi - lo;
    if (!(span > 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))))) {
        return Eigen::MatrixXd::Zero(map.rows(), map.cols());
    }
    Eigen::MatrixXd out = (map.array() - lo) / span;
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

Heatmap activation_map(const FeatureBlob& blob, const LinearHead& head,
                       std::optional<std::size_t> target, ImageSize out_size) {
    require_channels(blob, head);
    if (out_size.width <= 0 || out_size.height <= 0) {
        throw DataError("heatmap output size has zero area");
    }
    const auto out_h = static_cast<std::size_t>(out_size.height);
    const auto out_w = static_cast<std::size_t>(out_size.width);
    const auto& s = blob.shape();
    if (out_h < s.height || out_w < s.width) {
        throw DataError("heatmap output size is smaller than the feature grid");
    }
    const std::size_t cls =
        target ? *target : argmax(blob_to_logits(blob, head));
    const Eigen::MatrixXd raw = class_activation(blob, head, cls);
    // Normalising again after resampling pins min 0 / max 1 at image size;
    // resampling is affine-equivariant so the two orders agree up to scale.
    Heatmap hm;
    hm.values = minmax_normalize(upsample_bilinear(minmax_normalize(raw), out_h, out_w));
    hm.source_height = s.height;
    hm.source_width = s.width;
    hm.predicted = make_label(head.class_set(), cls);
    return hm;
}

AttentionResult classify_attn(const FeatureBlob& blob, const LinearHead& head, ImageSize out_size) {
    const Eigen::VectorXd logits = blob_to_logits(blob, head);
    Posterior posterior = softmax(logits);
    const std::size_t label = argmax(logits);
    Heatmap hm = activation_map(blob, head, label, out_size);
    return {make_label(head.class_set(), label), std::move(posterior), std::move(hm)};
}

} // namespace deduce
