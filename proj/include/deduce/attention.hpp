#pragma once

#include <optional>

#include <Eigen/Core>

#include "deduce/linear_head.hpp"
#include "deduce/types.hpp"

namespace deduce {

/// Class activation map at image resolution. `values` is rows x cols =
/// image height x image width, min-max normalised to [0,1]; a constant map
/// is all zeros.
struct Heatmap {
    Eigen::MatrixXd values;
    std::size_t source_height = 0;
    std::size_t source_width = 0;
    SceneLabel predicted;
};

/// Per-channel mean over the spatial grid.
Eigen::VectorXd global_average_pool(const FeatureBlob& blob);

/// Pools the blob and applies the head's affine map. Throws DataError when
/// head.input_dim() != channels.
Eigen::VectorXd blob_to_logits(const FeatureBlob& blob, const LinearHead& head);

/// raw(h, w) = sum_c W[target, c] * blob(c, h, w).
Eigen::MatrixXd class_activation(const FeatureBlob& blob, const LinearHead& head,
                                 std::size_t target);

/// Align-corners bilinear resampling: corner samples land on corner pixels.
Eigen::MatrixXd upsample_bilinear(const Eigen::MatrixXd& source, std::size_t out_height,
                                  std::size_t out_width);

/// Rescales to [0,1]; constant input gives zeros.
Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& map);

/// Heatmap for `target`, or for the pooled-logit argmax when target is empty.
Heatmap activation_map(const FeatureBlob& blob, const LinearHead& head,
                       std::optional<std::size_t> target, ImageSize out_size);

struct AttentionResult {
    SceneLabel label;
    Posterior posterior;
    Heatmap heatmap;
};

AttentionResult classify_attn(const FeatureBlob& blob, const LinearHead& head,
                              ImageSize out_size = {});

} // namespace deduce
