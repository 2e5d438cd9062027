#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

#include "deduce/attention.hpp"
#include "deduce/codebook.hpp"
#include "deduce/linear_head.hpp"
#include "deduce/types.hpp"

namespace deduce {

enum class ModelKind { scene_only, object_only, scene_attention, combined, n_best };

inline constexpr std::array<ModelKind, 5> kAllModels = {
    ModelKind::scene_only, ModelKind::object_only, ModelKind::scene_attention,
    ModelKind::combined, ModelKind::n_best};

/// Short names used on the command line: scene, object, attention, combined, nbest.
std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

enum class PredictionSource { scene, objects, fused };
std::string_view to_string(PredictionSource source);

inline constexpr double kPlacesThreshold = 0.5;
inline constexpr double kSunThreshold = 0.6;

/// "places" -> 0.5, "sun" -> 0.6.
std::optional<double> threshold_preset(std::string_view name);

struct NBestConfig {
    double threshold = kPlacesThreshold;
    Codebook codebook = default_codebook();
    double min_conf = kDefaultMinConfidence;
};

struct Prediction {
    SceneLabel label;
    Posterior posterior;
    PredictionSource source = PredictionSource::scene;
    ModelKind model = ModelKind::scene_only;

    bool operator==(const Prediction&) const = default;
};

/// Scene posterior when it is confident enough; otherwise the landmark vote
/// replaces it, unless no landmark was detected.
Prediction predict_n_best(const FrameRecord& frame, const LinearHead& scene_head,
                          const NBestConfig& cfg);

/// Everything the five models may need. Only the assets of the model being
/// run have to be present.
struct ModelBundle {
    std::optional<LinearHead> scene_head;
    std::optional<LinearHead> combined_head;
    std::optional<LinearHead> attention_head;
    std::optional<Codebook> codebook;
    double threshold = kPlacesThreshold;
    double min_conf = kDefaultMinConfidence;

    /// Class set the given model predicts over; throws MissingAssetError.
    const ClassSet& output_classes(ModelKind kind) const;
};

/// Throws MissingAssetError naming the model and the absent asset, or when a
/// scene_attention frame has no feature blob.
Prediction predict(const FrameRecord& frame, ModelKind kind, const ModelBundle& bundle);

/// Input vector of a trainable model: scene feature, scene+objects, or the
/// pooled feature blob.
Eigen::VectorXd model_input(ModelKind kind, const FrameRecord& frame,
                            double min_conf = kDefaultMinConfidence);

/// Training matrix for a trainable model; every frame must carry truth.
LabeledData make_dataset(ModelKind kind, std::span<const FrameRecord> frames,
                         const ClassSet& classes, double min_conf = kDefaultMinConfidence);

} // namespace deduce
