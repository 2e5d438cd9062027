#include "deduce/fusion.hpp"

#include <string>

#include "deduce/error.hpp"

namespace deduce {

namespace {

const LinearHead& require_head(const std::optional<LinearHead>& head, ModelKind kind,
                               const char* asset) {
    if (!head) {
        throw MissingAssetError("model '" + std::string(to_string(kind)) + "' needs the " + asset +
                                ", which was not provided");
    }
    return *head;
}

const Codebook& require_codebook(const ModelBundle& bundle, ModelKind kind) {
    if (!bundle.codebook) {
        throw MissingAssetError("model '" + std::string(to_string(kind)) +
                                "' needs a codebook, which was not provided");
    }
    return *bundle.codebook;
}

const FeatureBlob& require_blob(const FrameRecord& frame) {
    if (!frame.feature_blob) {
        throw MissingAssetError("frame '" + frame.frame_id +
                                "' has no feature_blob, required by model 'attention'");
    }
    return *frame.feature_blob;
}

Prediction from_posterior(const ClassSet& classes, Posterior p, PredictionSource source,
                          ModelKind kind) {
    const std::size_t best = p.argmax();
    return {make_label(classes, best), std::move(p), source, kind};
}

} // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::scene_only: return "scene";
    case ModelKind::object_only: return "object";
    case ModelKind::scene_attention: return "attention";
    case ModelKind::combined: return "combined";
    case ModelKind::n_best: return "nbest";
    }
    return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (auto kind : kAllModels) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    if (name == "scene_only") return ModelKind::scene_only;
    if (name == "object_only") return ModelKind::object_only;
    if (name == "scene_attention") return ModelKind::scene_attention;
    if (name == "n_best") return ModelKind::n_best;
    return std::nullopt;
}

std::string_view to_string(PredictionSource source) {
    switch (source) {
    case PredictionSource::scene: return "scene";
    case PredictionSource::objects: return "objects";
    case PredictionSource::fused: return "fused";
    }
    return "unknown";
}

std::optional<double> threshold_preset(std::string_view name) {
    if (name == "places") return kPlacesThreshold;
    if (name == "sun") return kSunThreshold;
    return std::nullopt;
}

Prediction predict_n_best(const FrameRecord& frame, const LinearHead& scene_head,
                          const NBestConfig& cfg) {
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) {
        throw DataError("N-best threshold must lie in [0,1]");
    }
    if (cfg.codebook.class_set() != scene_head.class_set()) {
        throw DataError("codebook and scene head use different class sets");
    }
    if (frame.scene_feature.size() != static_cast<Eigen::Index>(scene_head.input_dim())) {
        throw DataError("frame '" + frame.frame_id + "': scene_feature has " +
                        std::to_string(frame.scene_feature.size()) + " entries, scene head expects " +
                        std::to_string(scene_head.input_dim()));
    }
    Posterior p = forward(scene_head, frame.scene_feature);
    if (p.max() >= cfg.threshold) {
        return from_posterior(scene_head.class_set(), std::move(p), PredictionSource::scene,
                              ModelKind::n_best);
    }
    ObjectVote vote = classify_objects(frame.detections, cfg.codebook, cfg.min_conf);
    if (vote.landmark_found) {
        return {vote.label, std::move(vote.posterior), PredictionSource::objects,
                ModelKind::n_best};
    }
    return from_posterior(scene_head.class_set(), std::move(p), PredictionSource::scene,
                          ModelKind::n_best);
}

const ClassSet& ModelBundle::output_classes(ModelKind kind) const {
    switch (kind) {
    case ModelKind::scene_only:
    case ModelKind::n_best: return require_head(scene_head, kind, "scene head").class_set();
    case ModelKind::combined: return require_head(combined_head, kind, "combined head").class_set();
    case ModelKind::scene_attention:
        return require_head(attention_head, kind, "attention head").class_set();
    case ModelKind::object_only: return require_codebook(*this, kind).class_set();
    }
    throw MissingAssetError("unknown model kind");
}

Prediction predict(const FrameRecord& frame, ModelKind kind, const ModelBundle& bundle) {
    switch (kind) {
    case ModelKind::scene_only: {
        const auto& head = require_head(bundle.scene_head, kind, "scene head");
        return from_posterior(head.class_set(), forward(head, model_input(kind, frame)),
                              PredictionSource::scene, kind);
    }
    case ModelKind::object_only: {
        const auto& cb = require_codebook(bundle, kind);
        ObjectVote vote = classify_objects(frame.detections, cb, bundle.min_conf);
        return {vote.label, std::move(vote.posterior), PredictionSource::objects, kind};
    }
    case ModelKind::scene_attention: {
        const auto& head = require_head(bundle.attention_head, kind, "attention head");
        const Eigen::VectorXd logits = blob_to_logits(require_blob(frame), head);
        Posterior p = softmax(logits);
        const std::size_t best = argmax(logits);
        return {make_label(head.class_set(), best), std::move(p), PredictionSource::scene, kind};
    }
    case ModelKind::combined: {
        const auto& head = require_head(bundle.combined_head, kind, "combined head");
        return from_posterior(head.class_set(),
                              forward(head, model_input(kind, frame, bundle.min_conf)),
                              PredictionSource::fused, kind);
    }
    case ModelKind::n_best: {
        const auto& head = require_head(bundle.scene_head, kind, "scene head");
        NBestConfig cfg{bundle.threshold, require_codebook(bundle, kind), bundle.min_conf};
        return predict_n_best(frame, head, cfg);
    }
    }
    throw MissingAssetError("unknown model kind");
}

Eigen::VectorXd model_input(ModelKind kind, const FrameRecord& frame, double min_conf) {
    switch (kind) {
    case ModelKind::scene_only:
    case ModelKind::n_best: return frame.scene_feature;
    case ModelKind::combined:
        return concat_features(frame.scene_feature, frame.detections, min_conf);
    case ModelKind::scene_attention: return global_average_pool(require_blob(frame));
    case ModelKind::object_only: break;
    }
    throw DataError("model '" + std::string(to_string(kind)) + "' has no trainable input");
}

LabeledData make_dataset(ModelKind kind, std::span<const FrameRecord> frames,
                         const ClassSet& classes, double min_conf) {
    if (frames.empty()) {
        throw DataError("cannot build a data set from zero frames");
    }
    LabeledData data{classes, {}, {}};
    data.labels.reserve(frames.size());
    for (std::size_t j = 0; j < frames.size(); ++j) {
        const auto& f = frames[j];
        if (!f.truth) {
            throw DataError("frame '" + f.frame_id + "' has no truth label");
        }
        const Eigen::VectorXd x = model_input(kind, f, min_conf);
        if (j == 0) {
            data.features.resize(x.size(), static_cast<Eigen::Index>(frames.size()));
        } else if (x.size() != data.features.rows()) {
            throw DataError("frame '" + f.frame_id + "' has a different feature dimension");
        }
        data.features.col(static_cast<Eigen::Index>(j)) = x;
        data.labels.push_back(classes.require(f.truth->name));
    }
    return data;
}

} // namespace deduce
