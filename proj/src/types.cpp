#include "deduce/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "deduce/error.hpp"

namespace deduce {

ClassSet::ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
        throw DataError("a class set needs at least two scene names");
    }
    std::set<std::string_view> seen;
    for (const auto& n : names_) {
        if (n.empty()) {
            throw DataError("empty scene name in class set");
        }
        if (!seen.insert(n).second) {
            throw DataError("duplicate scene name '" + n + "' in class set");
        }
    }
}

ClassSet ClassSet::home7() {
    return ClassSet({"bathroom", "bedroom", "corridor", "dining_room", "kitchen", "living_room",
                     "office"});
}

ClassSet ClassSet::office5() {
    return ClassSet({"conference_room", "corridor", "kitchen", "living_room", "office"});
}

std::optional<ClassSet> ClassSet::builtin(std::string_view name) {
    if (name == "home7") {
        return home7();
    }
    if (name == "office5") {
        return office5();
    }
    return std::nullopt;
}

std::optional<std::size_t> ClassSet::find(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t ClassSet::require(std::string_view name) const {
    if (auto id = find(name)) {
        return *id;
    }
    throw DataError("unknown scene '" + std::string(name) + "'");
}

SceneLabel make_label(const ClassSet& classes, std::size_t id) {
    return SceneLabel{id, classes.name(id)};
}

void validate(const Detection& det) {
    constexpr double eps = 1e-6;
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
        throw DataError("detection confidence outside [0,1]");
    }
    const auto& b = det.bbox;
    for (double v : {b.x, b.y, b.w, b.h}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DataError("bounding box coordinate outside [0,1]");
        }
    }
    if (b.x + b.w > 1.0 + eps || b.y + b.h > 1.0 + eps) {
        throw DataError("bounding box extends past the image border");
    }
}

FeatureBlob::FeatureBlob(BlobShape shape, double fill)
    : shape_(shape), values_(shape.size(), fill) {}

FeatureBlob::FeatureBlob(BlobShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
        throw DataError("feature blob value count does not match its shape");
    }
}

bool FrameRecord::operator==(const FrameRecord& other) const {
    return frame_id == other.frame_id && scene_feature.size() == other.scene_feature.size() &&
           scene_feature == other.scene_feature && feature_blob == other.feature_blob &&
           detections == other.detections && truth == other.truth && pose == other.pose &&
           image_size == other.image_size;
}

Posterior::Posterior(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw DataError("empty posterior");
    }
    double sum = 0.0;
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DataError("posterior entry outside [0,1]");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DataError("posterior does not sum to one");
    }
}

Posterior Posterior::uniform(std::size_t n) {
    return Posterior(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Posterior Posterior::one_hot(std::size_t n, std::size_t hot) {
    std::vector<double> v(n, 0.0);
    v.at(hot) = 1.0;
    return Posterior(std::move(v));
}

std::size_t Posterior::argmax() const { return deduce::argmax(values_); }

double Posterior::max() const { return values_.at(argmax()); }

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) {
        throw DataError("argmax of an empty vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

std::size_t argmax(const Eigen::VectorXd& values) {
    return argmax(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

Posterior softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw DataError("softmax of an empty vector");
    }
    for (double v : logits) {
        if (!std::isfinite(v)) {
            throw DataError("softmax input is not finite");
        }
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return Posterior(std::move(out));
}

Posterior softmax(const Eigen::VectorXd& logits) {
    return softmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())));
}

} // namespace deduce
