#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace deduce {

/// Ordered, duplicate-free list of scene names. Index order is the row order
/// of every weight matrix, posterior and confusion matrix.
class ClassSet {
public:
    ClassSet() = default;
    explicit ClassSet(std::vector<std::string> names);

    static ClassSet home7();
    static ClassSet office5();

    /// Looks up a built-in set by name ("home7", "office5").
    static std::optional<ClassSet> builtin(std::string_view name);

    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(std::size_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws DataError naming the unknown scene.
    std::size_t require(std::string_view name) const;

    bool operator==(const ClassSet&) const = default;

private:
    std::vector<std::string> names_;
};

struct SceneLabel {
    std::size_t id = 0;
    std::string name;

    bool operator==(const SceneLabel&) const = default;
};

SceneLabel make_label(const ClassSet& classes, std::size_t id);

/// Normalised image coordinates, (x, y) is the top-left corner.
struct BBox {
    double x = 0, y = 0, w = 0, h = 0;
    bool operator==(const BBox&) const = default;
};

struct Detection {
    std::size_t object = 0; ///< COCO-80 index
    double confidence = 0;
    BBox bbox;

    bool operator==(const Detection&) const = default;
};

/// Throws DataError if confidence or box are outside [0,1] (box edges may
/// overshoot by 1e-6).
void validate(const Detection& det);

struct BlobShape {
    std::size_t channels = 0, height = 0, width = 0;

    std::size_t size() const noexcept { return channels * height * width; }
    bool operator==(const BlobShape&) const = default;
};

/// Spatial activation tensor stored channel-major: (c, h, w).
class FeatureBlob {
public:
    FeatureBlob() = default;
    explicit FeatureBlob(BlobShape shape, double fill = 0.0);
    FeatureBlob(BlobShape shape, std::vector<double> values);

    const BlobShape& shape() const noexcept { return shape_; }
    double operator()(std::size_t c, std::size_t h, std::size_t w) const {
        return values_[(c * shape_.height + h) * shape_.width + w];
    }
    double& operator()(std::size_t c, std::size_t h, std::size_t w) {
        return values_[(c * shape_.height + h) * shape_.width + w];
    }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const FeatureBlob&) const = default;

private:
    BlobShape shape_;
    std::vector<double> values_;
};

struct Pose {
    double x = 0; ///< metres
    double y = 0; ///< metres
    double t = 0; ///< seconds
    bool operator==(const Pose&) const = default;
};

struct ImageSize {
    int width = 224;
    int height = 224;
    bool operator==(const ImageSize&) const = default;
};

struct FrameRecord {
    std::string frame_id;
    Eigen::VectorXd scene_feature;
    std::optional<FeatureBlob> feature_blob;
    std::vector<Detection> detections;
    std::optional<SceneLabel> truth;
    std::optional<Pose> pose;
    ImageSize image_size;

    bool operator==(const FrameRecord& other) const;
};

/// Probability vector over a ClassSet.
class Posterior {
public:
    Posterior() = default;
    /// Throws DataError unless entries lie in [0,1] and sum to 1 within 1e-9.
    explicit Posterior(std::vector<double> values);

    static Posterior uniform(std::size_t n);
    static Posterior one_hot(std::size_t n, std::size_t hot);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    /// Index of the largest entry; ties resolve to the lowest index.
    std::size_t argmax() const;
    double max() const;

    bool operator==(const Posterior&) const = default;

private:
    std::vector<double> values_;
};

/// Max-shifted softmax. Throws DataError on non-finite input.
Posterior softmax(std::span<const double> logits);
Posterior softmax(const Eigen::VectorXd& logits);

/// First index of the maximum; throws on empty input.
std::size_t argmax(std::span<const double> values);
std::size_t argmax(const Eigen::VectorXd& values);

} // namespace deduce
