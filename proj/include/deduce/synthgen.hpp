#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "deduce/coco.hpp"
#include "deduce/manifest.hpp"
#include "deduce/types.hpp"

namespace deduce {

/// Generative model of one scene class: isotropic Gaussian scene features,
/// independent Bernoulli object presence, uniform detection confidence.
struct SceneClassModel {
    Eigen::VectorXd feature_mean;
    double feature_sigma = 1.0;
    std::array<double, coco::kNumClasses> object_probs{};
    double conf_lo = 0.5;
    double conf_hi = 1.0;
    /// Channel profile of the rank-1 feature blob; required when the set
    /// declares a blob shape.
    Eigen::VectorXd blob_mean;
};

struct SceneModelSet {
    ClassSet classes;
    std::vector<SceneClassModel> scenes; ///< indexed like `classes`
    std::optional<BlobShape> blob_shape;
    double blob_sigma = 0.1;

    std::size_t feature_dim() const;
    /// Throws DataError on non-finite means, sigma <= 0, probabilities outside
    /// [0,1], inverted confidence ranges or ragged dimensions.
    void validate() const;
};

/// Built-in presets: "home7" and "office5". Means are fixed by an internal
/// seed so a preset is the same model on every run.
SceneModelSet home7_preset();
SceneModelSet office5_preset();
std::optional<SceneModelSet> builtin_preset(std::string_view name);

/// Adds rank-1 blob profiles of the given shape (deterministic in `seed`).
SceneModelSet with_blobs(SceneModelSet model, BlobShape shape, std::uint64_t seed = 17);

std::string preset_to_json(const SceneModelSet& model);
SceneModelSet preset_from_json(std::string_view text, const std::string& source = "<preset>");
void save_preset(const std::filesystem::path& path, const SceneModelSet& model);
SceneModelSet load_preset(const std::filesystem::path& path);

/// n_per_class frames per scene, scene-major order, fully determined by seed.
Manifest generate(const SceneModelSet& model, std::size_t n_per_class, std::uint64_t seed);

/// One room of a scripted robot tour: frames are drawn from `scene` with
/// poses on a sweep inside the rectangle.
struct TourRoom {
    std::string scene;
    double x_min = 0, y_min = 0, x_max = 1, y_max = 1;
    std::size_t frames = 10;
};

/// Frames visit the rooms in order; timestamps advance by `dt` seconds.
Manifest generate_tour(const SceneModelSet& model, std::span<const TourRoom> rooms,
                       std::uint64_t seed, double dt = 0.5);

/// Exact class posterior of a frame under the generative model with equal
/// class priors, using the scene feature and the object presence pattern.
Posterior bayes_oracle(const SceneModelSet& model, const FrameRecord& frame);

} // namespace deduce
