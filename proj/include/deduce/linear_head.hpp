#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deduce/codebook.hpp"
#include "deduce/provenance.hpp"
#include "deduce/types.hpp"

namespace deduce {

/// Softmax linear classifier: posterior = softmax(W x + b), W is
/// |classes| x input_dim.
class LinearHead {
public:
    /// Zero weights and bias.
    LinearHead(ClassSet classes, std::size_t input_dim);
    LinearHead(ClassSet classes, Eigen::MatrixXd weights, Eigen::VectorXd bias);

    /// Weights uniform in [-1/sqrt(D), 1/sqrt(D)], zero bias.
    static LinearHead random_init(ClassSet classes, std::size_t input_dim, std::mt19937_64& rng);

    const ClassSet& class_set() const noexcept { return classes_; }
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weights_.cols()); }
    std::size_t num_classes() const noexcept { return classes_.size(); }

    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    const Eigen::VectorXd& bias() const noexcept { return bias_; }
    Eigen::MatrixXd& weights() noexcept { return weights_; }
    Eigen::VectorXd& bias() noexcept { return bias_; }

    /// Throws DataError on dimension mismatch.
    Eigen::VectorXd logits(const Eigen::VectorXd& x) const;

    bool operator==(const LinearHead& other) const;

private:
    ClassSet classes_;
    Eigen::MatrixXd weights_;
    Eigen::VectorXd bias_;
};

Posterior forward(const LinearHead& head, const Eigen::VectorXd& x);

/// Mean negative log-likelihood of the true class, probabilities clamped to
/// >= 1e-12. Throws DataError on an empty or ragged batch.
double cross_entropy(std::span<const Posterior> predicted, std::span<const std::size_t> truth);

/// Samples are the columns of `features`.
struct LabeledData {
    ClassSet classes;
    Eigen::MatrixXd features; ///< D x N
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.rows()); }
};

struct Gradient {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    double loss = 0; ///< cross-entropy of the batch at the evaluated point
};

/// d(cross-entropy)/d(W, b) averaged over the batch: (p - y) x^T.
Gradient analytic_gradient(const LinearHead& head, const Eigen::MatrixXd& batch,
                           std::span<const std::size_t> labels);

/// Scene feature followed by an 80-entry presence indicator of the COCO
/// classes detected with confidence >= min_conf.
Eigen::VectorXd concat_features(const Eigen::VectorXd& scene_feature,
                                std::span<const Detection> detections,
                                double min_conf = kDefaultMinConfidence);

struct TrainConfig {
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t epochs = 90;
    std::size_t lr_drop_every = 30;
    double lr_drop_factor = 10.0;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;

    /// 90 epochs, divide by 10 every 30 (scene and attention heads).
    static TrainConfig scene_schedule();
    /// 9 epochs, divide by 10 every 3 (combined head).
    static TrainConfig combined_schedule();

    /// lr0 / drop_factor^floor(epoch / lr_drop_every), epoch counted from 0.
    double learning_rate(std::size_t epoch) const;
    /// Throws DataError when a field is out of range.
    void validate() const;
    /// Stable text form used for the config hash.
    std::string canonical() const;
};

struct EpochStats {
    std::size_t epoch = 0; ///< 1-based
    double learning_rate = 0;
    double mean_loss = 0;
    double train_accuracy = 0;
    std::optional<double> val_accuracy;

    bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
    double initial_loss = 0;
    std::vector<EpochStats> epochs;

    /// First 1-based epoch whose validation accuracy (training accuracy when
    /// no validation split was given) reaches `accuracy`.
    std::optional<std::size_t> epochs_to_reach(double accuracy) const;
    double final_accuracy() const;
    double accuracy_at(std::size_t index) const;

    bool operator==(const TrainReport&) const = default;
};

/// Heavy-ball SGD: g = grad + weight_decay * theta; v = momentum * v - lr * g;
/// theta += v. Applied to weights and bias alike.
class SgdMomentum {
public:
    SgdMomentum(double momentum, double weight_decay);
    void step(LinearHead& head, const Gradient& grad, double lr);

private:
    double momentum_;
    double weight_decay_;
    Eigen::MatrixXd velocity_w_;
    Eigen::VectorXd velocity_b_;
};

struct TrainResult {
    LinearHead head;
    TrainReport report;
};

/// Deterministic minibatch training given cfg.seed.
TrainResult train(const LabeledData& data, const TrainConfig& cfg,
                  const LabeledData* validation = nullptr);

double mean_loss(const LinearHead& head, const LabeledData& data);
double accuracy(const LinearHead& head, const LabeledData& data);

struct HeadCheckpoint {
    LinearHead head;
    std::string role; ///< "scene", "combined" or "attention"
    std::optional<std::uint64_t> seed;
    std::string config_hash;
    std::optional<Provenance> provenance;
};

void save_head(const std::filesystem::path& path, const HeadCheckpoint& checkpoint);
HeadCheckpoint load_head(const std::filesystem::path& path);

} // namespace deduce
