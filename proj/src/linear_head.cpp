#include "deduce/linear_head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "deduce/error.hpp"

namespace deduce {

namespace {

constexpr double kProbFloor = 1e-12;

void softmax_columns(Eigen::MatrixXd& logits) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        auto col = logits.col(j);
        const double top = col.maxCoeff();
        col = (col.array() - top).exp();
        col /= col.sum();
    }
}

Eigen::MatrixXd batch_posteriors(const LinearHead& head, const Eigen::MatrixXd& batch) {
    Eigen::MatrixXd p = head.weights() * batch;
    p.colwise() += head.bias();
    softmax_columns(p);
    return p;
}

std::size_t column_argmax(const Eigen::MatrixXd& m, Eigen::Index j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < m.rows(); ++i) {
        if (m(i, j) > m(best, j)) {
            best = i;
        }
    }
    return static_cast<std::size_t>(best);
}

} // namespace

LinearHead::LinearHead(ClassSet classes, std::size_t input_dim)
    : classes_(std::move(classes)),
      weights_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes_.size()),
                                     static_cast<Eigen::Index>(input_dim))),
      bias_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes_.size()))) {
    if (input_dim == 0) {
        throw DataError("linear head input dimension must be positive");
    }
}

LinearHead::LinearHead(ClassSet classes, Eigen::MatrixXd weights, Eigen::VectorXd bias)
    : classes_(std::move(classes)), weights_(std::move(weights)), bias_(std::move(bias)) {
    const auto k = static_cast<Eigen::Index>(classes_.size());
    if (weights_.rows() != k || bias_.size() != k || weights_.cols() == 0) {
        throw DataError("linear head parameters do not match the class set");
    }
    if (!weights_.allFinite() || !bias_.allFinite()) {
        throw DataError("linear head parameters must be finite");
    }
}

LinearHead LinearHead::random_init(ClassSet classes, std::size_t input_dim, std::mt19937_64& rng) {
    LinearHead head(std::move(classes), input_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < head.weights_.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.weights_.cols(); ++c) {
            head.weights_(r, c) = dist(rng);
        }
    }
    return head;
}

Eigen::VectorXd LinearHead::logits(const Eigen::VectorXd& x) const {
    if (x.size() != weights_.cols()) {
        throw DataError("input has " + std::to_string(x.size()) + " entries, head expects " +
                        std::to_string(weights_.cols()));
    }
    return weights_ * x + bias_;
}

bool LinearHead::operator==(const LinearHead& other) const {
    return classes_ == other.classes_ && weights_.rows() == other.weights_.rows() &&
           weights_.cols() == other.weights_.cols() && weights_ == other.weights_ &&
           bias_ == other.bias_;
}

Posterior forward(const LinearHead& head, const Eigen::VectorXd& x) {
    if (!x.allFinite()) {
        throw DataError("classifier input is not finite");
    }
    return softmax(head.logits(x));
}

double cross_entropy(std::span<const Posterior> predicted, std::span<const std::size_t> truth) {
    if (predicted.empty()) {
        throw DataError("cross-entropy of an empty batch");
    }
    if (predicted.size() != truth.size()) {
        throw DataError("cross-entropy: prediction and label counts differ");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < predicted.size(); ++j) {
        const double p = predicted[j][truth[j]];
        sum -= std::log(std::max(p, kProbFloor));
    }
    return sum / static_cast<double>(predicted.size());
}

Gradient analytic_gradient(const LinearHead& head, const Eigen::MatrixXd& batch,
                           std::span<const std::size_t> labels) {
    if (batch.rows() != static_cast<Eigen::Index>(head.input_dim())) {
        throw DataError("gradient: batch dimension " + std::to_string(batch.rows()) +
                        " does not match head input " + std::to_string(head.input_dim()));
    }
    if (batch.cols() == 0 || static_cast<std::size_t>(batch.cols()) != labels.size()) {
        throw DataError("gradient: batch must be non-empty with one label per column");
    }
    Eigen::MatrixXd delta = batch_posteriors(head, batch);
    const auto n = static_cast<double>(labels.size());
    double loss = 0.0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto row = static_cast<Eigen::Index>(labels[j]);
        const auto col = static_cast<Eigen::Index>(j);
        loss -= std::log(std::max(delta(row, col), kProbFloor));
        delta(row, col) -= 1.0;
    }
    Gradient g;
    g.weights = delta * batch.transpose() / n;
    g.bias = delta.rowwise().sum() / n;
    g.loss = loss / n;
    return g;
}

Eigen::VectorXd concat_features(const Eigen::VectorXd& scene_feature,
                                std::span<const Detection> detections, double min_conf) {
    const auto d = scene_feature.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d + static_cast<Eigen::Index>(coco::kNumClasses));
    out.head(d) = scene_feature;
    for (const auto& det : detections) {
        if (det.confidence >= min_conf) {
            out(d + static_cast<Eigen::Index>(det.object)) = 1.0;
        }
    }
    return out;
}

TrainConfig TrainConfig::scene_schedule() { return TrainConfig{}; }

TrainConfig TrainConfig::combined_schedule() {
    TrainConfig cfg;
    cfg.epochs = 9;
    cfg.lr_drop_every = 3;
    return cfg;
}

double TrainConfig::learning_rate(std::size_t epoch) const {
    const auto drops = static_cast<double>(epoch / lr_drop_every);
    return lr0 / std::pow(lr_drop_factor, drops);
}

void TrainConfig::validate() const {
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) {
        throw DataError("learning rate must be finite and non-negative");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw DataError("momentum must lie in [0,1)");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw DataError("weight decay must be finite and non-negative");
    }
    if (epochs < 1) {
        throw DataError("epochs must be at least 1");
    }
    if (lr_drop_every < 1) {
        throw DataError("lr_drop_every must be at least 1");
    }
    if (!(lr_drop_factor > 0.0) || !std::isfinite(lr_drop_factor)) {
        throw DataError("lr_drop_factor must be positive");
    }
    if (batch_size < 1) {
        throw DataError("batch size must be at least 1");
    }
}

std::string TrainConfig::canonical() const {
    nlohmann::ordered_json j;
    j["lr0"] = lr0;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["epochs"] = epochs;
    j["lr_drop_every"] = lr_drop_every;
    j["lr_drop_factor"] = lr_drop_factor;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    return j.dump();
}

std::optional<std::size_t> TrainReport::epochs_to_reach(double target) const {
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        if (accuracy_at(i) >= target) {
            return epochs[i].epoch;
        }
    }
    return std::nullopt;
}

double TrainReport::accuracy_at(std::size_t index) const {
    const auto& e = epochs.at(index);
    return e.val_accuracy.value_or(e.train_accuracy);
}

double TrainReport::final_accuracy() const {
    if (epochs.empty()) {
        throw DataError("training report has no epochs");
    }
    return accuracy_at(epochs.size() - 1);
}

SgdMomentum::SgdMomentum(double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {}

void SgdMomentum::step(LinearHead& head, const Gradient& grad, double lr) {
    if (velocity_w_.size() == 0) {
        velocity_w_ = Eigen::MatrixXd::Zero(head.weights().rows(), head.weights().cols());
        velocity_b_ = Eigen::VectorXd::Zero(head.bias().size());
    }
    velocity_w_ = momentum_ * velocity_w_ - lr * (grad.weights + weight_decay_ * head.weights());
    velocity_b_ = momentum_ * velocity_b_ - lr * (grad.bias + weight_decay_ * head.bias());
    head.weights() += velocity_w_;
    head.bias() += velocity_b_;
}

double mean_loss(const LinearHead& head, const LabeledData& data) {
    if (data.size() == 0) {
        throw DataError("mean loss of an empty data set");
    }
    const Eigen::MatrixXd p = batch_posteriors(head, data.features);
    double sum = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
        sum -= std::log(std::max(p(static_cast<Eigen::Index>(data.labels[j]),
                                   static_cast<Eigen::Index>(j)),
                                 kProbFloor));
    }
    return sum / static_cast<double>(data.size());
}

double accuracy(const LinearHead& head, const LabeledData& data) {
    if (data.size() == 0) {
        throw DataError("accuracy of an empty data set");
    }
    Eigen::MatrixXd logits = head.weights() * data.features;
    logits.colwise() += head.bias();
    std::size_t correct = 0;
    for (std::size_t j = 0; j < data.size(); ++j) {
        if (column_argmax(logits, static_cast<Eigen::Index>(j)) == data.labels[j]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(const LabeledData& data, const TrainConfig& cfg, const LabeledData* validation) {
    cfg.validate();
    const std::size_t n = data.size();
    if (n == 0 || static_cast<std::size_t>(data.features.cols()) != n) {
        throw DataError("training data is empty or has mismatched labels");
    }
    std::vector<std::size_t> per_class(data.classes.size(), 0);
    for (auto y : data.labels) {
        if (y >= per_class.size()) {
            throw DataError("training label outside the class set");
        }
        ++per_class[y];
    }
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        if (per_class[k] == 0) {
            throw DataError("no training samples for class '" + data.classes.name(k) + "'");
        }
    }
    if (!data.features.allFinite()) {
        throw DataError("training features must be finite");
    }
    if (validation && (validation->dim() != data.dim() || validation->classes != data.classes)) {
        throw DataError("validation split does not match the training data");
    }

    std::mt19937_64 rng(cfg.seed);
    LinearHead head = LinearHead::random_init(data.classes, data.dim(), rng);
    SgdMomentum opt(cfg.momentum, cfg.weight_decay);

    TrainReport report;
    report.initial_loss = mean_loss(head, data);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd batch;
    std::vector<std::size_t> batch_labels;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate(epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            batch.resize(static_cast<Eigen::Index>(data.dim()), static_cast<Eigen::Index>(len));
            batch_labels.resize(len);
            for (std::size_t j = 0; j < len; ++j) {
                batch.col(static_cast<Eigen::Index>(j)) =
                    data.features.col(static_cast<Eigen::Index>(order[start + j]));
                batch_labels[j] = data.labels[order[start + j]];
            }
            const Gradient g = analytic_gradient(head, batch, batch_labels);
            if (!std::isfinite(g.loss) || !g.weights.allFinite() || !g.bias.allFinite()) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(batch_index + 1));
            }
            loss_sum += g.loss * static_cast<double>(len);
            opt.step(head, g, lr);
        }
        if (!head.weights().allFinite() || !head.bias().allFinite()) {
            throw TrainingError("parameters diverged during epoch " + std::to_string(epoch + 1));
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.learning_rate = lr;
        stats.mean_loss = loss_sum / static_cast<double>(n);
        stats.train_accuracy = accuracy(head, data);
        if (validation) {
            stats.val_accuracy = accuracy(head, *validation);
        }
        report.epochs.push_back(stats);
    }
    return {std::move(head), std::move(report)};
}

void save_head(const std::filesystem::path& path, const HeadCheckpoint& ck) {
    using json = nlohmann::ordered_json;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write head checkpoint '" + path.string() + "'");
    }
    const auto& head = ck.head;
    json h;
    h["type"] = "head";
    h["role"] = ck.role;
    h["class_set"] = head.class_set().names();
    h["input_dim"] = head.input_dim();
    h["seed"] = ck.seed ? json(*ck.seed) : json(nullptr);
    h["config_hash"] = ck.config_hash;
    if (ck.provenance) {
        h["provenance"] = to_json(*ck.provenance);
    }
    out << h.dump() << '\n';
    for (Eigen::Index r = 0; r < head.weights().rows(); ++r) {
        json row;
        row["type"] = "row";
        row["class"] = head.class_set().name(static_cast<std::size_t>(r));
        std::vector<double> w(static_cast<std::size_t>(head.weights().cols()));
        for (Eigen::Index c = 0; c < head.weights().cols(); ++c) {
            w[static_cast<std::size_t>(c)] = head.weights()(r, c);
        }
        row["weights"] = std::move(w);
        row["bias"] = head.bias()(r);
        out << row.dump() << '\n';
    }
    if (!out) {
        throw DataError("error while writing head checkpoint '" + path.string() + "'");
    }
}

HeadCheckpoint load_head(const std::filesystem::path& path) {
    using json = nlohmann::ordered_json;
    std::ifstream in(path);
    if (!in) {
        throw MissingAssetError("cannot open head checkpoint '" + path.string() + "'");
    }
    const std::string src = path.string();
    std::string line;
    std::size_t lineno = 0;
    auto next_record = [&](const char* what) {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                try {
                    return json::parse(line);
                } catch (const json::parse_error& e) {
                    throw SchemaError(src, lineno, "<record>", e.what());
                }
            }
        }
        throw SchemaError(src, lineno, what, "unexpected end of file");
    };
    try {
        const json h = next_record("type");
        if (h.value("type", std::string()) != "head") {
            throw SchemaError(src, lineno, "type", "expected a head header record");
        }
        ClassSet classes(h.at("class_set").get<std::vector<std::string>>());
        const auto dim = h.at("input_dim").get<std::size_t>();
        Eigen::MatrixXd w(static_cast<Eigen::Index>(classes.size()), static_cast<Eigen::Index>(dim));
        Eigen::VectorXd b(static_cast<Eigen::Index>(classes.size()));
        for (std::size_t k = 0; k < classes.size(); ++k) {
            const json row = next_record("row");
            if (row.value("type", std::string()) != "row" ||
                row.at("class").get<std::string>() != classes.name(k)) {
                throw SchemaError(src, lineno, "class", "expected the row for '" + classes.name(k) + "'");
            }
            const auto values = row.at("weights").get<std::vector<double>>();
            if (values.size() != dim) {
                throw SchemaError(src, lineno, "weights", "row length does not match input_dim");
            }
            for (std::size_t c = 0; c < dim; ++c) {
                w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = values[c];
            }
            b(static_cast<Eigen::Index>(k)) = row.at("bias").get<double>();
        }
        HeadCheckpoint ck{LinearHead(std::move(classes), std::move(w), std::move(b)),
                          h.value("role", std::string()), std::nullopt,
                          h.value("config_hash", std::string()), std::nullopt};
        if (h.contains("seed") && !h["seed"].is_null()) {
            ck.seed = h["seed"].get<std::uint64_t>();
        }
        if (h.contains("provenance")) {
            ck.provenance = provenance_from_json(h["provenance"]);
        }
        return ck;
    } catch (const json::exception& e) {
        throw SchemaError(src, lineno, "<record>", e.what());
    }
}

} // namespace deduce
