#include "deduce/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "deduce/error.hpp"

namespace deduce {

namespace {

using ObjectTable = std::map<std::string, std::map<std::string, double>>;

struct PresetShape {
    std::size_t dim = kDefaultFeatureDim;
    double offset = 0.0;  ///< shared positive activation level
    double spread = 0.0;  ///< distance of each class mean from the shared centre
    double sigma = 1.0;
    double leak = 0.0;    ///< presence probability of another scene's landmark
    double conf_lo = 0.5;
    double conf_hi = 1.0;
    std::uint64_t seed = 0;
};

// Means are offset + spread * u_k with orthonormal u_k, so every pair of
// class means is spread * sqrt(2) apart.
SceneModelSet make_preset(const ClassSet& classes, const ObjectTable& objects,
                          const std::vector<std::string>& landmarks, const PresetShape& shape) {
    std::mt19937_64 rng(shape.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(shape.dim);
    const auto k = static_cast<Eigen::Index>(classes.size());

    Eigen::MatrixXd dirs(dim, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            dirs(i, j) = normal(rng);
        }
        for (Eigen::Index p = 0; p < j; ++p) {
            dirs.col(j) -= dirs.col(p).dot(dirs.col(j)) * dirs.col(p);
        }
        dirs.col(j).normalize();
    }

    SceneModelSet set;
    set.classes = classes;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        SceneClassModel m;
        m.feature_mean = Eigen::VectorXd::Constant(dim, shape.offset) +
                         shape.spread * dirs.col(static_cast<Eigen::Index>(c));
        m.feature_sigma = shape.sigma;
        m.conf_lo = shape.conf_lo;
        m.conf_hi = shape.conf_hi;
        for (const auto& name : landmarks) {
            m.object_probs[coco::require_index(name)] = shape.leak;
        }
        if (auto it = objects.find(classes.name(c)); it != objects.end()) {
            for (const auto& [name, p] : it->second) {
                m.object_probs[coco::require_index(name)] = p;
            }
        }
        set.scenes.push_back(std::move(m));
    }
    set.validate();
    return set;
}

const std::vector<std::string>& table_landmarks() {
    static const std::vector<std::string> kLandmarks = {
        "toilet", "sink", "bed", "dining table", "wine glass", "bowl", "oven", "microwave",
        "refrigerator", "couch", "vase", "tv", "laptop", "keyboard", "mouse"};
    return kLandmarks;
}

double log_bernoulli(double p, bool present) {
    const double q = present ? p : 1.0 - p;
    return q > 0.0 ? std::log(q) : -std::numeric_limits<double>::infinity();
}

} // namespace

std::size_t SceneModelSet::feature_dim() const {
    if (scenes.empty()) {
        throw DataError("scene model set is empty");
    }
    return static_cast<std::size_t>(scenes.front().feature_mean.size());
}

void SceneModelSet::validate() const {
    if (scenes.size() != classes.size()) {
        throw DataError("scene model set must describe every class exactly once");
    }
    const std::size_t dim = feature_dim();
    if (dim == 0) {
        throw DataError("scene feature dimension must be positive");
    }
    for (std::size_t c = 0; c < scenes.size(); ++c) {
        const auto& m = scenes[c];
        const std::string who = "scene model '" + classes.name(c) + "': ";
        if (static_cast<std::size_t>(m.feature_mean.size()) != dim || !m.feature_mean.allFinite()) {
            throw DataError(who + "feature mean must be finite with a common dimension");
        }
        if (!(m.feature_sigma > 0.0) || !std::isfinite(m.feature_sigma)) {
            throw DataError(who + "feature sigma must be positive");
        }
        for (double p : m.object_probs) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw DataError(who + "object probabilities must lie in [0,1]");
            }
        }
        if (!(m.conf_lo >= 0.0 && m.conf_lo <= m.conf_hi && m.conf_hi <= 1.0)) {
            throw DataError(who + "confidence range must satisfy 0 <= lo <= hi <= 1");
        }
        if (blob_shape) {
            if (static_cast<std::size_t>(m.blob_mean.size()) != blob_shape->channels ||
                !m.blob_mean.allFinite()) {
                throw DataError(who + "blob profile does not match the blob shape");
            }
        }
    }
    if (blob_shape && (blob_shape->size() == 0 || !(blob_sigma >= 0.0))) {
        throw DataError("invalid blob configuration");
    }
}

SceneModelSet home7_preset() {
    const ObjectTable objects = {
        {"bathroom", {{"toilet", 0.75}, {"sink", 0.7}, {"toothbrush", 0.3}, {"bottle", 0.2},
                      {"cup", 0.1}, {"hair drier", 0.05}, {"person", 0.1}}},
        {"bedroom", {{"bed", 0.85}, {"tv", 0.15}, {"laptop", 0.1}, {"book", 0.2}, {"clock", 0.15},
                     {"chair", 0.3}, {"teddy bear", 0.05}, {"potted plant", 0.1}, {"person", 0.1}}},
        {"corridor", {{"person", 0.3}, {"potted plant", 0.15}, {"chair", 0.1}, {"clock", 0.05}}},
        {"dining_room", {{"dining table", 0.8}, {"wine glass", 0.35}, {"bowl", 0.4}, {"chair", 0.8},
                         {"vase", 0.2}, {"cup", 0.3}, {"person", 0.2}}},
        {"kitchen", {{"oven", 0.55}, {"microwave", 0.5}, {"refrigerator", 0.6}, {"sink", 0.5},
                     {"bowl", 0.3}, {"cup", 0.3}, {"bottle", 0.3}, {"dining table", 0.2},
                     {"chair", 0.3}, {"person", 0.15}}},
        {"living_room", {{"couch", 0.8}, {"vase", 0.25}, {"tv", 0.45}, {"chair", 0.4},
                         {"potted plant", 0.3}, {"book", 0.2}, {"remote", 0.2}, {"person", 0.2}}},
        {"office", {{"tv", 0.45}, {"laptop", 0.5}, {"keyboard", 0.55}, {"mouse", 0.45},
                    {"chair", 0.7}, {"book", 0.3}, {"cell phone", 0.15}, {"person", 0.25}}},
    };
    PresetShape shape;
    shape.offset = 0.05;
    shape.spread = 0.13;
    shape.sigma = 0.05;
    shape.leak = 0.02;
    shape.conf_lo = 0.55;
    shape.conf_hi = 0.95;
    shape.seed = 20190;
    return make_preset(ClassSet::home7(), objects, table_landmarks(), shape);
}

SceneModelSet office5_preset() {
    const ObjectTable objects = {
        {"conference_room", {{"tv", 0.6}, {"chair", 0.9}, {"laptop", 0.3}, {"person", 0.4},
                             {"bottle", 0.2}}},
        {"corridor", {{"person", 0.3}, {"potted plant", 0.15}, {"chair", 0.1}}},
        {"kitchen", {{"oven", 0.4}, {"microwave", 0.6}, {"refrigerator", 0.65}, {"sink", 0.5},
                     {"cup", 0.4}, {"bottle", 0.3}}},
        {"living_room", {{"couch", 0.8}, {"vase", 0.2}, {"tv", 0.3}, {"chair", 0.4},
                         {"potted plant", 0.3}}},
        {"office", {{"laptop", 0.5}, {"keyboard", 0.6}, {"mouse", 0.5}, {"tv", 0.35},
                    {"chair", 0.8}, {"book", 0.3}}},
    };
    PresetShape shape;
    shape.offset = 0.05;
    shape.spread = 0.13;
    shape.sigma = 0.05;
    shape.leak = 0.02;
    shape.conf_lo = 0.55;
    shape.conf_hi = 0.95;
    shape.seed = 20191;
    return make_preset(ClassSet::office5(), objects, table_landmarks(), shape);
}

std::optional<SceneModelSet> builtin_preset(std::string_view name) {
    if (name == "home7") {
        return home7_preset();
    }
    if (name == "office5") {
        return office5_preset();
    }
    return std::nullopt;
}

SceneModelSet with_blobs(SceneModelSet model, BlobShape shape, std::uint64_t seed) {
    if (shape.size() == 0) {
        throw DataError("blob shape must be non-empty");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> base(0.0, 0.2);
    std::uniform_int_distribution<std::size_t> pick(0, shape.channels - 1);
    for (auto& m : model.scenes) {
        m.blob_mean.resize(static_cast<Eigen::Index>(shape.channels));
        for (Eigen::Index c = 0; c < m.blob_mean.size(); ++c) {
            m.blob_mean(c) = base(rng);
        }
        // A few channels fire strongly for each scene.
        for (int i = 0; i < 3; ++i) {
            m.blob_mean(static_cast<Eigen::Index>(pick(rng))) += 1.0;
        }
    }
    model.blob_shape = shape;
    model.validate();
    return model;
}

std::string preset_to_json(const SceneModelSet& model) {
    model.validate();
    nlohmann::ordered_json j;
    j["class_set"] = model.classes.names();
    j["feature_dim"] = model.feature_dim();
    if (model.blob_shape) {
        j["blob_shape"] = {model.blob_shape->channels, model.blob_shape->height,
                           model.blob_shape->width};
        j["blob_sigma"] = model.blob_sigma;
    } else {
        j["blob_shape"] = nullptr;
    }
    nlohmann::ordered_json scenes = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < model.scenes.size(); ++c) {
        const auto& m = model.scenes[c];
        nlohmann::ordered_json s;
        s["feature_mean"] =
            std::vector<double>(m.feature_mean.data(), m.feature_mean.data() + m.feature_mean.size());
        s["feature_sigma"] = m.feature_sigma;
        nlohmann::ordered_json probs = nlohmann::ordered_json::object();
        for (std::size_t o = 0; o < coco::kNumClasses; ++o) {
            if (m.object_probs[o] > 0.0) {
                probs[std::string(coco::names()[o])] = m.object_probs[o];
            }
        }
        s["object_probs"] = std::move(probs);
        s["conf_range"] = {m.conf_lo, m.conf_hi};
        if (model.blob_shape) {
            s["blob_mean"] =
                std::vector<double>(m.blob_mean.data(), m.blob_mean.data() + m.blob_mean.size());
        }
        scenes[model.classes.name(c)] = std::move(s);
    }
    j["classes"] = std::move(scenes);
    return j.dump(1);
}

SceneModelSet preset_from_json(std::string_view text, const std::string& source) {
    using json = nlohmann::ordered_json;
    try {
        const json j = json::parse(text.begin(), text.end());
        SceneModelSet set;
        set.classes = ClassSet(j.at("class_set").get<std::vector<std::string>>());
        const auto dim = j.at("feature_dim").get<std::size_t>();
        if (j.contains("blob_shape") && !j["blob_shape"].is_null()) {
            const auto s = j["blob_shape"].get<std::vector<std::size_t>>();
            if (s.size() != 3) {
                throw DataError("blob_shape must be [C,H,W]");
            }
            set.blob_shape = BlobShape{s[0], s[1], s[2]};
            set.blob_sigma = j.value("blob_sigma", 0.1);
        }
        const json& scenes = j.at("classes");
        for (const auto& name : set.classes.names()) {
            const json& s = scenes.at(name);
            SceneClassModel m;
            const auto mean = s.at("feature_mean").get<std::vector<double>>();
            if (mean.size() != dim) {
                throw DataError("feature_mean of '" + name + "' does not have feature_dim entries");
            }
            m.feature_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                               static_cast<Eigen::Index>(dim));
            m.feature_sigma = s.at("feature_sigma").get<double>();
            for (auto it = s.at("object_probs").begin(); it != s.at("object_probs").end(); ++it) {
                m.object_probs[coco::require_index(it.key())] = it.value().get<double>();
            }
            const auto range = s.at("conf_range").get<std::vector<double>>();
            if (range.size() != 2) {
                throw DataError("conf_range of '" + name + "' must be [lo,hi]");
            }
            m.conf_lo = range[0];
            m.conf_hi = range[1];
            if (s.contains("blob_mean")) {
                const auto b = s["blob_mean"].get<std::vector<double>>();
                m.blob_mean = Eigen::Map<const Eigen::VectorXd>(b.data(),
                                                                static_cast<Eigen::Index>(b.size()));
            }
            set.scenes.push_back(std::move(m));
        }
        set.validate();
        return set;
    } catch (const json::exception& e) {
        throw DataError(source + ": malformed preset: " + e.what());
    } catch (const DataError& e) {
        throw DataError(source + ": " + e.what());
    }
}

void save_preset(const std::filesystem::path& path, const SceneModelSet& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write preset '" + path.string() + "'");
    }
    out << preset_to_json(model) << '\n';
}

SceneModelSet load_preset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open preset '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return preset_from_json(buf.str(), path.string());
}

namespace {

class FrameSampler {
public:
    FrameSampler(const SceneModelSet& model, std::uint64_t seed) : model_(model), rng_(seed) {}

    FrameRecord draw(std::size_t cls, std::string frame_id) {
        const auto& m = model_.scenes.at(cls);
        FrameRecord f;
        f.frame_id = std::move(frame_id);
        f.scene_feature.resize(m.feature_mean.size());
        for (Eigen::Index i = 0; i < m.feature_mean.size(); ++i) {
            f.scene_feature(i) = m.feature_mean(i) + m.feature_sigma * normal_(rng_);
        }
        for (std::size_t o = 0; o < coco::kNumClasses; ++o) {
            if (unit_(rng_) >= m.object_probs[o]) {
                continue;
            }
            Detection d;
            d.object = o;
            d.confidence = m.conf_lo + (m.conf_hi - m.conf_lo) * unit_(rng_);
            d.bbox.w = 0.05 + 0.45 * unit_(rng_);
            d.bbox.h = 0.05 + 0.45 * unit_(rng_);
            d.bbox.x = (1.0 - d.bbox.w) * unit_(rng_);
            d.bbox.y = (1.0 - d.bbox.h) * unit_(rng_);
            f.detections.push_back(d);
        }
        if (model_.blob_shape) {
            f.feature_blob = draw_blob(m);
        }
        f.truth = make_label(model_.classes, cls);
        return f;
    }

private:
    // Rank-1: noisy channel profile times a single Gaussian hot spot whose
    // spatial mean is 1.
    FeatureBlob draw_blob(const SceneClassModel& m) {
        const auto& s = *model_.blob_shape;
        FeatureBlob blob(s);
        std::vector<double> profile(s.channels);
        for (std::size_t c = 0; c < s.channels; ++c) {
            profile[c] = m.blob_mean(static_cast<Eigen::Index>(c)) + model_.blob_sigma * normal_(rng_);
        }
        const double cy = unit_(rng_) * static_cast<double>(s.height - 1);
        const double cx = unit_(rng_) * static_cast<double>(s.width - 1);
        const double radius = 0.15 * static_cast<double>(std::max(s.height, s.width)) + 0.5;
        std::vector<double> spatial(s.height * s.width);
        double total = 0.0;
        for (std::size_t h = 0; h < s.height; ++h) {
            for (std::size_t w = 0; w < s.width; ++w) {
                const double dy = static_cast<double>(h) - cy;
                const double dx = static_cast<double>(w) - cx;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
                spatial[h * s.width + w] = v;
                total += v;
            }
        }
        const double scale = static_cast<double>(spatial.size()) / total;
        for (std::size_t c = 0; c < s.channels; ++c) {
            for (std::size_t h = 0; h < s.height; ++h) {
                for (std::size_t w = 0; w < s.width; ++w) {
                    blob(c, h, w) = profile[c] * spatial[h * s.width + w] * scale;
                }
            }
        }
        return blob;
    }

    const SceneModelSet& model_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

ManifestHeader header_for(const SceneModelSet& model, std::uint64_t seed) {
    ManifestHeader h;
    h.class_set = model.classes;
    h.feature_dim = model.feature_dim();
    h.blob_shape = model.blob_shape;
    Provenance p;
    p.seed = seed;
    p.config_hash = stable_hash(preset_to_json(model));
    h.provenance = p;
    return h;
}

std::string padded(std::size_t i) {
    std::ostringstream s;
    s << std::setw(5) << std::setfill('0') << i;
    return s.str();
}

} // namespace

Manifest generate(const SceneModelSet& model, std::size_t n_per_class, std::uint64_t seed) {
    model.validate();
    if (n_per_class < 1) {
        throw DataError("n_per_class must be at least 1");
    }
    Manifest m;
    m.header = header_for(model, seed);
    FrameSampler sampler(model, seed);
    m.frames.reserve(n_per_class * model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            m.frames.push_back(sampler.draw(c, model.classes.name(c) + "/" + padded(i)));
        }
    }
    return m;
}

Manifest generate_tour(const SceneModelSet& model, std::span<const TourRoom> rooms,
                       std::uint64_t seed, double dt) {
    model.validate();
    if (rooms.empty()) {
        throw DataError("a tour needs at least one room");
    }
    Manifest m;
    m.header = header_for(model, seed);
    FrameSampler sampler(model, seed);
    double t = 0.0;
    std::size_t index = 0;
    for (const auto& room : rooms) {
        const std::size_t cls = model.classes.require(room.scene);
        if (room.frames == 0 || !(room.x_max > room.x_min) || !(room.y_max > room.y_min)) {
            throw DataError("tour room '" + room.scene + "' is empty");
        }
        const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(room.frames))));
        const std::size_t rows = (room.frames + cols - 1) / cols;
        for (std::size_t i = 0; i < room.frames; ++i) {
            const std::size_t r = i / cols;
            std::size_t c = i % cols;
            if (r % 2 == 1) {
                c = cols - 1 - c; // boustrophedon sweep
            }
            FrameRecord f = sampler.draw(cls, "tour/" + padded(index++));
            f.pose = Pose{
                room.x_min + (static_cast<double>(c) + 0.5) / static_cast<double>(cols) *
                                 (room.x_max - room.x_min),
                room.y_min + (static_cast<double>(r) + 0.5) / static_cast<double>(rows) *
                                 (room.y_max - room.y_min),
                t};
            t += dt;
            m.frames.push_back(std::move(f));
        }
    }
    return m;
}

Posterior bayes_oracle(const SceneModelSet& model, const FrameRecord& frame) {
    const std::size_t k = model.classes.size();
    std::array<bool, coco::kNumClasses> present{};
    for (const auto& d : frame.detections) {
        present.at(d.object) = true;
    }
    const double dim = static_cast<double>(frame.scene_feature.size());
    std::vector<double> log_lik(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& m = model.scenes[c];
        if (m.feature_mean.size() != frame.scene_feature.size()) {
            throw DataError("frame '" + frame.frame_id + "' does not match the model dimension");
        }
        const double s2 = m.feature_sigma * m.feature_sigma;
        double ll = -dim * std::log(m.feature_sigma) -
                    (frame.scene_feature - m.feature_mean).squaredNorm() / (2.0 * s2);
        for (std::size_t o = 0; o < coco::kNumClasses; ++o) {
            ll += log_bernoulli(m.object_probs[o], present[o]);
        }
        log_lik[c] = ll;
    }
    double top = -std::numeric_limits<double>::infinity();
    for (double v : log_lik) {
        top = std::max(top, v);
    }
    if (!std::isfinite(top)) {
        return Posterior::uniform(k);
    }
    std::vector<double> p(k);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        p[c] = std::exp(log_lik[c] - top);
        sum += p[c];
    }
    for (double& v : p) {
        v /= sum;
    }
    return Posterior(std::move(p));
}

} // namespace deduce
