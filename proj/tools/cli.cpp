#include "cli.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "deduce/attention.hpp"
#include "deduce/codebook.hpp"
#include "deduce/error.hpp"
#include "deduce/eval.hpp"
#include "deduce/fusion.hpp"
#include "deduce/image.hpp"
#include "deduce/linear_head.hpp"
#include "deduce/manifest.hpp"
#include "deduce/provenance.hpp"
#include "deduce/semmap.hpp"
#include "deduce/synthgen.hpp"

namespace deduce::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::uint64_t seed = 0;

    // synth
    std::string preset = "home7";
    std::string preset_file;
    std::string dump_preset;
    std::size_t n = 500;
    std::vector<std::size_t> blob_shape;
    bool tour = false;

    // shared paths
    std::vector<std::string> manifests;
    std::string out;
    std::string heads;
    std::string codebook;

    // train
    std::string val;
    std::string report;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> lr_drop_every;
    std::optional<double> lr;
    std::optional<double> momentum;
    std::optional<double> weight_decay;
    std::optional<std::size_t> batch;

    // inference
    std::vector<std::string> models;
    std::optional<double> threshold;
    std::string threshold_preset;
    double min_conf = kDefaultMinConfidence;
    unsigned jobs = 1;

    // eval
    std::string group_by;

    // cam
    std::string frame;
    std::string target;
    int width = 0;
    int height = 0;
    std::string image;
    std::string overlay;

    // map
    double resolution = kDefaultResolution;
    double radius = kDefaultStampRadius;
    std::size_t window = kDefaultSmoothingWindow;
    std::size_t cell_px = 4;
};

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        s += (i ? std::string(1, sep) : "") + parts[i];
    }
    return s;
}

Provenance make_provenance(std::uint64_t seed, const std::string& canonical) {
    Provenance p;
    p.seed = seed;
    p.config_hash = stable_hash(canonical);
    return p;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write '" + path + "'");
    }
    return f;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) {
        throw DataError(what + " '" + path + "' does not exist");
    }
}

ModelKind parse_model(const std::string& name) {
    const auto kind = parse_model_kind(name);
    if (!kind) {
        throw UsageError("unknown model '" + name + "' (scene, object, attention, combined, nbest)");
    }
    return *kind;
}

std::string role_of(ModelKind kind) {
    switch (kind) {
    case ModelKind::scene_only: return "scene";
    case ModelKind::combined: return "combined";
    case ModelKind::scene_attention: return "attention";
    default: throw UsageError("model '" + std::string(to_string(kind)) + "' has no trainable head");
    }
}

fs::path head_path(const std::string& dir, const std::string& role) {
    return fs::path(dir) / (role + ".head");
}

double resolve_threshold(const Options& o) {
    if (o.threshold) {
        if (!(*o.threshold >= 0.0 && *o.threshold <= 1.0)) {
            throw UsageError("--threshold must lie in [0,1]");
        }
        return *o.threshold;
    }
    if (!o.threshold_preset.empty()) {
        const auto t = threshold_preset(o.threshold_preset);
        if (!t) {
            throw UsageError("unknown threshold preset '" + o.threshold_preset + "' (places, sun)");
        }
        return *t;
    }
    return kPlacesThreshold;
}

std::optional<LinearHead> load_role(const std::string& dir, const std::string& role) {
    if (dir.empty()) {
        return std::nullopt;
    }
    const fs::path p = head_path(dir, role);
    if (!fs::exists(p)) {
        return std::nullopt;
    }
    return load_head(p).head;
}

/// Loads whatever the model needs; missing pieces surface from predict().
ModelBundle make_bundle(const Options& o, ModelKind kind, const ClassSet& data_classes) {
    ModelBundle b;
    b.threshold = resolve_threshold(o);
    b.min_conf = o.min_conf;
    if (!o.heads.empty() && !fs::is_directory(o.heads)) {
        throw DataError("heads directory '" + o.heads + "' does not exist");
    }
    if (kind == ModelKind::scene_only || kind == ModelKind::n_best) {
        b.scene_head = load_role(o.heads, "scene");
    }
    if (kind == ModelKind::combined) {
        b.combined_head = load_role(o.heads, "combined");
    }
    if (kind == ModelKind::scene_attention) {
        b.attention_head = load_role(o.heads, "attention");
    }
    if (kind == ModelKind::object_only || kind == ModelKind::n_best) {
        const ClassSet& classes = b.scene_head ? b.scene_head->class_set() : data_classes;
        if (!o.codebook.empty()) {
            require_file(o.codebook, "codebook");
            b.codebook = load_codebook(o.codebook, classes);
        } else {
            b.codebook = builtin_codebook(classes);
        }
    }
    return b;
}

std::vector<Prediction> predict_all(const std::vector<FrameRecord>& frames, ModelKind kind,
                                    const ModelBundle& bundle, unsigned jobs) {
    std::vector<std::optional<Prediction>> slots(frames.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            slots[i] = predict(frames[i], kind, bundle);
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(frames.size(), 1));
    if (workers == 1) {
        work(0, frames.size());
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        const std::size_t chunk = (frames.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(frames.size(), w * chunk);
            const std::size_t end = std::min(frames.size(), begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    work(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    std::vector<Prediction> out;
    out.reserve(frames.size());
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

Manifest load_one(const std::string& path) {
    require_file(path, "manifest");
    return load_manifest(path);
}

std::string single_manifest(const Options& o) {
    if (o.manifests.size() != 1) {
        throw UsageError("exactly one --manifest is required");
    }
    return o.manifests.front();
}

ModelKind single_model(const Options& o, std::optional<ModelKind> fallback = std::nullopt) {
    if (o.models.empty() && fallback) {
        return *fallback;
    }
    if (o.models.size() != 1) {
        throw UsageError("exactly one --model is required");
    }
    return parse_model(o.models.front());
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const Options& o, std::ostream& out) {
    SceneModelSet model = [&] {
        if (!o.preset_file.empty()) {
            require_file(o.preset_file, "preset file");
            return load_preset(o.preset_file);
        }
        auto p = builtin_preset(o.preset);
        if (!p) {
            throw UsageError("unknown preset '" + o.preset + "' (home7, office5)");
        }
        return *p;
    }();
    if (!o.blob_shape.empty()) {
        if (o.blob_shape.size() != 3) {
            throw UsageError("--blob-shape takes C H W");
        }
        model = with_blobs(std::move(model), {o.blob_shape[0], o.blob_shape[1], o.blob_shape[2]});
    }
    if (!o.dump_preset.empty()) {
        save_preset(o.dump_preset, model);
    }
    if (o.out.empty()) {
        if (o.dump_preset.empty()) {
            throw UsageError("--out is required");
        }
        return kExitOk;
    }
    if (o.n == 0) {
        throw UsageError("--n must be at least 1");
    }
    Manifest m;
    if (o.tour) {
        std::vector<TourRoom> rooms;
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
            TourRoom r;
            r.scene = model.classes.name(c);
            r.x_min = 4.0 * static_cast<double>(c);
            r.x_max = r.x_min + 4.0;
            r.y_min = 0.0;
            r.y_max = 3.0;
            r.frames = o.n;
            rooms.push_back(r);
        }
        m = generate_tour(model, rooms, o.seed);
    } else {
        m = generate(model, o.n, o.seed);
    }
    save_manifest(o.out, m);
    out << "wrote " << m.frames.size() << " frames to " << o.out << '\n';
    return kExitOk;
}

// ---- train ----------------------------------------------------------------

std::string report_csv(const TrainReport& r, const Provenance& p) {
    std::ostringstream s;
    s << "# " << to_json(p).dump() << '\n';
    s << "epoch,learning_rate,mean_loss,train_accuracy,val_accuracy\n";
    char buf[160];
    for (const auto& e : r.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,", e.epoch, e.learning_rate,
                      e.mean_loss, e.train_accuracy);
        s << buf;
        if (e.val_accuracy) {
            std::snprintf(buf, sizeof buf, "%.17g", *e.val_accuracy);
            s << buf;
        }
        s << '\n';
    }
    return s.str();
}

int cmd_train(const Options& o, std::ostream& out) {
    const ModelKind kind = single_model(o);
    const std::string role = role_of(kind);
    if (o.heads.empty()) {
        throw UsageError("--heads is required");
    }
    const Manifest train_m = load_one(single_manifest(o));
    std::optional<Manifest> val_m;
    if (!o.val.empty()) {
        require_file(o.val, "validation manifest");
        val_m = load_manifest(o.val, train_m.header.class_set);
    }

    TrainConfig cfg = kind == ModelKind::combined ? TrainConfig::combined_schedule()
                                                  : TrainConfig::scene_schedule();
    cfg.seed = o.seed;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.lr_drop_every) cfg.lr_drop_every = *o.lr_drop_every;
    if (o.lr) cfg.lr0 = *o.lr;
    if (o.momentum) cfg.momentum = *o.momentum;
    if (o.weight_decay) cfg.weight_decay = *o.weight_decay;
    if (o.batch) cfg.batch_size = *o.batch;
    cfg.validate();

    const ClassSet& classes = train_m.header.class_set;
    const LabeledData data = make_dataset(kind, train_m.frames, classes, o.min_conf);
    std::optional<LabeledData> val;
    if (val_m) {
        val = make_dataset(kind, val_m->frames, classes, o.min_conf);
    }
    const TrainResult result = train(data, cfg, val ? &*val : nullptr);

    const std::string canonical = role + "|" + cfg.canonical() + "|" +
                                  std::to_string(o.min_conf) + "|" +
                                  train_m.header.provenance.value_or(Provenance{}).config_hash;
    const Provenance prov = make_provenance(o.seed, canonical);
    fs::create_directories(o.heads);
    HeadCheckpoint ckpt{result.head, role, cfg.seed, prov.config_hash, prov};
    save_head(head_path(o.heads, role), ckpt);

    const std::string report_path =
        o.report.empty() ? (fs::path(o.heads) / (role + ".report.csv")).string() : o.report;
    open_out(report_path) << report_csv(result.report, prov);

    const auto& last = result.report.epochs.back();
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s head: %zu epochs, loss %.4f -> %.4f, train acc %.1f%%",
                  role.c_str(), result.report.epochs.size(), result.report.initial_loss,
                  last.mean_loss, 100.0 * last.train_accuracy);
    out << buf;
    if (last.val_accuracy) {
        std::snprintf(buf, sizeof buf, ", val acc %.1f%%", 100.0 * *last.val_accuracy);
        out << buf;
    }
    out << '\n';
    return kExitOk;
}

// ---- predict --------------------------------------------------------------

int cmd_predict(const Options& o, std::ostream& out) {
    const ModelKind kind = single_model(o);
    const Manifest m = load_one(single_manifest(o));
    const ModelBundle bundle = make_bundle(o, kind, m.header.class_set);
    const ClassSet& classes = bundle.output_classes(kind);
    const auto preds = predict_all(m.frames, kind, bundle, o.jobs);

    std::ostringstream canonical;
    canonical << to_string(kind) << '|' << bundle.threshold << '|' << bundle.min_conf << '|'
              << o.codebook << '|' << m.header.provenance.value_or(Provenance{}).config_hash;
    ordered_json header = {{"type", "header"},
                           {"class_set", classes.names()},
                           {"model", to_string(kind)},
                           {"provenance", to_json(make_provenance(o.seed, canonical.str()))}};
    if (kind == ModelKind::n_best) {
        header["threshold"] = bundle.threshold;
    }
    std::ostringstream body;
    body << header.dump() << '\n';
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        const auto values = p.posterior.values();
        ordered_json rec = {{"type", "prediction"},
                            {"frame_id", m.frames[i].frame_id},
                            {"label", p.label.name},
                            {"posterior", std::vector<double>(values.begin(), values.end())},
                            {"source", to_string(p.source)}};
        body << rec.dump() << '\n';
    }
    if (o.out.empty() || o.out == "-") {
        out << body.str();
    } else {
        open_out(o.out) << body.str();
    }
    return kExitOk;
}

// ---- eval -----------------------------------------------------------------

std::string group_key(const FrameRecord& f) {
    const auto slash = f.frame_id.find('/');
    return slash == std::string::npos ? std::string() : f.frame_id.substr(0, slash);
}

int cmd_eval(const Options& o, std::ostream& out) {
    if (o.manifests.empty()) {
        throw UsageError("--manifest is required");
    }
    if (o.models.empty()) {
        throw UsageError("--model is required");
    }
    std::vector<ModelKind> kinds;
    for (const auto& name : o.models) {
        kinds.push_back(parse_model(name));
    }
    std::vector<std::pair<std::string, Manifest>> inputs;
    for (const auto& path : o.manifests) {
        inputs.emplace_back(fs::path(path).stem().string(), load_one(path));
    }

    std::string text;
    std::string csv;
    std::ostringstream canonical;
    canonical << join(o.models, ',') << '|' << join(o.manifests, ',') << '|' << o.group_by << '|'
              << resolve_threshold(o) << '|' << o.min_conf << '|' << o.codebook;
    for (const auto& [key, m] : inputs) {
        canonical << '|' << m.header.provenance.value_or(Provenance{}).config_hash;
    }

    if (o.group_by.empty()) {
        std::vector<FrameRecord> all;
        for (const auto& [key, m] : inputs) {
            all.insert(all.end(), m.frames.begin(), m.frames.end());
        }
        std::vector<std::pair<std::string, EvalResult>> columns;
        for (auto kind : kinds) {
            const ModelBundle bundle = make_bundle(o, kind, inputs.front().second.header.class_set);
            columns.emplace_back(std::string(to_string(kind)), evaluate(all, kind, bundle, o.jobs));
        }
        const ResultTable table = make_table(columns);
        text = table.render_text();
        csv = table.render_csv();
    } else {
        if (kinds.size() != 1) {
            throw UsageError("--group-by evaluates a single --model");
        }
        std::vector<FrameGroup> groups;
        if (o.group_by == "file") {
            for (const auto& [key, m] : inputs) {
                groups.push_back({key, m.frames});
            }
        } else if (o.group_by == "prefix") {
            std::map<std::string, std::vector<FrameRecord>> by_key;
            for (const auto& [key, m] : inputs) {
                for (const auto& f : m.frames) {
                    by_key[group_key(f)].push_back(f);
                }
            }
            for (auto& [key, frames] : by_key) {
                groups.push_back({key, std::move(frames)});
            }
        } else {
            throw UsageError("--group-by takes 'file' or 'prefix'");
        }
        const ModelBundle bundle = make_bundle(o, kinds.front(), inputs.front().second.header.class_set);
        const ResultTable table = make_table(grouped_evaluate(groups, kinds.front(), bundle, o.jobs));
        text = table.render_text();
        csv = table.render_csv();
    }
    out << text;
    if (!o.out.empty()) {
        open_out(o.out) << "# " << to_json(make_provenance(o.seed, canonical.str())).dump() << '\n'
                        << csv;
    }
    return kExitOk;
}

// ---- cam ------------------------------------------------------------------

int cmd_cam(const Options& o, std::ostream& out) {
    if (o.out.empty()) {
        throw UsageError("--out is required");
    }
    if (o.heads.empty()) {
        throw UsageError("--heads is required");
    }
    const Manifest m = load_one(single_manifest(o));
    const FrameRecord* frame = nullptr;
    for (const auto& f : m.frames) {
        if (o.frame.empty() || f.frame_id == o.frame) {
            frame = &f;
            break;
        }
    }
    if (!frame) {
        throw DataError("frame '" + o.frame + "' is not in the manifest");
    }
    if (!frame->feature_blob) {
        throw DataError("frame '" + frame->frame_id + "' has no feature_blob");
    }
    const fs::path hp = head_path(o.heads, "attention");
    if (!fs::exists(hp)) {
        throw MissingAssetError("cam needs the attention head, expected at '" + hp.string() + "'");
    }
    const LinearHead head = load_head(hp).head;
    std::optional<std::size_t> target;
    if (!o.target.empty()) {
        target = head.class_set().find(o.target);
        if (!target) {
            throw DataError("unknown target scene '" + o.target + "'");
        }
    }
    ImageSize size = frame->image_size;
    if (o.width > 0) size.width = o.width;
    if (o.height > 0) size.height = o.height;

    const Heatmap heat = activation_map(*frame->feature_blob, head, target, size);
    std::ostringstream canonical;
    canonical << frame->frame_id << '|' << o.target << '|' << size.width << 'x' << size.height << '|'
              << load_head(hp).config_hash;
    const std::string prov = to_json(make_provenance(o.seed, canonical.str())).dump();
    write_png_gray(o.out, heat.values, {{"provenance", prov}, {"scene", heat.predicted.name}});
    if (!o.overlay.empty()) {
        if (o.image.empty()) {
            throw UsageError("--overlay needs --image");
        }
        require_file(o.image, "image");
        const RgbImage base = read_image(o.image);
        write_png(o.overlay, overlay_heatmap(base, heat.values), {{"provenance", prov}});
    }
    out << frame->frame_id << ": " << heat.predicted.name << '\n';
    return kExitOk;
}

// ---- map ------------------------------------------------------------------

int cmd_map(const Options& o, std::ostream& out) {
    if (o.out.empty()) {
        throw UsageError("--out is required");
    }
    const ModelKind kind = single_model(o, ModelKind::n_best);
    const Manifest m = load_one(single_manifest(o));
    const ModelBundle bundle = make_bundle(o, kind, m.header.class_set);
    const ClassSet& classes = bundle.output_classes(kind);
    const auto preds = predict_all(m.frames, kind, bundle, o.jobs);
    MapConfig cfg;
    cfg.resolution = o.resolution;
    cfg.radius = o.radius;
    cfg.window = o.window;
    const SemanticGrid grid = build_semantic_map(classes, m.frames, preds, cfg);
    const RenderedMap map = render(grid, default_palette(classes), o.cell_px);

    std::ostringstream canonical;
    canonical << to_string(kind) << '|' << cfg.resolution << '|' << cfg.radius << '|' << cfg.window
              << '|' << o.cell_px << '|' << bundle.threshold << '|'
              << m.header.provenance.value_or(Provenance{}).config_hash;
    const std::string prov = to_json(make_provenance(o.seed, canonical.str())).dump();
    if (fs::path(o.out).extension() == ".ppm") {
        write_ppm(o.out, map.image);
    } else {
        write_png(o.out, map.image, {{"provenance", prov}});
    }
    out << "map " << grid.width() << "x" << grid.height() << " cells, origin (" << grid.origin_x()
        << ", " << grid.origin_y() << ") m, written to " << o.out << '\n';
    return kExitOk;
}

// ---- validate -------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out) {
    if (o.manifests.empty()) {
        throw UsageError("--manifest is required");
    }
    for (const auto& path : o.manifests) {
        const Manifest m = load_one(path);
        std::size_t with_truth = 0, with_blob = 0, with_pose = 0;
        for (const auto& f : m.frames) {
            with_truth += f.truth.has_value();
            with_blob += f.feature_blob.has_value();
            with_pose += f.pose.has_value();
        }
        out << path << ": " << m.frames.size() << " frames, " << with_truth << " labelled, "
            << with_blob << " with blobs, " << with_pose << " posed\n";
    }
    return kExitOk;
}

// ---- wiring ---------------------------------------------------------------

void add_seed(CLI::App* app, Options& o) {
    app->add_option("--seed", o.seed, "Random seed (falls back to $DEDUCE_SEED)")
        ->envname("DEDUCE_SEED");
}

void add_inference(CLI::App* app, Options& o) {
    app->add_option("--heads", o.heads, "Directory holding scene/combined/attention .head files");
    app->add_option("--codebook", o.codebook, "Landmark codebook file (default: built-in table)");
    app->add_option("--threshold", o.threshold, "N-best scene confidence threshold");
    app->add_option("--threshold-preset", o.threshold_preset, "places (0.5) or sun (0.6)");
    app->add_option("--min-conf", o.min_conf, "Drop detections below this confidence");
    app->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::Range(1u, 256u));
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Indoor place categorization from scene features and object detections", "deduce"};
    app.set_config("--config", "", "Read options from a TOML/INI file");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    auto* synth = app.add_subcommand("synth", "Generate a synthetic manifest");
    synth->add_option("--preset", o.preset, "Built-in preset: home7 or office5");
    synth->add_option("--preset-file", o.preset_file, "Preset file (overrides --preset)");
    synth->add_option("--dump-preset", o.dump_preset, "Write the preset to this file");
    synth->add_option("--n", o.n, "Frames per scene (per room with --tour)");
    synth->add_option("--blob-shape", o.blob_shape, "Add feature blobs of shape C H W")
        ->expected(3);
    synth->add_flag("--tour", o.tour, "Posed tour through one room per scene");
    synth->add_option("--out", o.out, "Output manifest");
    add_seed(synth, o);

    auto* train_cmd = app.add_subcommand("train", "Train a linear head");
    train_cmd->add_option("--model", o.models, "scene, combined or attention")->required();
    train_cmd->add_option("--manifest", o.manifests, "Training manifest")->required();
    train_cmd->add_option("--val", o.val, "Validation manifest");
    train_cmd->add_option("--heads", o.heads, "Output directory")->required();
    train_cmd->add_option("--report", o.report, "Per-epoch CSV (default: <heads>/<role>.report.csv)");
    train_cmd->add_option("--epochs", o.epochs, "Epochs (default 90, combined 9)");
    train_cmd->add_option("--lr-drop-every", o.lr_drop_every, "Divide the rate every N epochs");
    train_cmd->add_option("--lr", o.lr, "Initial learning rate");
    train_cmd->add_option("--momentum", o.momentum, "Momentum");
    train_cmd->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
    train_cmd->add_option("--batch", o.batch, "Minibatch size");
    train_cmd->add_option("--min-conf", o.min_conf, "Detection confidence cut for the object one-hot");
    add_seed(train_cmd, o);

    auto* predict_cmd = app.add_subcommand("predict", "Label every frame of a manifest");
    predict_cmd->add_option("--model", o.models, "scene, object, attention, combined or nbest")
        ->required();
    predict_cmd->add_option("--manifest", o.manifests, "Input manifest")->required();
    predict_cmd->add_option("--out", o.out, "Output file (default: stdout)");
    add_inference(predict_cmd, o);
    add_seed(predict_cmd, o);

    auto* eval_cmd = app.add_subcommand("eval", "Per-scene accuracy table");
    eval_cmd->add_option("--model", o.models, "One or more models (table columns)")->required();
    eval_cmd->add_option("--manifest", o.manifests, "One or more labelled manifests")->required();
    eval_cmd->add_option("--group-by", o.group_by, "file or prefix: one column per group");
    eval_cmd->add_option("--out", o.out, "CSV output");
    add_inference(eval_cmd, o);
    add_seed(eval_cmd, o);

    auto* cam_cmd = app.add_subcommand("cam", "Class activation heatmap of one frame");
    cam_cmd->add_option("--manifest", o.manifests, "Manifest with feature blobs")->required();
    cam_cmd->add_option("--heads", o.heads, "Directory holding attention.head")->required();
    cam_cmd->add_option("--frame", o.frame, "Frame id (default: first frame)");
    cam_cmd->add_option("--target", o.target, "Scene to explain (default: predicted)");
    cam_cmd->add_option("--width", o.width, "Heatmap width (default: frame image width)");
    cam_cmd->add_option("--height", o.height, "Heatmap height (default: frame image height)");
    cam_cmd->add_option("--out", o.out, "Grayscale PNG")->required();
    cam_cmd->add_option("--image", o.image, "Source image (PNG or PPM) for the overlay");
    cam_cmd->add_option("--overlay", o.overlay, "False-colour overlay PNG");
    add_seed(cam_cmd, o);

    auto* map_cmd = app.add_subcommand("map", "Semantic map from a posed manifest");
    map_cmd->add_option("--manifest", o.manifests, "Posed manifest")->required();
    map_cmd->add_option("--model", o.models, "Model labelling the frames (default nbest)");
    map_cmd->add_option("--resolution", o.resolution, "Cell size in metres");
    map_cmd->add_option("--radius", o.radius, "Stamp radius in metres");
    map_cmd->add_option("--window", o.window, "Smoothing window (odd)");
    map_cmd->add_option("--cell-px", o.cell_px, "Pixels per cell")->check(CLI::Range(1u, 64u));
    map_cmd->add_option("--out", o.out, "PNG (or .ppm) output")->required();
    add_inference(map_cmd, o);
    add_seed(map_cmd, o);

    auto* validate_cmd = app.add_subcommand("validate", "Check manifests against the schema");
    validate_cmd->add_option("--manifest", o.manifests, "Manifest(s)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) {
            return kExitOk;
        }
        err << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(o, out);
        if (train_cmd->parsed()) return cmd_train(o, out);
        if (predict_cmd->parsed()) return cmd_predict(o, out);
        if (eval_cmd->parsed()) return cmd_eval(o, out);
        if (cam_cmd->parsed()) return cmd_cam(o, out);
        if (map_cmd->parsed()) return cmd_map(o, out);
        if (validate_cmd->parsed()) return cmd_validate(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"deduce"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace deduce::cli
