#include "deduce/codebook.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deduce/error.hpp"

namespace deduce {

Codebook::Codebook(ClassSet classes, const std::vector<Entry>& entries,
                   std::string_view absence_label)
    : classes_(std::move(classes)) {
    for (const auto& [object, scene] : entries) {
        const auto obj = coco::index_of(object);
        if (!obj) {
            throw DataError("codebook: '" + object + "' is not a COCO-80 class");
        }
        const auto sc = classes_.find(scene);
        if (!sc) {
            throw DataError("codebook: scene '" + scene + "' for object '" + object +
                            "' is not in the class set");
        }
        if (table_[*obj]) {
            throw DataError("codebook: object '" + object +
                            "' is associated with more than one scene");
        }
        table_[*obj] = *sc;
        entries_.emplace_back(object, scene);
    }
    const auto abs = classes_.find(absence_label);
    if (!abs) {
        throw DataError("codebook: absence scene '" + std::string(absence_label) +
                        "' is not in the class set");
    }
    absence_ = make_label(classes_, *abs);
}

std::optional<SceneLabel> Codebook::lookup(std::string_view object) const {
    const auto obj = coco::index_of(object);
    if (!obj || !table_[*obj]) {
        return std::nullopt;
    }
    return make_label(classes_, *table_[*obj]);
}

std::string Codebook::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [object, scene] : entries_) {
        j[object] = scene;
    }
    j["absence"] = absence_.name;
    return j.dump();
}

Codebook default_codebook() {
    return Codebook(ClassSet::home7(),
                    {
                        {"toilet", "bathroom"},
                        {"sink", "bathroom"},
                        {"bed", "bedroom"},
                        {"dining table", "dining_room"},
                        {"wine glass", "dining_room"},
                        {"bowl", "dining_room"},
                        {"oven", "kitchen"},
                        {"microwave", "kitchen"},
                        {"refrigerator", "kitchen"},
                        {"couch", "living_room"},
                        {"vase", "living_room"},
                        {"tv", "office"},
                        {"laptop", "office"},
                        {"keyboard", "office"},
                        {"mouse", "office"},
                    },
                    "corridor");
}

Codebook office5_codebook() {
    return Codebook(ClassSet::office5(),
                    {
                        {"tv", "conference_room"},
                        {"oven", "kitchen"},
                        {"microwave", "kitchen"},
                        {"refrigerator", "kitchen"},
                        {"couch", "living_room"},
                        {"vase", "living_room"},
                        {"laptop", "office"},
                        {"keyboard", "office"},
                        {"mouse", "office"},
                    },
                    "corridor");
}

std::optional<Codebook> builtin_codebook(const ClassSet& classes) {
    if (classes == ClassSet::home7()) {
        return default_codebook();
    }
    if (classes == ClassSet::office5()) {
        return office5_codebook();
    }
    return std::nullopt;
}

Codebook parse_codebook(std::string_view text, const ClassSet& classes, const std::string& source) {
    using json = nlohmann::ordered_json;
    std::set<std::string> seen;
    std::string duplicate;
    const json::parser_callback_t detect_duplicates =
        [&](int depth, json::parse_event_t event, json& parsed) {
            if (event == json::parse_event_t::key && depth == 1) {
                const auto key = parsed.get<std::string>();
                if (!seen.insert(key).second && duplicate.empty()) {
                    duplicate = key;
                }
            }
            return true;
        };
    json j;
    try {
        j = json::parse(text.begin(), text.end(), detect_duplicates);
    } catch (const json::parse_error& e) {
        throw DataError(source + ": malformed codebook: " + e.what());
    }
    if (!duplicate.empty()) {
        throw DataError(source + ": codebook lists '" + duplicate + "' more than once");
    }
    if (!j.is_object()) {
        throw DataError(source + ": codebook must be an object of object-to-scene pairs");
    }
    std::vector<Codebook::Entry> entries;
    std::optional<std::string> absence;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) {
            throw DataError(source + ": value for '" + it.key() + "' must be a scene name");
        }
        if (it.key() == "absence") {
            absence = it.value().get<std::string>();
        } else {
            entries.emplace_back(it.key(), it.value().get<std::string>());
        }
    }
    if (!absence) {
        throw DataError(source + ": codebook has no \"absence\" entry");
    }
    try {
        return Codebook(classes, entries, *absence);
    } catch (const DataError& e) {
        throw DataError(source + ": " + e.what());
    }
}

Codebook load_codebook(const std::filesystem::path& path, const ClassSet& classes) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open codebook '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_codebook(buf.str(), classes, path.string());
}

ObjectVote classify_objects(std::span<const Detection> detections, const Codebook& codebook,
                            double min_conf) {
    const auto& classes = codebook.class_set();
    std::vector<double> votes(classes.size(), 0.0);
    double total = 0.0;
    for (const auto& det : detections) {
        if (det.confidence < min_conf) {
            continue;
        }
        if (const auto scene = codebook.scene_of(det.object)) {
            votes[*scene] += det.confidence;
            total += det.confidence;
        }
    }
    if (total <= 0.0) {
        const auto& abs = codebook.absence_label();
        return {abs, Posterior::one_hot(classes.size(), abs.id), false};
    }
    for (double& v : votes) {
        v /= total;
    }
    const std::size_t best = argmax(votes);
    return {make_label(classes, best), Posterior(std::move(votes)), true};
}

} // namespace deduce
