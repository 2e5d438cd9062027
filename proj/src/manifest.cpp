#include "deduce/manifest.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "deduce/coco.hpp"
#include "deduce/error.hpp"

namespace deduce {

using json = nlohmann::ordered_json;

namespace {

class RecordReader {
public:
    RecordReader(const std::string& source, std::size_t line) : source_(source), line_(line) {}

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw SchemaError(source_, line_, field, what);
    }

    const json& require(const json& obj, const char* key) const {
        const auto it = obj.find(key);
        if (it == obj.end()) {
            fail(key, "missing");
        }
        return *it;
    }

    std::string string_field(const json& obj, const char* key) const {
        const json& v = require(obj, key);
        if (!v.is_string()) {
            fail(key, "expected a string");
        }
        return v.get<std::string>();
    }

    double number(const json& v, const std::string& field) const {
        if (!v.is_number()) {
            fail(field, "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(field, "value is not finite");
        }
        return d;
    }

    std::size_t count(const json& v, const std::string& field) const {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            fail(field, "expected a non-negative integer");
        }
        return v.get<std::size_t>();
    }

    std::vector<double> numbers(const json& v, const std::string& field) const {
        if (!v.is_array()) {
            fail(field, "expected an array of numbers");
        }
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto& e : v) {
            out.push_back(number(e, field));
        }
        return out;
    }

private:
    const std::string& source_;
    std::size_t line_;
};

ManifestHeader parse_header(const json& rec, const RecordReader& rd) {
    ManifestHeader h;
    const json& cs = rd.require(rec, "class_set");
    if (!cs.is_array()) {
        rd.fail("class_set", "expected an array of scene names");
    }
    std::vector<std::string> names;
    for (const auto& n : cs) {
        if (!n.is_string()) {
            rd.fail("class_set", "expected an array of scene names");
        }
        names.push_back(n.get<std::string>());
    }
    try {
        h.class_set = ClassSet(std::move(names));
    } catch (const DataError& e) {
        rd.fail("class_set", e.what());
    }

    if (auto it = rec.find("feature_dim"); it != rec.end() && !it->is_null()) {
        h.feature_dim = rd.count(*it, "feature_dim");
        if (h.feature_dim == 0) {
            rd.fail("feature_dim", "must be positive");
        }
    }
    if (auto it = rec.find("blob_shape"); it != rec.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 3) {
            rd.fail("blob_shape", "expected [C,H,W] or null");
        }
        BlobShape s{rd.count((*it)[0], "blob_shape"), rd.count((*it)[1], "blob_shape"),
                    rd.count((*it)[2], "blob_shape")};
        if (s.size() == 0) {
            rd.fail("blob_shape", "dimensions must be positive");
        }
        h.blob_shape = s;
    }
    if (auto it = rec.find("provenance"); it != rec.end() && !it->is_null()) {
        try {
            h.provenance = provenance_from_json(*it);
        } catch (const json::exception& e) {
            rd.fail("provenance", e.what());
        }
    }
    for (auto it = rec.begin(); it != rec.end(); ++it) {
        const auto& k = it.key();
        if (k != "type" && k != "class_set" && k != "feature_dim" && k != "blob_shape" &&
            k != "provenance") {
            h.extras[k] = it.value();
        }
    }
    return h;
}

FeatureBlob parse_blob(const json& v, const BlobShape& shape, const RecordReader& rd,
                       const std::string& frame_id) {
    const std::string field = "feature_blob";
    auto mismatch = [&] {
        throw DataError("frame '" + frame_id + "': feature_blob shape does not match header [" +
                        std::to_string(shape.channels) + "," + std::to_string(shape.height) + "," +
                        std::to_string(shape.width) + "]");
    };
    if (!v.is_array()) {
        rd.fail(field, "expected a nested [C][H][W] array");
    }
    if (v.size() != shape.channels) {
        mismatch();
    }
    std::vector<double> values;
    values.reserve(shape.size());
    for (const auto& plane : v) {
        if (!plane.is_array()) {
            rd.fail(field, "expected a nested [C][H][W] array");
        }
        if (plane.size() != shape.height) {
            mismatch();
        }
        for (const auto& row : plane) {
            auto r = rd.numbers(row, field);
            if (r.size() != shape.width) {
                mismatch();
            }
            values.insert(values.end(), r.begin(), r.end());
        }
    }
    return FeatureBlob(shape, std::move(values));
}

FrameRecord parse_frame(const json& rec, const ManifestHeader& header, const ClassSet& labels,
                        const RecordReader& rd) {
    FrameRecord f;
    f.frame_id = rd.string_field(rec, "frame_id");

    const auto feature = rd.numbers(rd.require(rec, "scene_feature"), "scene_feature");
    if (feature.size() != header.feature_dim) {
        throw DataError("frame '" + f.frame_id + "': scene_feature has " +
                        std::to_string(feature.size()) + " entries, expected " +
                        std::to_string(header.feature_dim));
    }
    f.scene_feature = Eigen::Map<const Eigen::VectorXd>(feature.data(),
                                                        static_cast<Eigen::Index>(feature.size()));

    if (auto it = rec.find("feature_blob"); it != rec.end() && !it->is_null()) {
        if (!header.blob_shape) {
            throw DataError("frame '" + f.frame_id +
                            "': feature_blob present but the header declares no blob_shape");
        }
        f.feature_blob = parse_blob(*it, *header.blob_shape, rd, f.frame_id);
    }

    const json& dets = rd.require(rec, "detections");
    if (!dets.is_array()) {
        rd.fail("detections", "expected an array");
    }
    for (const auto& d : dets) {
        if (!d.is_object()) {
            rd.fail("detections", "expected detection objects");
        }
        Detection det;
        const auto name = rd.string_field(d, "name");
        const auto idx = coco::index_of(name);
        if (!idx) {
            rd.fail("detections.name", "'" + name + "' is not a COCO-80 class");
        }
        det.object = *idx;
        det.confidence = rd.number(rd.require(d, "confidence"), "detections.confidence");
        const auto box = rd.numbers(rd.require(d, "bbox"), "detections.bbox");
        if (box.size() != 4) {
            rd.fail("detections.bbox", "expected [x,y,w,h]");
        }
        det.bbox = BBox{box[0], box[1], box[2], box[3]};
        try {
            validate(det);
        } catch (const DataError& e) {
            rd.fail("detections", e.what());
        }
        f.detections.push_back(det);
    }

    if (auto it = rec.find("truth"); it != rec.end() && !it->is_null()) {
        if (!it->is_string()) {
            rd.fail("truth", "expected a scene name or null");
        }
        const auto name = it->get<std::string>();
        const auto id = labels.find(name);
        if (!id) {
            throw DataError("frame '" + f.frame_id + "': unknown scene '" + name + "'");
        }
        f.truth = make_label(labels, *id);
    }

    if (auto it = rec.find("pose"); it != rec.end() && !it->is_null()) {
        const auto p = rd.numbers(*it, "pose");
        if (p.size() != 3) {
            rd.fail("pose", "expected [x,y,t]");
        }
        f.pose = Pose{p[0], p[1], p[2]};
    }

    if (auto it = rec.find("image_size"); it != rec.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 2) {
            rd.fail("image_size", "expected [w,h]");
        }
        const auto w = rd.count((*it)[0], "image_size");
        const auto h = rd.count((*it)[1], "image_size");
        if (w == 0 || h == 0) {
            rd.fail("image_size", "dimensions must be positive");
        }
        f.image_size = ImageSize{static_cast<int>(w), static_cast<int>(h)};
    }
    return f;
}

} // namespace

Manifest read_manifest(std::istream& in, const std::string& source_name,
                       const ClassSet* resolve_against) {
    Manifest m;
    bool have_header = false;
    std::optional<double> last_t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        RecordReader rd(source_name, lineno);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            rd.fail("<record>", std::string("malformed record: ") + e.what());
        }
        if (!rec.is_object()) {
            rd.fail("<record>", "expected an object");
        }
        const auto type = rd.string_field(rec, "type");
        if (type == "header") {
            if (have_header) {
                rd.fail("type", "duplicate header record");
            }
            m.header = parse_header(rec, rd);
            have_header = true;
        } else if (type == "frame") {
            if (!have_header) {
                rd.fail("type", "frame record before the header");
            }
            const ClassSet& labels = resolve_against ? *resolve_against : m.header.class_set;
            auto frame = parse_frame(rec, m.header, labels, rd);
            if (frame.pose) {
                if (last_t && frame.pose->t < *last_t) {
                    throw DataError("frame '" + frame.frame_id +
                                    "': pose timestamp decreases within the sequence");
                }
                last_t = frame.pose->t;
            }
            m.frames.push_back(std::move(frame));
        } else {
            rd.fail("type", "unknown record type '" + type + "'");
        }
    }
    if (!have_header) {
        throw SchemaError(source_name, lineno, "type", "no header record");
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open manifest '" + path.string() + "'");
    }
    return read_manifest(in, path.string());
}

Manifest load_manifest(const std::filesystem::path& path, const ClassSet& class_set) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open manifest '" + path.string() + "'");
    }
    return read_manifest(in, path.string(), &class_set);
}

json frame_to_json(const FrameRecord& f) {
    json j;
    j["type"] = "frame";
    j["frame_id"] = f.frame_id;
    j["scene_feature"] = std::vector<double>(f.scene_feature.data(),
                                             f.scene_feature.data() + f.scene_feature.size());
    if (f.feature_blob) {
        const auto& s = f.feature_blob->shape();
        json blob = json::array();
        for (std::size_t c = 0; c < s.channels; ++c) {
            json plane = json::array();
            for (std::size_t h = 0; h < s.height; ++h) {
                json row = json::array();
                for (std::size_t w = 0; w < s.width; ++w) {
                    row.push_back((*f.feature_blob)(c, h, w));
                }
                plane.push_back(std::move(row));
            }
            blob.push_back(std::move(plane));
        }
        j["feature_blob"] = std::move(blob);
    } else {
        j["feature_blob"] = nullptr;
    }
    json dets = json::array();
    for (const auto& d : f.detections) {
        json jd;
        jd["name"] = std::string(coco::names().at(d.object));
        jd["confidence"] = d.confidence;
        jd["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
        dets.push_back(std::move(jd));
    }
    j["detections"] = std::move(dets);
    j["truth"] = f.truth ? json(f.truth->name) : json(nullptr);
    j["pose"] = f.pose ? json{f.pose->x, f.pose->y, f.pose->t} : json(nullptr);
    j["image_size"] = {f.image_size.width, f.image_size.height};
    return j;
}

void write_manifest(std::ostream& out, const Manifest& m) {
    json h;
    h["type"] = "header";
    h["class_set"] = m.header.class_set.names();
    h["feature_dim"] = m.header.feature_dim;
    if (m.header.blob_shape) {
        const auto& s = *m.header.blob_shape;
        h["blob_shape"] = {s.channels, s.height, s.width};
    } else {
        h["blob_shape"] = nullptr;
    }
    if (m.header.provenance) {
        h["provenance"] = to_json(*m.header.provenance);
    }
    for (auto it = m.header.extras.begin(); it != m.header.extras.end(); ++it) {
        h[it.key()] = it.value();
    }
    out << h.dump() << '\n';
    for (const auto& f : m.frames) {
        out << frame_to_json(f).dump() << '\n';
    }
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write manifest '" + path.string() + "'");
    }
    write_manifest(out, m);
    if (!out) {
        throw DataError("error while writing manifest '" + path.string() + "'");
    }
}

} // namespace deduce
