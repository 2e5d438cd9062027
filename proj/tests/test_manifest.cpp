#include <doctest.h>

#include <random>
#include <sstream>

#include "deduce/coco.hpp"
#include "deduce/error.hpp"
#include "deduce/manifest.hpp"
#include "support.hpp"

using namespace deduce;

namespace {

const std::string kHeader =
    R"({"type":"header","class_set":["bathroom","bedroom","corridor","dining_room","kitchen","living_room","office"],"feature_dim":3,"blob_shape":null})";

Manifest parse(const std::string& text, const ClassSet* against = nullptr) {
    std::istringstream in(text);
    return read_manifest(in, "test.mf", against);
}

std::string frame_line(const std::string& id, const std::string& extra = "") {
    return R"({"type":"frame","frame_id":")" + id +
           R"(","scene_feature":[0.1,0.2,0.3],"feature_blob":null,"detections":[],"truth":"kitchen","pose":null,"image_size":[224,224])" +
           extra + "}";
}

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

FrameRecord random_frame(std::mt19937_64& rng, std::size_t i, std::size_t dim,
                         std::optional<BlobShape> blob) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FrameRecord f;
    f.frame_id = "f/" + std::to_string(i);
    f.scene_feature = testing::random_vector(rng, dim, 3.0);
    if (blob && i % 2 == 0) {
        std::vector<double> v(blob->size());
        for (auto& x : v) {
            x = u(rng) * 1e-3;
        }
        f.feature_blob = FeatureBlob(*blob, v);
    }
    const std::size_t n_det = i % 4;
    for (std::size_t d = 0; d < n_det; ++d) {
        const double x = u(rng) * 0.5, y = u(rng) * 0.5;
        f.detections.push_back({static_cast<std::size_t>(rng() % 80), u(rng),
                                {x, y, u(rng) * 0.5, u(rng) * 0.5}});
    }
    if (i % 3 != 0) {
        f.truth = make_label(ClassSet::home7(), i % 7);
    }
    if (i % 5 != 1) {
        f.pose = Pose{u(rng) * 10 - 5, u(rng) * 10 - 5, static_cast<double>(i) * 0.1};
    }
    f.image_size = {static_cast<int>(100 + i), static_cast<int>(50 + i)};
    return f;
}

} // namespace

TEST_CASE("well-formed records load in order") {
    const auto m = parse(kHeader + "\n" + frame_line("a") + "\n" + frame_line("b") + "\n\n" +
                         frame_line("c") + "\n");
    REQUIRE(m.frames.size() == 3);
    CHECK(m.frames[0].frame_id == "a");
    CHECK(m.frames[2].frame_id == "c");
    CHECK(m.frames[1].truth->name == "kitchen");
    CHECK(m.frames[1].truth->id == 4);
    CHECK(m.header.feature_dim == 3);
    CHECK_FALSE(m.header.blob_shape);
}

TEST_CASE("feature dimension mismatch names the frame") {
    const std::string bad =
        R"({"type":"frame","frame_id":"short_one","scene_feature":[0.1,0.2],"detections":[],"truth":null})";
    const auto msg = error_of([&] { parse(kHeader + "\n" + bad + "\n"); });
    CHECK(msg.find("short_one") != std::string::npos);
    CHECK_THROWS_AS(parse(kHeader + "\n" + bad + "\n"), DataError);
}

TEST_CASE("unknown truth label names the frame and the label") {
    const std::string bad = R"({"type":"frame","frame_id":"x7","scene_feature":[0,0,0],"detections":[],"truth":"garage"})";
    const auto msg = error_of([&] { parse(kHeader + "\n" + bad + "\n"); });
    CHECK(msg.find("x7") != std::string::npos);
    CHECK(msg.find("garage") != std::string::npos);
}

TEST_CASE("schema errors carry line and field") {
    const std::string missing = R"({"type":"frame","frame_id":"m","detections":[]})";
    try {
        parse(kHeader + "\n" + frame_line("ok") + "\n" + missing + "\n");
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.line() == 3);
        CHECK(e.field() == "scene_feature");
        CHECK(std::string(e.what()).find("test.mf:3") != std::string::npos);
    }

    CHECK_THROWS_AS(parse(frame_line("a") + "\n"), SchemaError);
    CHECK_THROWS_AS(parse(""), SchemaError);
    CHECK_THROWS_AS(parse(kHeader + "\n" + kHeader + "\n"), SchemaError);
    CHECK_THROWS_AS(parse(kHeader + "\n{\"type\":\"frame\",\n"), SchemaError);
    CHECK_THROWS_AS(parse(kHeader + "\n{\"type\":\"mystery\"}\n"), SchemaError);

    const std::string bad_det =
        R"({"type":"frame","frame_id":"d","scene_feature":[0,0,0],"detections":[{"name":"sofa","confidence":0.9,"bbox":[0,0,0.1,0.1]}]})";
    try {
        parse(kHeader + "\n" + bad_det + "\n");
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.field() == "detections.name");
    }

    const std::string bad_box =
        R"({"type":"frame","frame_id":"d","scene_feature":[0,0,0],"detections":[{"name":"bed","confidence":0.9,"bbox":[0.8,0,0.5,0.1]}]})";
    CHECK_THROWS_AS(parse(kHeader + "\n" + bad_box + "\n"), SchemaError);
}

TEST_CASE("pose timestamps must not decrease") {
    const auto posed = [](const std::string& id, double t) {
        return R"({"type":"frame","frame_id":")" + id +
               R"(","scene_feature":[0,0,0],"detections":[],"pose":[0,0,)" + std::to_string(t) + "]}";
    };
    CHECK_NOTHROW(parse(kHeader + "\n" + posed("a", 1) + "\n" + posed("b", 1) + "\n"));
    const auto msg = error_of([&] { parse(kHeader + "\n" + posed("a", 2) + "\n" + posed("b", 1) + "\n"); });
    CHECK(msg.find("'b'") != std::string::npos);
}

TEST_CASE("blob presence must match the header") {
    const std::string with_blob =
        R"({"type":"frame","frame_id":"b","scene_feature":[0,0,0],"feature_blob":[[[1]]],"detections":[]})";
    CHECK_THROWS_AS(parse(kHeader + "\n" + with_blob + "\n"), DataError);

    const std::string blob_header =
        R"({"type":"header","class_set":["a","b"],"feature_dim":3,"blob_shape":[1,1,2]})";
    CHECK_THROWS_AS(parse(blob_header + "\n" + with_blob + "\n"), DataError);
    const std::string good =
        R"({"type":"frame","frame_id":"b","scene_feature":[0,0,0],"feature_blob":[[[1,2]]],"detections":[]})";
    const auto m = parse(blob_header + "\n" + good + "\n");
    CHECK((*m.frames[0].feature_blob)(0, 0, 1) == 2.0);
}

TEST_CASE("truth can be resolved against another class set") {
    const std::string h = R"({"type":"header","class_set":["x","y"],"feature_dim":3})";
    const auto home = ClassSet::home7();
    const auto m = parse(h + "\n" + frame_line("a") + "\n", &home);
    CHECK(m.frames[0].truth->id == 4);
    CHECK_THROWS_AS(parse(h + "\n" + frame_line("a") + "\n"), DataError);
}

TEST_CASE("write then read is the identity") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Manifest m;
        m.header.feature_dim = 1 + trial % 6;
        if (trial % 2) {
            m.header.blob_shape = BlobShape{2, 3, 2};
        }
        Provenance p;
        p.seed = static_cast<std::uint64_t>(trial);
        p.config_hash = stable_hash(std::to_string(trial));
        m.header.provenance = p;
        m.header.extras["checkpoint"] = "resnet18-" + std::to_string(trial);
        for (std::size_t i = 0; i < 12; ++i) {
            m.frames.push_back(random_frame(rng, i, m.header.feature_dim, m.header.blob_shape));
        }
        std::ostringstream out;
        write_manifest(out, m);
        std::istringstream in(out.str());
        const Manifest back = read_manifest(in, "roundtrip");
        CHECK(back == m);

        std::ostringstream again;
        write_manifest(again, back);
        CHECK(again.str() == out.str());
    }
}

TEST_CASE("header extras survive and unknown frame keys are ignored") {
    const std::string h =
        R"({"type":"header","class_set":["a","b"],"feature_dim":1,"checkpoint":"wrn18","notes":{"k":1}})";
    const std::string f = R"({"type":"frame","frame_id":"z","scene_feature":[1],"detections":[],"extra":42})";
    const auto m = parse(h + "\n" + f + "\n");
    CHECK(m.header.extras["checkpoint"] == "wrn18");
    CHECK(m.header.extras["notes"]["k"] == 1);
    std::ostringstream out;
    write_manifest(out, m);
    CHECK(out.str().find("\"checkpoint\":\"wrn18\"") != std::string::npos);
    CHECK(out.str().find("extra") == std::string::npos);
}

TEST_CASE("extractor output is accepted") {
    const auto m = load_manifest(std::string(DEDUCE_FIXTURES) + "/extractor_sample.mf");
    REQUIRE(m.frames.size() == 3);
    CHECK(m.header.extras.at("checkpoint") == "wideresnet18_places365");
    CHECK(m.header.provenance->tool == "extract.py");
    CHECK(m.header.blob_shape == BlobShape{2, 2, 2});
    CHECK(m.frames[0].detections.size() == 2);
    CHECK(m.frames[1].detections.empty());
    CHECK(m.frames[1].truth->name == "corridor");
    CHECK_FALSE(m.frames[2].truth);
    CHECK(m.frames[0].image_size == ImageSize{640, 480});
}

TEST_CASE("missing file") {
    CHECK_THROWS_AS(load_manifest("/nonexistent/x.mf"), DataError);
}
