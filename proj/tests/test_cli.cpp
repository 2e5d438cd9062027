#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "deduce/manifest.hpp"
#include "support.hpp"

using namespace deduce;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) {
    return std::string(DEDUCE_FIXTURES) + "/" + name;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("usage errors exit with 1") {
    auto r = run({});
    CHECK(r.code == cli::kExitUsage);
    CHECK(contains(r.err, "synth"));

    r = run({"bake"});
    CHECK(r.code == cli::kExitUsage);
    r = run({"synth", "--bogus"});
    CHECK(r.code == cli::kExitUsage);
    r = run({"train", "--model", "scene"});
    CHECK(r.code == cli::kExitUsage);
    CHECK(contains(r.err, "--manifest"));
    r = run({"synth", "--preset", "nope", "--out", "x.mf"});
    CHECK(r.code == cli::kExitUsage);
    CHECK(contains(r.err, "nope"));
    r = run({"map", "--manifest", "m.mf", "--out", "m.png", "--cell-px", "0"});
    CHECK(r.code == cli::kExitUsage);
}

TEST_CASE("help and version") {
    auto r = run({"--help"});
    CHECK(r.code == cli::kExitOk);
    for (const char* sub : {"synth", "train", "predict", "eval", "cam", "map", "validate"}) {
        CHECK(contains(r.out, sub));
    }
    r = run({"predict", "--help"});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "--threshold"));
    r = run({"--version"});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "0.1.0"));
}

TEST_CASE("data errors exit with 2") {
    testing::TempDir dir;
    auto r = run({"validate", "--manifest", (dir / "missing.mf").string()});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    testing::spit(dir / "bad.mf", "{\"type\":\"header\",\"class_set\":[\"a\",\"b\"],\"feature_dim\":2}\n"
                                  "{\"type\":\"frame\",\"frame_id\":\"f1\",\"scene_feature\":[1],\"detections\":[]}\n");
    r = run({"validate", "--manifest", (dir / "bad.mf").string()});
    CHECK(r.code == cli::kExitData);
    CHECK(contains(r.err, "f1"));

    r = run({"predict", "--model", "scene", "--manifest", fixture("extractor_sample.mf"), "--heads",
             (dir / "nowhere").string()});
    CHECK(r.code == cli::kExitData);
    r = run({"predict", "--model", "attention", "--manifest", fixture("extractor_sample.mf")});
    CHECK(r.code == cli::kExitData);
    CHECK(contains(r.err, "attention head"));
    r = run({"eval", "--model", "object", "--manifest", fixture("extractor_sample.mf")});
    CHECK(r.code == cli::kExitData);
    CHECK(contains(r.err, "no truth label"));
}

TEST_CASE("validate reports counts") {
    const auto r = run({"validate", "--manifest", fixture("extractor_sample.mf")});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "3 frames, 2 labelled, 3 with blobs, 0 posed"));
}

TEST_CASE("synth is reproducible") {
    testing::TempDir dir;
    const auto a = (dir / "a.mf").string(), b = (dir / "b.mf").string(), c = (dir / "c.mf").string();
    auto r = run({"synth", "--preset", "home7", "--n", "10", "--seed", "7", "--out", a});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(contains(r.out, "wrote 70 frames"));
    const auto m = load_manifest(a);
    CHECK(m.frames.size() == 70);
    CHECK(m.header.provenance->seed == 7u);
    CHECK(m.header.provenance->tool == "deduce");

    REQUIRE(run({"synth", "--preset", "home7", "--n", "10", "--seed", "7", "--out", b}).code == 0);
    CHECK(testing::slurp(a) == testing::slurp(b));
    REQUIRE(run({"synth", "--preset", "home7", "--n", "10", "--seed", "8", "--out", c}).code == 0);
    CHECK(testing::slurp(a) != testing::slurp(c));
    CHECK(testing::slurp(a).find("\"time") == std::string::npos);
}

TEST_CASE("seed from the environment and from a config file") {
    testing::TempDir dir;
    const auto flag = (dir / "flag.mf").string(), env = (dir / "env.mf").string(),
               conf = (dir / "conf.mf").string();
    REQUIRE(run({"synth", "--preset", "office5", "--n", "3", "--seed", "5", "--out", flag}).code == 0);
    ::setenv("DEDUCE_SEED", "5", 1);
    const auto r = run({"synth", "--preset", "office5", "--n", "3", "--out", env});
    ::unsetenv("DEDUCE_SEED");
    REQUIRE(r.code == 0);
    CHECK(testing::slurp(flag) == testing::slurp(env));

    testing::spit(dir / "deduce.toml", "[synth]\npreset = \"office5\"\nn = 3\nseed = 5\n");
    REQUIRE(run({"--config", (dir / "deduce.toml").string(), "synth", "--out", conf}).code == 0);
    CHECK(testing::slurp(flag) == testing::slurp(conf));
}

TEST_CASE("presets can be dumped and reused") {
    testing::TempDir dir;
    const auto preset = (dir / "p.json").string();
    auto r = run({"synth", "--preset", "office5", "--dump-preset", preset});
    REQUIRE(r.code == 0);
    const auto a = (dir / "a.mf").string(), b = (dir / "b.mf").string();
    REQUIRE(run({"synth", "--preset", "office5", "--n", "2", "--seed", "1", "--out", a}).code == 0);
    REQUIRE(run({"synth", "--preset-file", preset, "--n", "2", "--seed", "1", "--out", b}).code == 0);
    CHECK(testing::slurp(a) == testing::slurp(b));
}

TEST_CASE("object predictions need no heads") {
    testing::TempDir dir;
    const auto out = (dir / "p.jsonl").string();
    const auto r = run({"predict", "--model", "object", "--manifest", fixture("extractor_sample.mf"), "--out", out});
    REQUIRE(r.code == 0);
    std::istringstream lines(testing::slurp(out));
    std::string line;
    std::vector<nlohmann::json> records;
    while (std::getline(lines, line)) {
        records.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(records.size() == 4);
    CHECK(records[0]["type"] == "header");
    CHECK(records[0]["model"] == "object");
    CHECK(records[0]["provenance"]["tool"] == "deduce");
    CHECK(records[1]["type"] == "prediction");
    CHECK(records[1]["frame_id"] == "img_0001.jpg");
    CHECK(records[2]["label"] == "corridor");
    CHECK(records[2]["source"] == "objects");
    CHECK(records[2]["posterior"].size() == 7);

    // Same run to stdout gives the same bytes.
    const auto again = run({"predict", "--model", "object", "--manifest", fixture("extractor_sample.mf")});
    CHECK(again.out == testing::slurp(out));
}
