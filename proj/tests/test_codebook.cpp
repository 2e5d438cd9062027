#include <doctest.h>

#include <map>
#include <random>

#include "deduce/codebook.hpp"
#include "deduce/coco.hpp"
#include "deduce/error.hpp"
#include "support.hpp"

using namespace deduce;

namespace {

Detection det(const char* name, double conf) {
    return {coco::require_index(name), conf, {0.1, 0.1, 0.2, 0.2}};
}

const std::string kTableText =
    R"({"toilet":"bathroom","sink":"bathroom","bed":"bedroom","dining table":"dining_room",)"
    R"("wine glass":"dining_room","bowl":"dining_room","oven":"kitchen","microwave":"kitchen",)"
    R"("refrigerator":"kitchen","couch":"living_room","vase":"living_room","tv":"office",)"
    R"("laptop":"office","keyboard":"office","mouse":"office","absence":"corridor"})";

} // namespace

TEST_CASE("default table entries") {
    const auto cb = default_codebook();
    const std::vector<Codebook::Entry> expected = {
        {"toilet", "bathroom"},        {"sink", "bathroom"},         {"bed", "bedroom"},
        {"dining table", "dining_room"}, {"wine glass", "dining_room"}, {"bowl", "dining_room"},
        {"oven", "kitchen"},           {"microwave", "kitchen"},     {"refrigerator", "kitchen"},
        {"couch", "living_room"},      {"vase", "living_room"},      {"tv", "office"},
        {"laptop", "office"},          {"keyboard", "office"},       {"mouse", "office"}};
    CHECK(cb.entries() == expected);
    CHECK(cb.absence_label().name == "corridor");
    CHECK(cb.to_json() == kTableText);
    CHECK(cb.lookup("bed")->name == "bedroom");
    CHECK(cb.lookup("mouse")->name == "office");
    CHECK_FALSE(cb.lookup("person"));
    CHECK_FALSE(cb.lookup("chair"));
    for (const auto& [object, scene] : cb.entries()) {
        CHECK(scene != "corridor");
    }
}

TEST_CASE("codebook parsing") {
    const auto home = ClassSet::home7();
    CHECK(parse_codebook(kTableText, home).entries() == default_codebook().entries());
    CHECK(parse_codebook(office5_codebook().to_json(), ClassSet::office5()).entries() ==
          office5_codebook().entries());

    CHECK_THROWS_AS(parse_codebook(R"({"bed":"bedroom"})", home), DataError);
    CHECK_THROWS_AS(parse_codebook(R"({"sofa":"living_room","absence":"corridor"})", home), DataError);
    CHECK_THROWS_AS(parse_codebook(R"({"bed":"garage","absence":"corridor"})", home), DataError);
    CHECK_THROWS_AS(parse_codebook(R"({"bed":"bedroom","bed":"office","absence":"corridor"})", home),
                    DataError);
    CHECK_THROWS_AS(parse_codebook("not json", home), DataError);
    CHECK_THROWS_AS(Codebook(home, {{"bed", "bedroom"}}, "garage"), DataError);
}

TEST_CASE("shipped office table file matches the built-in one") {
    const auto cb = load_codebook(std::string(DEDUCE_FIXTURES) + "/../../data/codebook_office5.json",
                                  ClassSet::office5());
    CHECK(cb.entries() == office5_codebook().entries());
    CHECK(cb.absence_label().name == "corridor");
}

TEST_CASE("single landmark") {
    const std::vector<Detection> d = {det("bed", 0.9)};
    const auto v = classify_objects(d, default_codebook());
    CHECK(v.label.name == "bedroom");
    CHECK(v.landmark_found);
    CHECK(v.posterior == Posterior::one_hot(7, 1));
}

TEST_CASE("confidence weighted vote") {
    const std::vector<Detection> d = {det("sink", 0.6), det("oven", 0.5), det("microwave", 0.4)};
    const auto v = classify_objects(d, default_codebook(), 0.0);
    CHECK(v.label.name == "kitchen");
    CHECK(v.posterior[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(v.posterior[4] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(v.posterior[1] == 0.0);
}

TEST_CASE("default cut drops the weak microwave") {
    const std::vector<Detection> d = {det("sink", 0.6), det("oven", 0.5), det("microwave", 0.4)};
    const auto v = classify_objects(d, default_codebook());
    CHECK(v.label.name == "bathroom");
    CHECK(v.posterior[0] == doctest::Approx(0.6 / 1.1).epsilon(1e-12));
    CHECK(v.posterior[4] == doctest::Approx(0.5 / 1.1).epsilon(1e-12));
}

TEST_CASE("no landmark means corridor") {
    const auto cb = default_codebook();
    for (const auto& d : {std::vector<Detection>{}, std::vector<Detection>{det("person", 0.99)},
                          std::vector<Detection>{det("bed", 0.3)}}) {
        const auto v = classify_objects(d, cb);
        CHECK(v.label.name == "corridor");
        CHECK_FALSE(v.landmark_found);
        CHECK(v.posterior == Posterior::one_hot(7, 2));
    }
}

TEST_CASE("ties go to the lower scene id") {
    const std::vector<Detection> d = {det("tv", 0.7), det("toilet", 0.7)};
    CHECK(classify_objects(d, default_codebook()).label.name == "bathroom");
}

TEST_CASE("min_conf boundary keeps equal confidences") {
    const std::vector<Detection> d = {det("bed", 0.5)};
    CHECK(classify_objects(d, default_codebook(), 0.5).landmark_found);
    CHECK_FALSE(classify_objects(d, default_codebook(), 0.5000001).landmark_found);
}

TEST_CASE("vote properties on random detection sets") {
    const auto cb = default_codebook();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.05, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Detection> d;
        const std::size_t n = rng() % 8;
        for (std::size_t i = 0; i < n; ++i) {
            d.push_back({static_cast<std::size_t>(rng() % 80), u(rng), {0, 0, 0.1, 0.1}});
        }
        const auto base = classify_objects(d, cb, 0.0);

        // Brute-force vote over the entry list.
        std::map<std::string, double> votes;
        for (const auto& x : d) {
            for (const auto& [object, scene] : cb.entries()) {
                if (coco::names()[x.object] == object) {
                    votes[scene] += x.confidence;
                }
            }
        }
        double total = 0.0;
        for (const auto& [s, w] : votes) {
            total += w;
        }
        if (total > 0.0) {
            for (std::size_t c = 0; c < 7; ++c) {
                const auto it = votes.find(ClassSet::home7().name(c));
                const double want = it == votes.end() ? 0.0 : it->second / total;
                CHECK(std::abs(base.posterior[c] - want) < 1e-12);
            }
        }

        auto reversed = d;
        std::reverse(reversed.begin(), reversed.end());
        CHECK(classify_objects(reversed, cb, 0.0).label == base.label);

        auto with_noise = d;
        with_noise.push_back({coco::require_index("person"), u(rng), {0, 0, 0.1, 0.1}});
        with_noise.push_back({coco::require_index("chair"), u(rng), {0, 0, 0.1, 0.1}});
        CHECK(classify_objects(with_noise, cb, 0.0).label == base.label);

        const double k = scale(rng);
        auto scaled = d;
        for (auto& x : scaled) {
            x.confidence *= k;
        }
        const auto s = classify_objects(scaled, cb, 0.0);
        CHECK(s.label == base.label);
        for (std::size_t c = 0; c < 7; ++c) {
            CHECK(std::abs(s.posterior[c] - base.posterior[c]) < 1e-9);
        }
    }
}

TEST_CASE("built-in lookup by class set") {
    CHECK(builtin_codebook(ClassSet::home7())->entries().size() == 15);
    CHECK(builtin_codebook(ClassSet::office5())->lookup("tv")->name == "conference_room");
    CHECK_FALSE(builtin_codebook(testing::numbered_classes(3)));
}
