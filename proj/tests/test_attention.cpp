#include <doctest.h>

#include <cmath>
#include <random>

#include "deduce/attention.hpp"
#include "deduce/error.hpp"
#include "support.hpp"

using namespace deduce;

namespace {

FeatureBlob random_blob(std::mt19937_64& rng, BlobShape shape) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(shape.size());
    for (auto& x : v) {
        x = normal(rng);
    }
    return FeatureBlob(shape, std::move(v));
}

Eigen::VectorXd triple_loop_logits(const FeatureBlob& blob, const LinearHead& head) {
    const auto& s = blob.shape();
    Eigen::VectorXd out = head.bias();
    for (std::size_t k = 0; k < head.num_classes(); ++k) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.channels; ++c) {
            for (std::size_t h = 0; h < s.height; ++h) {
                for (std::size_t w = 0; w < s.width; ++w) {
                    acc += head.weights()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) *
                           blob(c, h, w);
                }
            }
        }
        out(static_cast<Eigen::Index>(k)) += acc / static_cast<double>(s.height * s.width);
    }
    return out;
}

} // namespace

TEST_CASE("pooled logits match a triple loop") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const BlobShape shape{1 + rng() % 16, 1 + rng() % 14, 1 + rng() % 14};
        const auto blob = random_blob(rng, shape);
        const auto head = testing::random_head(rng, testing::numbered_classes(2 + rng() % 6),
                                               shape.channels);
        const Eigen::VectorXd got = blob_to_logits(blob, head);
        const Eigen::VectorXd want = triple_loop_logits(blob, head);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("pooling hand cases") {
    std::mt19937_64 rng(2);
    const auto head = testing::random_head(rng, ClassSet::home7(), 3);
    const FeatureBlob flat({3, 4, 5}, 0.25);
    const Eigen::VectorXd want = head.logits(Eigen::Vector3d::Constant(0.25));
    CHECK((blob_to_logits(flat, head) - want).norm() < 1e-14);

    FeatureBlob one({3, 4, 5}, 0.0);
    one(0, 1, 2) = 2.0;
    one(2, 1, 2) = -4.0;
    const Eigen::Vector3d cell(2.0, 0.0, -4.0);
    const Eigen::VectorXd hand = head.weights() * cell / 20.0 + head.bias();
    CHECK((blob_to_logits(one, head) - hand).norm() < 1e-14);

    CHECK_THROWS_AS(blob_to_logits(FeatureBlob({4, 2, 2}), head), DataError);
    CHECK_THROWS_AS(blob_to_logits(FeatureBlob({3, 0, 2}), head), DataError);
}

TEST_CASE("hot cell lands at the heatmap maximum") {
    const BlobShape shape{8, 14, 14};
    std::mt19937_64 rng(4);
    auto head = testing::random_head(rng, testing::numbered_classes(3), shape.channels);
    Eigen::MatrixXd w = head.weights();
    w(1, 5) = 1.0;
    head = LinearHead(head.class_set(), w, head.bias());

    for (const auto& [row, col] : {std::pair{3, 5}, std::pair{0, 0}, std::pair{13, 13}, std::pair{7, 2}}) {
        FeatureBlob blob(shape, 0.0);
        blob(5, static_cast<std::size_t>(row), static_cast<std::size_t>(col)) = 1.0;
        for (const ImageSize size : {ImageSize{224, 224}, ImageSize{640, 480}, ImageSize{14, 14}}) {
            const auto hm = activation_map(blob, head, 1, size);
            Eigen::Index r = 0, c = 0;
            CHECK(hm.values.maxCoeff(&r, &c) == doctest::Approx(1.0));
            // Map the max back onto the feature grid with the align-corners rule.
            const double sy = static_cast<double>(r) * 13.0 / (size.height - 1);
            const double sx = static_cast<double>(c) * 13.0 / (size.width - 1);
            CHECK(std::abs(sy - row) <= 0.5);
            CHECK(std::abs(sx - col) <= 0.5);
            CHECK(hm.predicted.id == 1);
        }
    }
}

TEST_CASE("heatmap range and shape") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const BlobShape shape{1 + rng() % 6, 1 + rng() % 9, 1 + rng() % 9};
        const auto blob = random_blob(rng, shape);
        const auto head = testing::random_head(rng, testing::numbered_classes(4), shape.channels);
        const ImageSize size{static_cast<int>(shape.width + rng() % 300),
                             static_cast<int>(shape.height + rng() % 300)};
        const auto hm = activation_map(blob, head, std::nullopt, size);
        REQUIRE(hm.values.rows() == size.height);
        REQUIRE(hm.values.cols() == size.width);
        CHECK(hm.values.minCoeff() >= 0.0);
        CHECK(hm.values.maxCoeff() <= 1.0);
        CHECK(hm.source_height == shape.height);
        CHECK(hm.source_width == shape.width);
        CHECK(hm.predicted.id == argmax(blob_to_logits(blob, head)));
        if (shape.height * shape.width > 1) {
            CHECK(hm.values.maxCoeff() == 1.0);
            CHECK(hm.values.minCoeff() == 0.0);
        }
    }
}

TEST_CASE("positive scaling leaves the heatmap unchanged") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 20; ++trial) {
        const BlobShape shape{4, 7, 7};
        const auto blob = random_blob(rng, shape);
        const double a = scale(rng);
        std::vector<double> scaled(blob.values().begin(), blob.values().end());
        for (auto& v : scaled) {
            v *= a;
        }
        const auto head = testing::random_head(rng, testing::numbered_classes(3), 4);
        const auto base = activation_map(blob, head, 2, {56, 56});
        const auto big = activation_map(FeatureBlob(shape, scaled), head, 2, {56, 56});
        CHECK((base.values - big.values).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("constant maps") {
    std::mt19937_64 rng(1);
    const auto head = testing::random_head(rng, testing::numbered_classes(3), 2);
    const auto hm = activation_map(FeatureBlob({2, 5, 5}, 0.7), head, 0, {50, 40});
    CHECK(hm.values.rows() == 40);
    CHECK(hm.values.cols() == 50);
    CHECK(hm.values.isZero());
    CHECK(minmax_normalize(Eigen::MatrixXd::Constant(3, 3, -2.0)).isZero());
}

TEST_CASE("bias-dominated head on a constant blob") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(4, 3, 0.01);
    Eigen::Vector4d b(0.0, 0.0, 9.0, 1.0);
    const LinearHead head(testing::numbered_classes(4), w, b);
    const auto r = classify_attn(FeatureBlob({3, 14, 14}, 1.0), head, {224, 224});
    CHECK(r.label.id == 2);
    CHECK(r.heatmap.values.isZero());
    CHECK(r.posterior.argmax() == 2);
}

TEST_CASE("classify agrees with the pooled forward") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        const auto blob = random_blob(rng, {6, 3, 4});
        const auto head = testing::random_head(rng, ClassSet::home7(), 6);
        const auto r = classify_attn(blob, head, {32, 24});
        const Eigen::VectorXd z = triple_loop_logits(blob, head);
        Eigen::Index best = 0;
        z.maxCoeff(&best);
        CHECK(r.label.id == static_cast<std::size_t>(best));
        CHECK(r.heatmap.predicted == r.label);
        const double norm = (z.array() - z.maxCoeff()).exp().sum();
        for (std::size_t k = 0; k < 7; ++k) {
            CHECK(std::abs(r.posterior[k] - std::exp(z(static_cast<Eigen::Index>(k)) - z.maxCoeff()) / norm) <
                  1e-12);
        }
    }
}

TEST_CASE("class activation arithmetic") {
    FeatureBlob blob({2, 1, 2}, 0.0);
    blob(0, 0, 0) = 1.0;
    blob(1, 0, 1) = 3.0;
    Eigen::MatrixXd w(2, 2);
    w << 2.0, -1.0, 0.0, 0.5;
    const LinearHead head(testing::numbered_classes(2), w, Eigen::VectorXd::Zero(2));
    const auto raw = class_activation(blob, head, 0);
    CHECK(raw(0, 0) == 2.0);
    CHECK(raw(0, 1) == -3.0);
    CHECK(class_activation(blob, head, 1)(0, 1) == 1.5);
    CHECK_THROWS_AS(class_activation(blob, head, 2), DataError);
}

TEST_CASE("bilinear resampling") {
    Eigen::MatrixXd src(2, 2);
    src << 0.0, 1.0, 2.0, 3.0;
    const auto up = upsample_bilinear(src, 3, 5);
    CHECK(up(0, 0) == 0.0);
    CHECK(up(0, 4) == 1.0);
    CHECK(up(2, 0) == 2.0);
    CHECK(up(2, 4) == 3.0);
    CHECK(up(1, 2) == doctest::Approx(1.5));
    CHECK(up(0, 1) == doctest::Approx(0.25));

    // Ramps are reproduced exactly under the align-corners mapping.
    Eigen::MatrixXd ramp(4, 6);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 6; ++c) {
            ramp(r, c) = 2.0 * r - 0.5 * c;
        }
    }
    const auto big = upsample_bilinear(ramp, 31, 51);
    for (int r = 0; r < 31; ++r) {
        for (int c = 0; c < 51; ++c) {
            CHECK(big(r, c) == doctest::Approx(2.0 * r * 3.0 / 30.0 - 0.5 * c * 5.0 / 50.0));
        }
    }
    CHECK(upsample_bilinear(src, 2, 2) == src);
    CHECK(upsample_bilinear(Eigen::MatrixXd::Constant(1, 1, 4.0), 3, 3).isConstant(4.0));
    CHECK_THROWS_AS(upsample_bilinear(src, 0, 3), DataError);
}

TEST_CASE("activation map input errors") {
    std::mt19937_64 rng(3);
    const auto head = testing::random_head(rng, testing::numbered_classes(2), 2);
    const FeatureBlob blob({2, 14, 14}, 0.0);
    CHECK_THROWS_AS(activation_map(blob, head, 0, {0, 10}), DataError);
    CHECK_THROWS_AS(activation_map(blob, head, 0, {10, 10}), DataError);
    CHECK_THROWS_AS(activation_map(blob, head, 5, {20, 20}), DataError);
}
