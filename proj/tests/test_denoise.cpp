#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "bignn/denoise.hpp"
#include "bignn/errors.hpp"
#include "bignn/partition.hpp"

using namespace bignn;

namespace {

Dataset clustered_dataset(int n, int d, uint64_t seed) {
    RngStream rng(seed, "dn-data");
    PointMatrix pts(n, d);
    Eigen::VectorXi labels(n);
    for (int i = 0; i < n; ++i) {
        labels[i] = rng.bernoulli(0.5) ? 1 : 0;
        for (int j = 0; j < d; ++j) pts(i, j) = rng.normal() + 3.0 * labels[i];
    }
    return Dataset(pts, labels);
}

KnnIndex single_point_index(double coord, int label) {
    PointMatrix pts(1, 1);
    pts << coord;
    Eigen::VectorXi labels(1);
    labels << label;
    return KnnIndex::build(pts, labels);
}

}  // namespace

TEST_CASE("m follows round(N^theta), capped by N") {
    const Dataset d = clustered_dataset(8000, 2, 3);
    RngStream rng(3, "train");
    const BigNnModel model = train(d, 0.2, KRule::fixed(1), rng);
    RngStream pre(3, "pretrain");
    const DenoisedModel dm = pretrain(model, d, 0.6, 2, pre);
    CHECK(dm.m == 220);  // round(8000^0.6) = round(219.712)
    CHECK(dm.I == 2);
    CHECK(dm.theta == 0.6);
    REQUIRE(dm.relabeled_subsamples.size() == 2);
    for (const auto& idx : dm.relabeled_subsamples) CHECK(idx.size() == 220);
}

TEST_CASE("theta=1, I=1 reproduces the ensemble on training points") {
    const Dataset d = clustered_dataset(150, 2, 5);
    RngStream rng(5, "train");
    const BigNnModel model = train(d, 0.4, KRule::fixed(3), rng);
    RngStream pre(5, "pretrain");
    const DenoisedModel dm = pretrain(model, d, 1.0, 1, pre);
    CHECK(dm.m == 150);
    REQUIRE(dm.relabeled_subsamples.size() == 1);
    CHECK(dm.relabeled_subsamples[0].size() == 150);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        const Eigen::VectorXd x = d.features.row(i).transpose();
        CHECK(predict_denoised(dm, x) == predict(model, x));
    }
}

TEST_CASE("stored labels are the ensemble's predictions") {
    const Dataset d = clustered_dataset(300, 3, 7);
    RngStream rng(7, "train");
    const BigNnModel model = train(d, 0.3, KRule::fixed(3), rng);
    RngStream pre(7, "pretrain");
    const DenoisedModel dm = pretrain(model, d, 0.5, 3, pre);
    for (const auto& idx : dm.relabeled_subsamples)
        for (int i = 0; i < idx.size(); ++i)
            CHECK(idx.point_label(i) == predict(model, idx.point_features(i)));
}

TEST_CASE("a constant model relabels everything to its constant") {
    // Model trained on all-ones labels predicts 1 everywhere.
    PointMatrix mp(50, 1);
    for (int i = 0; i < 50; ++i) mp(i, 0) = 0.1 * i;
    const Dataset all_ones(mp, Eigen::VectorXi::Ones(50));
    RngStream rng(9, "train");
    const BigNnModel model = train(all_ones, 0.0, KRule::fixed(5), rng);

    const Dataset mixed = clustered_dataset(80, 1, 9);
    RngStream pre(9, "pretrain");
    const DenoisedModel dm = pretrain(model, mixed, 0.8, 2, pre);
    for (const auto& idx : dm.relabeled_subsamples)
        for (int i = 0; i < idx.size(); ++i) CHECK(idx.point_label(i) == 1);
}

TEST_CASE("strict majority over the I nearest labels") {
    DenoisedModel dm;
    dm.m = 1;
    dm.theta = 0.5;
    Eigen::VectorXd x(1);
    x << 0.0;

    dm.relabeled_subsamples.push_back(single_point_index(0.0, 1));
    dm.relabeled_subsamples.push_back(single_point_index(0.0, 0));
    dm.I = 2;
    CHECK(predict_denoised(dm, x) == 0);  // (1,0) tie

    dm.relabeled_subsamples.push_back(single_point_index(0.0, 1));
    dm.I = 3;
    CHECK(predict_denoised(dm, x) == 1);  // (1,0,1) majority
}

TEST_CASE("prediction issues exactly I queries over at most m points") {
    const Dataset d = clustered_dataset(400, 2, 11);
    RngStream rng(11, "train");
    const BigNnModel model = train(d, 0.3, KRule::fixed(1), rng);
    RngStream pre(11, "pretrain");
    const DenoisedModel dm = pretrain(model, d, 0.5, 5, pre);

    uint64_t before = 0;
    for (const auto& idx : dm.relabeled_subsamples) {
        CHECK(idx.size() <= dm.m);
        before += idx.query_count();
    }
    (void)predict_denoised(dm, Eigen::Vector2d(0.5, 0.5));
    uint64_t after = 0;
    for (const auto& idx : dm.relabeled_subsamples) after += idx.query_count();
    CHECK(after - before == 5);  // one 1-NN lookup per subsample
}

TEST_CASE("reuse_partition merges adjacent training subsamples") {
    const Dataset d = clustered_dataset(400, 2, 13);
    RngStream rng(13, "train");
    const BigNnModel model = train(d, 0.4, KRule::fixed(1), rng);
    RngStream pre(13, "pretrain");
    const DenoisedModel dm = pretrain(model, d, 0.55, 3, pre, true);
    const int expected_m = static_cast<int>(round_half_away(std::pow(400.0, 0.55)));
    CHECK(dm.m == expected_m);
    // Every stored point's coordinates come from the training data.
    std::set<double> xs;
    for (Eigen::Index i = 0; i < d.size(); ++i) xs.insert(d.features(i, 0));
    for (const auto& idx : dm.relabeled_subsamples) {
        CHECK(idx.size() == std::min<Eigen::Index>(dm.m, d.size()));
        for (int i = 0; i < idx.size(); ++i) CHECK(xs.count(idx.points()(i, 0)) == 1);
    }
}

TEST_CASE("pretrain is deterministic given the stream") {
    const Dataset d = clustered_dataset(200, 2, 17);
    RngStream rng(17, "train");
    const BigNnModel model = train(d, 0.3, KRule::fixed(1), rng);
    RngStream p1(17, "pretrain", 2);
    RngStream p2(17, "pretrain", 2);
    const DenoisedModel a = pretrain(model, d, 0.5, 3, p1);
    const DenoisedModel b = pretrain(model, d, 0.5, 3, p2);
    REQUIRE(a.relabeled_subsamples.size() == b.relabeled_subsamples.size());
    for (size_t i = 0; i < a.relabeled_subsamples.size(); ++i) {
        const KnnIndex& ia = a.relabeled_subsamples[i];
        const KnnIndex& ib = b.relabeled_subsamples[i];
        REQUIRE(ia.size() == ib.size());
        CHECK((ia.points() - ib.points()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((ia.labels().array() == ib.labels().array()).all());
    }
}

TEST_CASE("pretrain validates its parameters") {
    const Dataset d = clustered_dataset(50, 2, 19);
    RngStream rng(19, "train");
    const BigNnModel model = train(d, 0.0, KRule::fixed(1), rng);
    RngStream pre(19, "pretrain");
    CHECK_THROWS_AS(pretrain(model, d, 0.0, 1, pre), std::invalid_argument);
    CHECK_THROWS_AS(pretrain(model, d, 1.2, 1, pre), std::invalid_argument);
    CHECK_THROWS_AS(pretrain(model, d, -0.5, 1, pre), std::invalid_argument);
    CHECK_THROWS_AS(pretrain(model, d, 0.5, 0, pre), std::invalid_argument);
}

TEST_CASE("predict_denoised_batch matches pointwise calls") {
    const Dataset d = clustered_dataset(300, 2, 23);
    RngStream rng(23, "train");
    const BigNnModel model = train(d, 0.3, KRule::fixed(3), rng);
    RngStream pre(23, "pretrain");
    const DenoisedModel dm = pretrain(model, d, 0.6, 3, pre);
    RngStream qr(23, "queries");
    PointMatrix queries(40, 2);
    for (int i = 0; i < 40; ++i) {
        queries(i, 0) = qr.normal();
        queries(i, 1) = qr.normal();
    }
    PhaseTiming t;
    const std::vector<int> batch = predict_denoised_batch(dm, queries, 2, &t);
    REQUIRE(batch.size() == 40);
    for (int i = 0; i < 40; ++i)
        CHECK(batch[static_cast<size_t>(i)] == predict_denoised(dm, queries.row(i).transpose()));
    CHECK(t.per_worker_ms.size() == 3);
}
