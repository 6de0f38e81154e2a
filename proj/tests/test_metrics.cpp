#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scsm/metrics.hpp"

#include <random>

using namespace scsm;
using namespace scsm::metrics;

namespace {

smg::ArgmaxMask mask_of(std::vector<int> labels, int h, int w, int /*unused*/ = 4) {
    smg::ArgmaxMask m;
    m.height = h;
    m.width = w;
    m.idx = std::move(labels);
    return m;
}

}  // namespace

TEST_CASE("a perfect prediction is purely diagonal") {
    ConfusionMatrix cm(4);
    auto m = mask_of({0, 1, 2, 3, 3, 2, 1, 0, 1, 1, 2, 2}, 3, 4);
    cm.accumulate(m, m);
    CHECK(cm.total() == 12);
    for (int t = 0; t < 4; ++t)
        for (int p = 0; p < 4; ++p)
            if (t != p) CHECK(cm.at(t, p) == 0);
    Summary s = summary(cm);
    CHECK(s.miou == 1.0);
    CHECK(s.af == 1.0);
    CHECK(s.oa == 1.0);
}

TEST_CASE("hand-counted confusion entries") {
    ConfusionMatrix cm(3);
    auto truth = mask_of({0, 0, 1, 1, 2, 2}, 1, 6, 3);
    auto pred = mask_of({0, 1, 1, 1, 2, 0}, 1, 6, 3);
    cm.accumulate(pred, truth);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 1) == 2);
    CHECK(cm.at(2, 2) == 1);
    CHECK(cm.at(2, 0) == 1);
    CHECK(cm.tp(1) == 2);
    CHECK(cm.fp(1) == 1);
    CHECK(cm.fn(1) == 0);
    CHECK(cm.tn(1) == 3);
}

TEST_CASE("IoU, precision, recall, F1 from fixed counts") {
    // Class 1: TP=3, FP=1, FN=2.
    ConfusionMatrix cm(2);
    for (int i = 0; i < 3; ++i) cm.add(1, 1);
    cm.add(0, 1);        // FP for class 1
    cm.add(1, 0);        // FN
    cm.add(1, 0);        // FN
    for (int i = 0; i < 4; ++i) cm.add(0, 0);
    auto scores = class_scores(cm);
    CHECK(scores[1].iou == doctest::Approx(3.0 / 6.0).epsilon(1e-12));
    CHECK(scores[1].precision == doctest::Approx(3.0 / 4.0).epsilon(1e-12));
    CHECK(scores[1].recall == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
    CHECK(scores[1].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK_FALSE(scores[1].absent);
}

TEST_CASE("mIoU is the arithmetic mean of the class IoUs") {
    ConfusionMatrix cm(2);
    // Class 0: TP=2, FP=0, FN=2 -> IoU 0.5. Class 1: TP=2, FP=2, FN=0 -> IoU 0.5.
    cm.add(0, 0);
    cm.add(0, 0);
    cm.add(0, 1);
    cm.add(0, 1);
    cm.add(1, 1);
    cm.add(1, 1);
    auto scores = class_scores(cm);
    Summary s = summary(cm);
    CHECK(s.miou == doctest::Approx(0.5 * (scores[0].iou + scores[1].iou)).epsilon(1e-12));
    CHECK(s.miou == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("overall accuracy is trace over total") {
    ConfusionMatrix cm(4);
    auto truth = mask_of({0, 1, 2, 3, 0, 1, 2, 3, 0, 1}, 2, 5);
    auto pred = mask_of({0, 1, 2, 3, 0, 1, 2, 3, 1, 0}, 2, 5);
    cm.accumulate(pred, truth);
    CHECK(summary(cm).oa == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("an absent class scores zero and is flagged") {
    ConfusionMatrix cm(3);
    cm.add(0, 0);
    cm.add(1, 1);
    auto scores = class_scores(cm);
    CHECK(scores[2].absent);
    CHECK(scores[2].iou == 0.0);
    CHECK(scores[2].f1 == 0.0);
    CHECK(summary(cm).miou == doctest::Approx((1.0 + 1.0 + 0.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("scores are invariant to pixel order") {
    std::mt19937_64 rng(31);
    std::vector<int> truth(64), pred(64);
    std::uniform_int_distribution<int> dist(0, 3);
    for (int i = 0; i < 64; ++i) {
        truth[i] = dist(rng);
        pred[i] = dist(rng);
    }
    ConfusionMatrix a(4);
    a.accumulate(mask_of(pred, 8, 8), mask_of(truth, 8, 8));

    std::vector<int> perm(64);
    for (int i = 0; i < 64; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> t2(64), p2(64);
    for (int i = 0; i < 64; ++i) {
        t2[i] = truth[perm[i]];
        p2[i] = pred[perm[i]];
    }
    ConfusionMatrix b(4);
    b.accumulate(mask_of(p2, 8, 8), mask_of(t2, 8, 8));
    for (int t = 0; t < 4; ++t)
        for (int p = 0; p < 4; ++p) CHECK(a.at(t, p) == b.at(t, p));
}

TEST_CASE("merge sums counts across matrices") {
    ConfusionMatrix a(2), b(2);
    a.add(0, 0);
    a.add(1, 0);
    b.add(0, 0);
    b.add(1, 1);
    a.merge(b);
    CHECK(a.at(0, 0) == 2);
    CHECK(a.at(1, 0) == 1);
    CHECK(a.at(1, 1) == 1);
    CHECK(a.total() == 4);
}

TEST_CASE("accumulate rejects shape and class-count mismatches") {
    ConfusionMatrix cm(4);
    auto a = mask_of({0, 1, 2, 3}, 2, 2);
    auto b = mask_of({0, 1}, 1, 2);
    CHECK_THROWS_AS(cm.accumulate(a, b), DimensionError);
    ConfusionMatrix cm2(3);
    CHECK_THROWS_AS(cm2.accumulate(a, a), DimensionError);
}

TEST_CASE("report emits per-class lines and the three summaries") {
    ConfusionMatrix cm(4);
    auto m = mask_of({0, 1, 2, 3}, 2, 2);
    cm.accumulate(m, m);
    std::string r = report(cm);
    CHECK(r.find("class0.iou=") != std::string::npos);
    CHECK(r.find("class3.iou=") != std::string::npos);
    CHECK(r.find(" f1=") != std::string::npos);
    CHECK(r.find("miou=") != std::string::npos);
    CHECK(r.find("af=") != std::string::npos);
    CHECK(r.find("oa=") != std::string::npos);
}
