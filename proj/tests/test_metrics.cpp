#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/rng.hpp"

using namespace segfuse;
using Catch::Matchers::WithinAbs;

namespace {

const ClassTable kTable2({{0, "a", false}, {1, "b", true}});

} // namespace

TEST_CASE("accumulate skips ignore and fills counts") {
    LabelMap gt(2, 1), pred(2, 1);
    gt.at(0, 0) = 0;
    gt.at(1, 0) = 255;
    pred.at(0, 0) = 1;
    pred.at(1, 0) = 0;
    ConfusionMatrix cm(2);
    cm.accumulate(gt, pred, kTable2);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.total() == 1);
}

TEST_CASE("perfect prediction is purely diagonal") {
    SplitMix64 rng(41);
    LabelMap gt(8, 8);
    for (auto& v : gt.values())
        v = static_cast<uint8_t>(rng.uniform_below(2));
    ConfusionMatrix cm(2);
    cm.accumulate(gt, gt, kTable2);
    CHECK(cm.at(0, 1) == 0);
    CHECK(cm.at(1, 0) == 0);
    const MetricsSummary s = miou_and_acc(cm);
    CHECK(s.miou == 1.0);
    CHECK(s.accuracy == 1.0);
}

TEST_CASE("accumulation order does not matter") {
    SplitMix64 rng(42);
    LabelMap a_gt(4, 4), a_pred(4, 4), b_gt(4, 4), b_pred(4, 4);
    for (auto* m : {&a_gt, &a_pred, &b_gt, &b_pred})
        for (auto& v : m->values())
            v = static_cast<uint8_t>(rng.uniform_below(2));
    ConfusionMatrix ab(2), ba(2);
    ab.accumulate(a_gt, a_pred, kTable2);
    ab.accumulate(b_gt, b_pred, kTable2);
    ba.accumulate(b_gt, b_pred, kTable2);
    ba.accumulate(a_gt, a_pred, kTable2);
    CHECK(ab == ba);

    ConfusionMatrix sharded(2), part(2);
    sharded.accumulate(a_gt, a_pred, kTable2);
    part.accumulate(b_gt, b_pred, kTable2);
    sharded.merge(part);
    CHECK(sharded == ab);
}

TEST_CASE("accumulate validates inputs") {
    ConfusionMatrix cm(2);
    LabelMap gt(2, 2, 0), pred(2, 2, 0);
    CHECK_THROWS_AS(cm.accumulate(gt, LabelMap(2, 3, 0), kTable2), Error);
    pred.at(0, 0) = 255;
    CHECK_THROWS_AS(cm.accumulate(gt, pred, kTable2), Error);
    pred.at(0, 0) = 9;
    CHECK_THROWS_AS(cm.accumulate(gt, pred, kTable2), Error);
    gt.at(0, 0) = 9;
    pred.at(0, 0) = 0;
    CHECK_THROWS_AS(cm.accumulate(gt, pred, kTable2), Error);
}

TEST_CASE("hand-computed IoU example") {
    // counts[0][0]=2, counts[0][1]=1, counts[1][1]=1:
    // IoU_0 = 2/3, IoU_1 = 1/2, mIoU = 7/12, Acc = 3/4.
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 2;
    cm.at(0, 1) = 1;
    cm.at(1, 1) = 1;
    const auto iou = iou_per_class(cm);
    REQUIRE(iou[0].has_value());
    REQUIRE(iou[1].has_value());
    CHECK_THAT(*iou[0], WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(*iou[1], WithinAbs(0.5, 1e-15));
    const MetricsSummary s = miou_and_acc(cm);
    CHECK_THAT(s.miou, WithinAbs(7.0 / 12.0, 1e-15));
    CHECK_THAT(s.accuracy, WithinAbs(0.75, 1e-15));
    CHECK(s.classes_in_mean == 2);
}

TEST_CASE("empty-union classes are undefined and excluded from the mean") {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 4;
    const auto iou = iou_per_class(cm);
    CHECK(iou[0].has_value());
    CHECK_FALSE(iou[1].has_value());
    CHECK_FALSE(iou[2].has_value());
    const MetricsSummary s = miou_and_acc(cm);
    CHECK(s.miou == 1.0);
    CHECK(s.classes_in_mean == 1);
}

TEST_CASE("empty matrix is an error") {
    ConfusionMatrix cm(2);
    CHECK_THROWS_AS(miou_and_acc(cm), Error);
}

TEST_CASE("metrics match the scalar oracle on random matrices") {
    SplitMix64 rng(43);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 1 + rng.uniform_below(12);
        ConfusionMatrix cm(n);
        bool any = false;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j)
                if (rng.uniform_below(3) > 0) {
                    cm.at(i, j) = rng.uniform_below(1000);
                    any = any || cm.at(i, j) > 0;
                }
        if (!any)
            cm.at(0, 0) = 1;
        const auto want = oracle::metrics(cm);
        const auto iou = iou_per_class(cm);
        const MetricsSummary got = miou_and_acc(cm);
        REQUIRE(iou.size() == want.iou.size());
        for (size_t c = 0; c < n; ++c) {
            CHECK(iou[c].has_value() == want.iou[c].has_value());
            if (iou[c])
                CHECK(*iou[c] == *want.iou[c]);
        }
        CHECK(got.miou == want.miou);
        CHECK(got.accuracy == want.acc);
        CHECK(got.classes_in_mean == want.defined);
    }
}

TEST_CASE("count scaling leaves the metrics unchanged") {
    SplitMix64 rng(44);
    ConfusionMatrix cm(5), scaled(5);
    for (size_t i = 0; i < 5; ++i)
        for (size_t j = 0; j < 5; ++j) {
            cm.at(i, j) = rng.uniform_below(50);
            scaled.at(i, j) = cm.at(i, j) * 7;
        }
    cm.at(2, 2) += 1;
    scaled.at(2, 2) += 7;
    const auto a = miou_and_acc(cm);
    const auto b = miou_and_acc(scaled);
    CHECK(a.miou == b.miou);
    CHECK(a.accuracy == b.accuracy);
}
