#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "segfuse/fusion.hpp"
#include "segfuse/rng.hpp"

using namespace segfuse;
using Catch::Matchers::WithinAbs;

namespace {

LogitTensor random_logits(SplitMix64& rng, int w, int h, int c, double span = 10.0) {
    LogitTensor t(w, h, c);
    for (auto& v : t.values())
        v = static_cast<float>(rng.uniform(-span, span));
    return t;
}

ClassWeights random_weights(SplitMix64& rng, size_t c) {
    std::vector<double> raw(c);
    for (auto& r : raw)
        r = rng.uniform(0.1, 60.0);
    return finalize_weights(std::move(raw));
}

ClassWeights constant_weights(size_t c, double w_uda) {
    ClassWeights w;
    w.w_uda_raw.assign(c, w_uda);
    w.w_uda.assign(c, w_uda);
    w.w_dep.assign(c, 1.0 - w_uda);
    return w;
}

} // namespace

TEST_CASE("softmax of equal logits is uniform") {
    LogitTensor z(1, 1, 3, 0.0f);
    const ScoreTensor s = softmax_t(z, 6.0);
    for (float v : s.values())
        CHECK_THAT(v, WithinAbs(1.0 / 3.0, 1e-7));
}

// Frozen closed form: e/(e+1) = 0.73105857863000487925,
// 1/(e+1) = 0.26894142136999512075.
TEST_CASE("softmax of (6,0) at T=6") {
    LogitTensor z(1, 1, 2);
    z.at(0, 0)[0] = 6.0f;
    z.at(0, 0)[1] = 0.0f;
    const ScoreTensor s = softmax_t(z, 6.0);
    CHECK_THAT(s.at(0, 0)[0], WithinAbs(0.73105857863000487925, 1e-7));
    CHECK_THAT(s.at(0, 0)[1], WithinAbs(0.26894142136999512075, 1e-7));
}

TEST_CASE("temperature folds into the logits") {
    SplitMix64 rng(3);
    const LogitTensor z = random_logits(rng, 4, 3, 7);
    LogitTensor scaled(4, 3, 7);
    for (size_t i = 0; i < z.values().size(); ++i)
        scaled.values()[i] = z.values()[i] / 6.0f;
    const ScoreTensor a = softmax_t(z, 6.0);
    const ScoreTensor b = softmax_t(scaled, 1.0);
    for (size_t i = 0; i < a.values().size(); ++i)
        CHECK_THAT(a.values()[i], WithinAbs(b.values()[i], 1e-6));
}

TEST_CASE("softmax rows sum to one and match the oracle") {
    SplitMix64 rng(4);
    const LogitTensor z = random_logits(rng, 8, 8, 19, 50.0);
    const ScoreTensor s = softmax_t(z, 6.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            auto px = s.at(x, y);
            double sum = 0.0;
            for (float v : px)
                sum += v;
            CHECK_THAT(sum, WithinAbs(1.0, 1e-6));
            std::vector<double> zz(z.at(x, y).begin(), z.at(x, y).end());
            const auto ref = oracle::softmax_t(zz, 6.0);
            for (size_t i = 0; i < ref.size(); ++i)
                CHECK_THAT(px[i], WithinAbs(ref[i], 1e-6));
        }
}

TEST_CASE("softmax rejects bad input") {
    LogitTensor z(1, 1, 2, 0.0f);
    CHECK_THROWS_AS(softmax_t(z, 0.0), Error);
    CHECK_THROWS_AS(softmax_t(z, -1.0), Error);
    z.at(0, 0)[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(softmax_t(z, 6.0), Error);
}

TEST_CASE("fuse hand example") {
    // Branch softmaxes (0.9, 0.1) and (0.2, 0.8) with w_dep = (0.97, 0),
    // w_uda = (0.03, 1) fuse to (0.879, 0.8), argmax class 0.
    LogitTensor dep(1, 1, 2), uda(1, 1, 2);
    dep.at(0, 0)[0] = static_cast<float>(6.0 * std::log(0.9));
    dep.at(0, 0)[1] = static_cast<float>(6.0 * std::log(0.1));
    uda.at(0, 0)[0] = static_cast<float>(6.0 * std::log(0.2));
    uda.at(0, 0)[1] = static_cast<float>(6.0 * std::log(0.8));
    ClassWeights w;
    w.w_uda_raw = {0.03, 1.0};
    w.w_uda = {0.03, 1.0};
    w.w_dep = {0.97, 0.0};
    const FusionConfig cfg{6.0, w};
    const ScoreTensor f = fuse(dep, uda, cfg);
    CHECK_THAT(f.at(0, 0)[0], WithinAbs(0.879, 1e-6));
    CHECK_THAT(f.at(0, 0)[1], WithinAbs(0.8, 1e-6));
    CHECK(decide_labels(f).at(0, 0) == 0);
}

TEST_CASE("degenerate weights reduce to one branch") {
    SplitMix64 rng(7);
    const LogitTensor dep = random_logits(rng, 5, 4, 6);
    const LogitTensor uda = random_logits(rng, 5, 4, 6);
    const FusionConfig all_uda{6.0, constant_weights(6, 1.0)};
    const ScoreTensor f = fuse(dep, uda, all_uda);
    const ScoreTensor s = softmax_t(uda, 6.0);
    CHECK(f.values().size() == s.values().size());
    for (size_t i = 0; i < f.values().size(); ++i)
        CHECK_THAT(f.values()[i], WithinAbs(s.values()[i], 1e-7));
}

TEST_CASE("identical branches are a fixed point") {
    SplitMix64 rng(8);
    const LogitTensor z = random_logits(rng, 4, 4, 9);
    const FusionConfig cfg{6.0, random_weights(rng, 9)};
    const ScoreTensor f = fuse(z, z, cfg);
    const ScoreTensor s = softmax_t(z, 6.0);
    for (size_t i = 0; i < f.values().size(); ++i)
        CHECK_THAT(f.values()[i], WithinAbs(s.values()[i], 1e-6));
}

TEST_CASE("shift invariance") {
    SplitMix64 rng(9);
    const LogitTensor dep = random_logits(rng, 4, 4, 5);
    const LogitTensor uda = random_logits(rng, 4, 4, 5);
    LogitTensor shifted = dep;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (auto& v : shifted.at(x, y))
                v += 13.25f;
    const FusionConfig cfg{6.0, random_weights(rng, 5)};
    const ScoreTensor a = fuse(dep, uda, cfg);
    const ScoreTensor b = fuse(shifted, uda, cfg);
    for (size_t i = 0; i < a.values().size(); ++i)
        CHECK_THAT(a.values()[i], WithinAbs(b.values()[i], 1e-6));
}

TEST_CASE("fuse matches the long-double oracle") {
    SplitMix64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const LogitTensor dep = random_logits(rng, 3, 3, 19, 30.0);
        const LogitTensor uda = random_logits(rng, 3, 3, 19, 30.0);
        const FusionConfig cfg{6.0, random_weights(rng, 19)};
        const ScoreTensor f = fuse(dep, uda, cfg);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) {
                std::vector<double> zd(dep.at(x, y).begin(), dep.at(x, y).end());
                std::vector<double> zu(uda.at(x, y).begin(), uda.at(x, y).end());
                const auto ref =
                    oracle::fuse_pixel(zd, zu, 6.0, cfg.weights.w_dep, cfg.weights.w_uda);
                for (size_t i = 0; i < ref.size(); ++i)
                    CHECK_THAT(f.at(x, y)[i], WithinAbs(ref[i], 1e-6));
            }
    }
}

TEST_CASE("fuse validates shapes") {
    const FusionConfig cfg{6.0, constant_weights(3, 0.5)};
    CHECK_THROWS_AS(fuse(LogitTensor(2, 2, 3), LogitTensor(2, 3, 3), cfg), Error);
    CHECK_THROWS_AS(fuse(LogitTensor(2, 2, 3), LogitTensor(2, 2, 4), cfg), Error);
    CHECK_THROWS_AS(fuse(LogitTensor(2, 2, 4), LogitTensor(2, 2, 4), cfg), Error);
}

TEST_CASE("decide_labels tie-break and one-hot") {
    ScoreTensor s(2, 1, 3, 0.25f);
    s.at(1, 0)[2] = 0.9f;
    const LabelMap l = decide_labels(s);
    CHECK(l.at(0, 0) == 0);
    CHECK(l.at(1, 0) == 2);
}

TEST_CASE("fuse_labels equals decide_labels(fuse)") {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const LogitTensor dep = random_logits(rng, 6, 5, 11);
        const LogitTensor uda = random_logits(rng, 6, 5, 11);
        const FusionConfig cfg{6.0, random_weights(rng, 11)};
        CHECK(fuse_labels(dep, uda, cfg) == decide_labels(fuse(dep, uda, cfg)));
    }
}

TEST_CASE("T-rescaling identity") {
    // Logits quantized to 1/1024 so scaling by 6 is exact in float; the
    // T = 6 run on scaled logits must then match the T = 1 run on the
    // originals to within 1e-9 (it is in fact bit-exact).
    SplitMix64 rng(13);
    LogitTensor dep1(4, 4, 7), uda1(4, 4, 7), dep6(4, 4, 7), uda6(4, 4, 7);
    for (size_t i = 0; i < dep1.values().size(); ++i) {
        dep1.values()[i] = static_cast<float>(rng.uniform_int(-10240, 10240)) / 1024.0f;
        uda1.values()[i] = static_cast<float>(rng.uniform_int(-10240, 10240)) / 1024.0f;
        dep6.values()[i] = dep1.values()[i] * 6.0f;
        uda6.values()[i] = uda1.values()[i] * 6.0f;
    }
    const ClassWeights w = random_weights(rng, 7);
    const ScoreTensor a = fuse(dep6, uda6, FusionConfig{6.0, w});
    const ScoreTensor b = fuse(dep1, uda1, FusionConfig{1.0, w});
    for (size_t i = 0; i < a.values().size(); ++i)
        CHECK_THAT(a.values()[i], WithinAbs(b.values()[i], 1e-9));
}
