#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "segfuse/class_weights.hpp"
#include "segfuse/core.hpp"

namespace segfuse {

struct FusionConfig {
    double temperature = 6.0;
    ClassWeights weights;
};

namespace detail {

inline void check_temperature(double t) {
    require(std::isfinite(t) && t > 0.0,
            "softmax: temperature must be positive and finite, got " + std::to_string(t));
}

/// Stable temperature softmax of one pixel's channels into `out` (doubles).
inline void softmax_pixel(std::span<const float> z, double temperature, std::span<double> out) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i]))
            fail("softmax: non-finite logit value " + std::to_string(z[i]));
        zmax = std::max(zmax, static_cast<double>(z[i]));
    }
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        double e = std::exp((static_cast<double>(z[i]) - zmax) / temperature);
        out[i] = e;
        sum += e;
    }
    for (size_t i = 0; i < z.size(); ++i)
        out[i] /= sum;
}

} // namespace detail

/// Temperature softmax, per pixel, with max subtraction and double-precision
/// accumulation. Each pixel's output sums to 1.
inline ScoreTensor softmax_t(const LogitTensor& logits, double temperature) {
    detail::check_temperature(temperature);
    detail::require(!logits.empty(), "softmax: empty logit tensor");
    ScoreTensor out(logits.width(), logits.height(), logits.channels());
    std::vector<double> buf(static_cast<size_t>(logits.channels()));
    for (int y = 0; y < logits.height(); ++y)
        for (int x = 0; x < logits.width(); ++x) {
            detail::softmax_pixel(logits.at(x, y), temperature, buf);
            auto dst = out.at(x, y);
            for (int c = 0; c < logits.channels(); ++c)
                dst[c] = static_cast<float>(buf[c]);
        }
    return out;
}

/// Weighted per-class sum of the two branches' temperature softmaxes:
/// out_i = w_dep_i * softmax_T(dep)_i + w_uda_i * softmax_T(uda)_i.
/// Scores are not renormalized; only their argmax is consumed downstream.
inline ScoreTensor fuse(const LogitTensor& dep, const LogitTensor& uda, const FusionConfig& cfg) {
    detail::check_temperature(cfg.temperature);
    detail::require(dep.width() == uda.width() && dep.height() == uda.height(),
                    "fuse: branch dimensions differ (" + std::to_string(dep.width()) + "x" +
                        std::to_string(dep.height()) + " vs " + std::to_string(uda.width()) + "x" +
                        std::to_string(uda.height()) + ")");
    detail::require(dep.channels() == uda.channels(),
                    "fuse: branch channel counts differ (" + std::to_string(dep.channels()) +
                        " vs " + std::to_string(uda.channels()) + ")");
    detail::require(static_cast<size_t>(dep.channels()) == cfg.weights.size(),
                    "fuse: weights cover " + std::to_string(cfg.weights.size()) +
                        " classes but logits have " + std::to_string(dep.channels()) +
                        " channels");
    detail::require(!dep.empty(), "fuse: empty logit tensor");

    const int c = dep.channels();
    ScoreTensor out(dep.width(), dep.height(), c);
    std::vector<double> pd(static_cast<size_t>(c)), pu(static_cast<size_t>(c));
    for (int y = 0; y < dep.height(); ++y)
        for (int x = 0; x < dep.width(); ++x) {
            detail::softmax_pixel(dep.at(x, y), cfg.temperature, pd);
            detail::softmax_pixel(uda.at(x, y), cfg.temperature, pu);
            auto dst = out.at(x, y);
            for (int i = 0; i < c; ++i)
                dst[i] = static_cast<float>(cfg.weights.w_dep[i] * pd[i] +
                                            cfg.weights.w_uda[i] * pu[i]);
        }
    return out;
}

/// Per-pixel argmax; ties go to the lowest class id.
inline LabelMap decide_labels(const ScoreTensor& scores) {
    detail::require(!scores.empty(), "decide labels: empty score tensor");
    detail::require(scores.channels() <= 255, "decide labels: more than 255 channels");
    LabelMap out(scores.width(), scores.height());
    for (int y = 0; y < scores.height(); ++y)
        for (int x = 0; x < scores.width(); ++x) {
            auto s = scores.at(x, y);
            int best = 0;
            float best_score = s[0];
            for (int i = 1; i < scores.channels(); ++i)
                if (s[i] > best_score) {
                    best = i;
                    best_score = s[i];
                }
            out.at(x, y) = static_cast<uint8_t>(best);
        }
    return out;
}

/// Fused decision without materializing the score tensor. Scores are rounded
/// through float exactly as in fuse(), so the result is byte-identical to
/// decide_labels(fuse(dep, uda, cfg)).
inline LabelMap fuse_labels(const LogitTensor& dep, const LogitTensor& uda,
                            const FusionConfig& cfg) {
    detail::check_temperature(cfg.temperature);
    detail::require(dep.width() == uda.width() && dep.height() == uda.height(),
                    "fuse: branch dimensions differ");
    detail::require(dep.channels() == uda.channels(), "fuse: branch channel counts differ");
    detail::require(static_cast<size_t>(dep.channels()) == cfg.weights.size(),
                    "fuse: weights/channel count mismatch");
    detail::require(dep.channels() <= 255, "fuse: more than 255 channels");
    detail::require(!dep.empty(), "fuse: empty logit tensor");

    const int c = dep.channels();
    LabelMap out(dep.width(), dep.height());
    std::vector<double> pd(static_cast<size_t>(c)), pu(static_cast<size_t>(c));
    for (int y = 0; y < dep.height(); ++y)
        for (int x = 0; x < dep.width(); ++x) {
            detail::softmax_pixel(dep.at(x, y), cfg.temperature, pd);
            detail::softmax_pixel(uda.at(x, y), cfg.temperature, pu);
            int best = 0;
            float best_score = -std::numeric_limits<float>::infinity();
            for (int i = 0; i < c; ++i) {
                float s = static_cast<float>(cfg.weights.w_dep[i] * pd[i] +
                                             cfg.weights.w_uda[i] * pu[i]);
                if (s > best_score) {
                    best = i;
                    best_score = s;
                }
            }
            out.at(x, y) = static_cast<uint8_t>(best);
        }
    return out;
}

} // namespace segfuse
