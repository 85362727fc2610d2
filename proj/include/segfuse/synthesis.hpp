#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segfuse/core.hpp"
#include "segfuse/image_ops.hpp"
#include "segfuse/rng.hpp"

namespace segfuse {

struct JitterConfig {
    double brightness = 0.2;
    double contrast = 0.2;
    double saturation = 0.2;
    double hue = 0.05;
};

struct AugmentConfig {
    double scale_lo = 0.75;
    double scale_hi = 1.5;
    int crop_w = 1024;
    int crop_h = 512;
    JitterConfig jitter;
    bool enabled = true;
};

struct SynthConfig {
    int n_images = 2;
    double percentile = 0.8;
    std::vector<int> things;
    int samples_per_base = 4;
    uint64_t seed = 0;
    bool include_base = true;
    AugmentConfig augment;
};

namespace detail {

inline void check_augment(const AugmentConfig& cfg) {
    require(cfg.scale_lo > 0.0 && cfg.scale_lo <= cfg.scale_hi &&
                std::isfinite(cfg.scale_hi),
            "augment: scale range must satisfy 0 < lo <= hi");
    require(cfg.crop_w >= 1 && cfg.crop_h >= 1, "augment: crop dimensions must be >= 1");
    const JitterConfig& j = cfg.jitter;
    require(j.brightness >= 0.0 && j.brightness <= 1.0 && j.contrast >= 0.0 &&
                j.contrast <= 1.0 && j.saturation >= 0.0 && j.saturation <= 1.0,
            "augment: brightness/contrast/saturation strengths must be in [0, 1]");
    require(j.hue >= 0.0 && j.hue <= 0.5, "augment: hue strength must be in [0, 0.5]");
}

inline void check_synth(const SynthConfig& cfg) {
    require(cfg.n_images >= 1, "synth: n_images must be >= 1");
    require(cfg.percentile > 0.0 && cfg.percentile < 1.0,
            "synth: percentile must be in (0, 1)");
    require(cfg.samples_per_base >= 1, "synth: samples_per_base must be >= 1");
    for (int id : cfg.things)
        require(id >= 0 && id <= 255, "synth: things ids must be in [0, 255]");
    check_augment(cfg.augment);
}

} // namespace detail

/// Membership lookup for the foreground ("things") class ids.
class ThingSet {
public:
    ThingSet() = default;
    explicit ThingSet(std::span<const int> ids) {
        for (int id : ids) {
            detail::require(id >= 0 && id <= 255, "thing set: ids must be in [0, 255]");
            lut_[static_cast<size_t>(id)] = 1;
        }
    }
    static ThingSet from_table(const ClassTable& table) {
        auto ids = table.thing_ids();
        return ThingSet(ids);
    }

    bool contains(uint8_t id) const { return lut_[id] != 0; }

private:
    std::array<uint8_t, 256> lut_{};
};

/// Nearest-rank percentile of the valid depths: the ceil(q*V)-th smallest.
inline float depth_threshold(const DepthMap& depth, double q) {
    detail::require(q > 0.0 && q < 1.0, "depth threshold: percentile must be in (0, 1)");
    std::vector<float> vals;
    vals.reserve(depth.pixels());
    for (size_t i = 0; i < depth.pixels(); ++i)
        if (depth.valid_mask()[i])
            vals.push_back(depth.values()[i]);
    detail::require(!vals.empty(), "depth threshold: no valid depth pixels");
    size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(vals.size())));
    rank = std::clamp<size_t>(rank, 1, vals.size());
    std::nth_element(vals.begin(), vals.begin() + (rank - 1), vals.end());
    return vals[rank - 1];
}

/// Per-sample thresholds for a composite pool; disengaged where a sample has
/// no valid depth at all (such a sample contributes no candidates).
inline std::vector<std::optional<float>> depth_thresholds(std::span<const SceneSample> samples,
                                                          double q) {
    std::vector<std::optional<float>> out;
    out.reserve(samples.size());
    for (const SceneSample& s : samples)
        out.push_back(s.depth.valid_count() > 0 ? std::optional<float>(depth_threshold(s.depth, q))
                                                : std::nullopt);
    return out;
}

struct Candidate {
    int index;
    float depth;
};

/// All (sample index, depth) pairs at pixel (x, y) that pass the candidate
/// filter: depth valid, strictly under that sample's threshold, label a thing.
inline std::vector<Candidate> candidate_depths(std::span<const SceneSample> samples,
                                               std::span<const std::optional<float>> thresholds,
                                               const ThingSet& things, int x, int y) {
    detail::require(samples.size() == thresholds.size(),
                    "candidates: one threshold per sample required");
    std::vector<Candidate> out;
    for (size_t n = 0; n < samples.size(); ++n) {
        const SceneSample& s = samples[n];
        detail::require(s.label.has_value(), "candidates: sample '" + s.id + "' has no label");
        detail::require(s.depth.width() == samples[0].depth.width() &&
                            s.depth.height() == samples[0].depth.height(),
                        "candidates: sample dimensions differ");
        if (!thresholds[n])
            continue;
        if (!s.depth.valid_at(x, y))
            continue;
        const float d = s.depth.at(x, y);
        if (d < *thresholds[n] && things.contains(s.label->at(x, y)))
            out.push_back({static_cast<int>(n), d});
    }
    return out;
}

struct Composite {
    ImageBuffer image;
    LabelMap label;
    /// Index of the sample each output pixel was copied from.
    std::vector<int32_t> source;
};

/// Depth-ordered compositing: per pixel the nearest passing candidate wins
/// (ties break toward the lowest sample index); pixels with no candidate keep
/// the base sample (index 0).
inline Composite composite(std::span<const SceneSample> samples, const SynthConfig& cfg) {
    detail::check_synth(cfg);
    detail::require(!samples.empty(), "composite: empty sample list");
    const SceneSample& base = samples[0];
    const int w = base.image.width(), h = base.image.height();
    for (const SceneSample& s : samples) {
        detail::require(s.label.has_value(), "composite: sample '" + s.id + "' has no label");
        detail::require(s.image.width() == w && s.image.height() == h &&
                            s.depth.width() == w && s.depth.height() == h &&
                            s.label->width() == w && s.label->height() == h,
                        "composite: sample '" + s.id + "' dimensions differ from the base");
    }

    const ThingSet things{std::span<const int>(cfg.things)};
    const auto thresholds = depth_thresholds(samples, cfg.percentile);
    const size_t pixels = static_cast<size_t>(w) * h;

    std::vector<int32_t> winner(pixels, -1);
    std::vector<float> winner_depth(pixels, 0.0f);
    const size_t first = cfg.include_base ? 0 : 1;
    for (size_t n = first; n < samples.size(); ++n) {
        if (!thresholds[n])
            continue;
        const float t = *thresholds[n];
        const SceneSample& s = samples[n];
        auto depths = s.depth.values();
        auto mask = s.depth.valid_mask();
        auto labels = s.label->values();
        for (size_t i = 0; i < pixels; ++i) {
            if (!mask[i])
                continue;
            const float d = depths[i];
            if (!(d < t) || !things.contains(labels[i]))
                continue;
            if (winner[i] < 0 || d < winner_depth[i]) {
                winner[i] = static_cast<int32_t>(n);
                winner_depth[i] = d;
            }
        }
    }

    Composite out{ImageBuffer(w, h), LabelMap(w, h), std::move(winner)};
    for (size_t i = 0; i < pixels; ++i) {
        const int32_t k = out.source[i] < 0 ? 0 : out.source[i];
        const SceneSample& s = samples[static_cast<size_t>(k)];
        const int x = static_cast<int>(i % static_cast<size_t>(w));
        const int y = static_cast<int>(i / static_cast<size_t>(w));
        const uint8_t* p = s.image.at(x, y);
        out.image.set(x, y, p[0], p[1], p[2]);
        out.label.at(x, y) = s.label->at(x, y);
        if (out.source[i] < 0)
            out.source[i] = 0;
    }
    return out;
}

/// Uniform sampling of n_images-1 distinct source indices, base excluded,
/// in draw order. Consumes the stream even when the choice is forced.
inline std::vector<size_t> select_sources(size_t pool_size, size_t base_index, int n_images,
                                          SplitMix64& rng) {
    detail::require(n_images >= 1, "select sources: n_images must be >= 1");
    detail::require(base_index < pool_size, "select sources: base index out of range");
    detail::require(pool_size >= static_cast<size_t>(n_images),
                    "select sources: pool of " + std::to_string(pool_size) +
                        " cannot supply " + std::to_string(n_images) + " distinct images");
    std::vector<size_t> others;
    others.reserve(pool_size - 1);
    for (size_t i = 0; i < pool_size; ++i)
        if (i != base_index)
            others.push_back(i);
    const size_t take = static_cast<size_t>(n_images) - 1;
    for (size_t i = 0; i < take; ++i) {
        const size_t j = i + static_cast<size_t>(rng.uniform_below(
                                 static_cast<uint64_t>(others.size() - i)));
        std::swap(others[i], others[j]);
    }
    others.resize(take);
    return others;
}

/// Random scale, random crop, then color jitter on the image only. The drawn
/// scale is raised to cover the crop when needed; a range whose top cannot
/// cover the crop is an error. Draw order: scale, crop x, crop y, then one
/// factor per jitter op with nonzero strength (brightness, contrast,
/// saturation, hue).
inline std::pair<ImageBuffer, LabelMap> augment(const ImageBuffer& image, const LabelMap& label,
                                                const AugmentConfig& cfg, SplitMix64& rng) {
    detail::check_augment(cfg);
    detail::require(image.width() == label.width() && image.height() == label.height(),
                    "augment: image and label dimensions differ");
    detail::require(!image.empty(), "augment: empty image");

    const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const double needed = std::max(static_cast<double>(cfg.crop_w) / image.width(),
                                   static_cast<double>(cfg.crop_h) / image.height());
    detail::require(needed <= cfg.scale_hi,
                    "augment: crop " + std::to_string(cfg.crop_w) + "x" +
                        std::to_string(cfg.crop_h) + " exceeds the image at the top of the scale range");
    const double s_eff = std::max(s, needed);
    const int out_w = std::max<int>(cfg.crop_w, static_cast<int>(std::llround(image.width() * s_eff)));
    const int out_h = std::max<int>(cfg.crop_h, static_cast<int>(std::llround(image.height() * s_eff)));

    ImageBuffer img = (out_w == image.width() && out_h == image.height())
                          ? image
                          : resize_bilinear(image, out_w, out_h);
    LabelMap lbl = (out_w == label.width() && out_h == label.height())
                       ? label
                       : resize_nearest(label, out_w, out_h);

    const int x0 = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(out_w - cfg.crop_w) + 1));
    const int y0 = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(out_h - cfg.crop_h) + 1));
    img = crop(img, x0, y0, cfg.crop_w, cfg.crop_h);
    lbl = crop(lbl, x0, y0, cfg.crop_w, cfg.crop_h);

    const JitterConfig& j = cfg.jitter;
    if (j.brightness > 0.0)
        img = adjust_brightness(img, rng.uniform(std::max(0.0, 1.0 - j.brightness), 1.0 + j.brightness));
    if (j.contrast > 0.0)
        img = adjust_contrast(img, rng.uniform(std::max(0.0, 1.0 - j.contrast), 1.0 + j.contrast));
    if (j.saturation > 0.0)
        img = adjust_saturation(img, rng.uniform(std::max(0.0, 1.0 - j.saturation), 1.0 + j.saturation));
    if (j.hue > 0.0)
        img = adjust_hue(img, rng.uniform(-j.hue, j.hue));
    return {std::move(img), std::move(lbl)};
}

inline std::string synth_output_id(const std::string& base_id, int replica) {
    detail::require(replica >= 0, "synth: replica index must be >= 0");
    std::string r = std::to_string(replica);
    if (r.size() < 2)
        r.insert(0, 2 - r.size(), '0');
    return base_id + "_r" + r;
}

struct SynthOutput {
    std::string id;
    ImageBuffer image;
    LabelMap label;
};

using SampleLoader = std::function<SceneSample(size_t)>;

/// One synthesized output: pick sources, composite, then augment, all on a
/// stream derived from (seed, base index, replica index) alone, so results do
/// not depend on scheduling.
inline SynthOutput synthesize_sample(size_t pool_size, size_t base_index, int replica,
                                     const SynthConfig& cfg, const SampleLoader& load) {
    detail::check_synth(cfg);
    SplitMix64 rng(mix64(cfg.seed, static_cast<uint64_t>(base_index),
                         static_cast<uint64_t>(replica)));
    const auto sources = select_sources(pool_size, base_index, cfg.n_images, rng);

    std::vector<SceneSample> samples;
    samples.reserve(sources.size() + 1);
    samples.push_back(load(base_index));
    for (size_t idx : sources)
        samples.push_back(load(idx));

    Composite comp = composite(samples, cfg);
    SynthOutput out{synth_output_id(samples[0].id, replica), std::move(comp.image),
                    std::move(comp.label)};
    if (cfg.augment.enabled) {
        auto [img, lbl] = augment(out.image, out.label, cfg.augment, rng);
        out.image = std::move(img);
        out.label = std::move(lbl);
    }
    return out;
}

} // namespace segfuse
