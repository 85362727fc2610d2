#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segfuse/core.hpp"
#include "segfuse/image_ops.hpp"
#include "segfuse/palette.hpp"
#include "segfuse/rng.hpp"

namespace segfuse {

/// Synthetic scene generator: banded stuff layout (sky over buildings over
/// sidewalk over road) with a ground-plane depth gradient and rectangular
/// things sprites, plus two one-hot logit branches. corrupt_dep flips the
/// depth branch on things pixels, corrupt_uda flips the UDA branch on stuff
/// pixels, so each branch is wrong exactly where the other is trustworthy.
struct FixtureSpec {
    int count = 10;
    int width = 128;
    int height = 64;
    double corrupt_dep = 0.0;
    double corrupt_uda = 0.0;
    int sprites = 6;
    uint64_t seed = 0;
};

constexpr float kFixtureLogitMagnitude = 6.0f;
constexpr double kFixtureDepthFar = 80.0;
constexpr double kFixtureDepthNear = 3.0;

namespace detail {

inline void check_fixture_spec(const FixtureSpec& spec) {
    require(spec.count >= 1, "fixtures: count must be >= 1");
    require(spec.width >= 16 && spec.height >= 16,
            "fixtures: size must be at least 16x16");
    require(spec.corrupt_dep >= 0.0 && spec.corrupt_dep <= 1.0 && spec.corrupt_uda >= 0.0 &&
                spec.corrupt_uda <= 1.0,
            "fixtures: corruption rates must be in [0, 1]");
    require(spec.sprites >= 0, "fixtures: sprite count must be >= 0");
}

struct BandLayout {
    int sky_id, building_id, sidewalk_id, road_id;
    int sky_end, building_end, sidewalk_end;

    int class_at_row(int y) const {
        if (y < sky_end)
            return sky_id;
        if (y < building_end)
            return building_id;
        if (y < sidewalk_end)
            return sidewalk_id;
        return road_id;
    }
    std::vector<int> band_ids() const { return {sky_id, building_id, sidewalk_id, road_id}; }
};

inline BandLayout band_layout(const ClassTable& table, int height) {
    BandLayout out{};
    auto need = [&](const char* name) {
        auto id = table.find(name);
        require(id.has_value(),
                std::string("fixtures: class table has no '") + name + "' class");
        return *id;
    };
    out.sky_id = need("sky");
    out.building_id = need("building");
    out.sidewalk_id = need("sidewalk");
    out.road_id = need("road");
    out.sky_end = static_cast<int>(height * 0.30);
    out.building_end = static_cast<int>(height * 0.55);
    out.sidewalk_end = static_cast<int>(height * 0.65);
    return out;
}

inline LogitTensor one_hot_logits(const LabelMap& label, size_t num_classes) {
    LogitTensor t(label.width(), label.height(), static_cast<int>(num_classes), 0.0f);
    for (int y = 0; y < label.height(); ++y)
        for (int x = 0; x < label.width(); ++x)
            t.at(x, y)[label.at(x, y)] = kFixtureLogitMagnitude;
    return t;
}

/// Move a pixel's one-hot peak to a different class drawn from `targets`.
inline void corrupt_pixels(LogitTensor& logits, const LabelMap& label,
                           const std::vector<int>& eligible_lut_ids, double rate,
                           const std::vector<int>& targets, SplitMix64& rng) {
    if (rate <= 0.0)
        return;
    std::array<uint8_t, 256> eligible{};
    for (int id : eligible_lut_ids)
        eligible[static_cast<size_t>(id)] = 1;
    for (int y = 0; y < label.height(); ++y)
        for (int x = 0; x < label.width(); ++x) {
            const uint8_t truth = label.at(x, y);
            if (!eligible[truth])
                continue;
            if (rng.next_double() >= rate)
                continue;
            size_t pos = targets.size();
            for (size_t i = 0; i < targets.size(); ++i)
                if (targets[i] == truth)
                    pos = i;
            const size_t pool = targets.size() - (pos < targets.size() ? 1 : 0);
            require(pool >= 1, "fixtures: no corruption target class available");
            size_t j = static_cast<size_t>(rng.uniform_below(pool));
            if (pos < targets.size() && j >= pos)
                ++j;
            auto z = logits.at(x, y);
            z[truth] = 0.0f;
            z[static_cast<size_t>(targets[j])] = kFixtureLogitMagnitude;
        }
}

} // namespace detail

inline std::string fixture_scene_id(int index) {
    std::string n = std::to_string(index);
    if (n.size() < 4)
        n.insert(0, 4 - n.size(), '0');
    return "scene_" + n;
}

/// Deterministic per (table, spec, index); scenes can be generated in any
/// order or in parallel.
inline SceneSample generate_fixture_scene(const ClassTable& table, const FixtureSpec& spec,
                                          int index) {
    detail::check_fixture_spec(spec);
    detail::require(index >= 0 && index < spec.count, "fixtures: scene index out of range");
    const int w = spec.width, h = spec.height;
    const detail::BandLayout bands = detail::band_layout(table, h);
    const std::vector<int> things = table.thing_ids();
    detail::require(spec.sprites == 0 || !things.empty(),
                    "fixtures: sprites requested but the class table has no things classes");
    detail::require(spec.corrupt_dep == 0.0 || things.size() >= 2,
                    "fixtures: depth-branch corruption needs at least two things classes");

    SceneSample s;
    s.id = fixture_scene_id(index);
    s.image = ImageBuffer(w, h);
    s.depth = DepthMap(w, h, 0.0f, false);
    s.label = LabelMap(w, h);

    SplitMix64 rng(mix64(spec.seed, static_cast<uint64_t>(index), 0));

    std::array<double, 4> band_gain{};
    for (double& g : band_gain)
        g = rng.uniform(0.85, 1.15);
    for (int y = 0; y < h; ++y) {
        const int cls = bands.class_at_row(y);
        const int band = y < bands.sky_end        ? 0
                         : y < bands.building_end ? 1
                         : y < bands.sidewalk_end ? 2
                                                  : 3;
        const Rgb color = class_color(table.at(cls));
        const uint8_t r = detail::clamp_u8(color.r * band_gain[static_cast<size_t>(band)]);
        const uint8_t g = detail::clamp_u8(color.g * band_gain[static_cast<size_t>(band)]);
        const uint8_t b = detail::clamp_u8(color.b * band_gain[static_cast<size_t>(band)]);
        const bool ground = y >= bands.sky_end;
        float depth = 0.0f;
        if (ground) {
            const double t = (h - 1 == bands.sky_end)
                                 ? 1.0
                                 : static_cast<double>(y - bands.sky_end) / (h - 1 - bands.sky_end);
            depth = static_cast<float>(kFixtureDepthFar +
                                       (kFixtureDepthNear - kFixtureDepthFar) * t);
        }
        for (int x = 0; x < w; ++x) {
            s.label->at(x, y) = static_cast<uint8_t>(cls);
            s.image.set(x, y, r, g, b);
            if (ground) {
                s.depth.at(x, y) = depth;
                s.depth.set_valid(x, y, true);
            }
        }
    }

    struct Sprite {
        int cls, x0, y0, w, h;
        float depth;
        double gain;
    };
    std::vector<Sprite> sprites;
    const int ground_h = h - bands.sky_end;
    for (int j = 0; j < spec.sprites; ++j) {
        Sprite sp;
        const size_t turn = static_cast<size_t>(index) * static_cast<size_t>(spec.sprites) +
                            static_cast<size_t>(j);
        sp.cls = things[turn % things.size()];
        sp.w = static_cast<int>(rng.uniform_int(std::max(2, w / 16), std::max(2, w / 8)));
        sp.h = static_cast<int>(rng.uniform_int(std::max(2, h / 8), std::max(2, h / 4)));
        sp.depth = static_cast<float>(rng.uniform(kFixtureDepthNear + 1.0, 60.0));
        sp.x0 = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(w - sp.w) + 1));
        sp.y0 = bands.sky_end +
                static_cast<int>(rng.uniform_below(static_cast<uint64_t>(ground_h - sp.h) + 1));
        sp.gain = rng.uniform(0.8, 1.2);
        sprites.push_back(sp);
    }
    std::stable_sort(sprites.begin(), sprites.end(),
                     [](const Sprite& a, const Sprite& b) { return a.depth > b.depth; });
    for (const Sprite& sp : sprites) {
        const Rgb color = class_color(table.at(sp.cls));
        const uint8_t r = detail::clamp_u8(color.r * sp.gain);
        const uint8_t g = detail::clamp_u8(color.g * sp.gain);
        const uint8_t b = detail::clamp_u8(color.b * sp.gain);
        for (int y = sp.y0; y < sp.y0 + sp.h; ++y)
            for (int x = sp.x0; x < sp.x0 + sp.w; ++x) {
                s.label->at(x, y) = static_cast<uint8_t>(sp.cls);
                s.image.set(x, y, r, g, b);
                s.depth.at(x, y) = sp.depth;
                s.depth.set_valid(x, y, true);
            }
    }

    s.logits_dep = detail::one_hot_logits(*s.label, table.size());
    s.logits_uda = *s.logits_dep;

    std::vector<int> stuff_ids;
    for (const ClassEntry& c : table.classes())
        if (!c.is_thing)
            stuff_ids.push_back(c.id);

    SplitMix64 rng_dep(mix64(spec.seed, static_cast<uint64_t>(index), 1));
    detail::corrupt_pixels(*s.logits_dep, *s.label, things, spec.corrupt_dep, things, rng_dep);

    SplitMix64 rng_uda(mix64(spec.seed, static_cast<uint64_t>(index), 2));
    detail::corrupt_pixels(*s.logits_uda, *s.label, stuff_ids, spec.corrupt_uda,
                           bands.band_ids(), rng_uda);

    return s;
}

} // namespace segfuse
