#pragma once

#include <array>
#include <cmath>
#include <string_view>

#include "segfuse/core.hpp"
#include "segfuse/image_ops.hpp"

namespace segfuse {

namespace detail {

struct NamedColor {
    std::string_view name;
    uint8_t r, g, b;
};

/// Cityscapes visualization colors, keyed by class name so any table that
/// reuses the names gets the familiar look.
constexpr std::array<NamedColor, 19> kKnownColors{{
    {"road", 128, 64, 128},
    {"sidewalk", 244, 35, 232},
    {"building", 70, 70, 70},
    {"wall", 102, 102, 156},
    {"fence", 190, 153, 153},
    {"pole", 153, 153, 153},
    {"traffic light", 250, 170, 30},
    {"traffic sign", 220, 220, 0},
    {"vegetation", 107, 142, 35},
    {"terrain", 152, 251, 152},
    {"sky", 70, 130, 180},
    {"person", 220, 20, 60},
    {"rider", 255, 0, 0},
    {"car", 0, 0, 142},
    {"truck", 0, 0, 70},
    {"bus", 0, 60, 100},
    {"train", 0, 80, 100},
    {"motorcycle", 0, 0, 230},
    {"bicycle", 119, 11, 32},
}};

} // namespace detail

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
};

/// Color for one class: the Cityscapes color when the name is known, else a
/// stable golden-angle hue derived from the id.
inline Rgb class_color(const ClassEntry& entry) {
    for (const auto& c : detail::kKnownColors)
        if (c.name == entry.name)
            return {c.r, c.g, c.b};
    double h = entry.id * 0.61803398874989485;
    h -= std::floor(h);
    double r, g, b;
    detail::hsv_to_rgb({h, 0.65, 0.95}, r, g, b);
    return {detail::clamp_u8(r * 255.0), detail::clamp_u8(g * 255.0),
            detail::clamp_u8(b * 255.0)};
}

/// Label map rendered as RGB; ignore pixels come out black.
inline ImageBuffer colorize_labels(const LabelMap& labels, const ClassTable& table) {
    detail::require(!labels.empty(), "colorize: empty label map");
    std::array<Rgb, 256> lut{};
    for (const ClassEntry& c : table.classes())
        lut[static_cast<size_t>(c.id)] = class_color(c);
    ImageBuffer out(labels.width(), labels.height());
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x) {
            const Rgb c = lut[labels.at(x, y)];
            out.set(x, y, c.r, c.g, c.b);
        }
    return out;
}

} // namespace segfuse
