#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "segfuse/core.hpp"

namespace segfuse {

namespace detail {

inline uint8_t clamp_u8(double v) {
    return static_cast<uint8_t>(std::clamp<long>(std::llround(v), 0, 255));
}

/// Pixel-center coordinate mapping; collapses to the identity when the sizes
/// are equal, which keeps no-op resizes byte-exact.
inline double src_coord(int dst, int src_size, int dst_size) {
    return (dst + 0.5) * (static_cast<double>(src_size) / dst_size) - 0.5;
}

} // namespace detail

inline ImageBuffer resize_bilinear(const ImageBuffer& in, int out_w, int out_h) {
    detail::check_dims(out_w, out_h);
    detail::require(!in.empty(), "resize: empty image");
    ImageBuffer out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const double sy = detail::src_coord(y, in.height(), out_h);
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, in.height() - 1);
        const int y1 = std::min(y0 + 1, in.height() - 1);
        const double fy = std::clamp(sy - y0, 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double sx = detail::src_coord(x, in.width(), out_w);
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, in.width() - 1);
            const int x1 = std::min(x0 + 1, in.width() - 1);
            const double fx = std::clamp(sx - x0, 0.0, 1.0);
            const uint8_t* p00 = in.at(x0, y0);
            const uint8_t* p10 = in.at(x1, y0);
            const uint8_t* p01 = in.at(x0, y1);
            const uint8_t* p11 = in.at(x1, y1);
            uint8_t* dst = out.at(x, y);
            for (int c = 0; c < 3; ++c) {
                const double top = p00[c] + (p10[c] - p00[c]) * fx;
                const double bot = p01[c] + (p11[c] - p01[c]) * fx;
                dst[c] = detail::clamp_u8(top + (bot - top) * fy);
            }
        }
    }
    return out;
}

/// Nearest-neighbor resize; never invents label values.
inline LabelMap resize_nearest(const LabelMap& in, int out_w, int out_h) {
    detail::check_dims(out_w, out_h);
    detail::require(!in.empty(), "resize: empty label map");
    LabelMap out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::clamp(
            static_cast<int>(std::floor(detail::src_coord(y, in.height(), out_h) + 0.5)), 0,
            in.height() - 1);
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::clamp(
                static_cast<int>(std::floor(detail::src_coord(x, in.width(), out_w) + 0.5)), 0,
                in.width() - 1);
            out.at(x, y) = in.at(sx, sy);
        }
    }
    return out;
}

namespace detail {

inline void check_crop(int x0, int y0, int w, int h, int in_w, int in_h) {
    require(w >= 1 && h >= 1, "crop: dimensions must be >= 1");
    require(x0 >= 0 && y0 >= 0 && x0 + w <= in_w && y0 + h <= in_h,
            "crop: window " + std::to_string(w) + "x" + std::to_string(h) + "+" +
                std::to_string(x0) + "+" + std::to_string(y0) + " exceeds image " +
                std::to_string(in_w) + "x" + std::to_string(in_h));
}

} // namespace detail

inline ImageBuffer crop(const ImageBuffer& in, int x0, int y0, int w, int h) {
    detail::check_crop(x0, y0, w, h, in.width(), in.height());
    ImageBuffer out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const uint8_t* p = in.at(x0 + x, y0 + y);
            out.set(x, y, p[0], p[1], p[2]);
        }
    return out;
}

inline LabelMap crop(const LabelMap& in, int x0, int y0, int w, int h) {
    detail::check_crop(x0, y0, w, h, in.width(), in.height());
    LabelMap out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = in.at(x0 + x, y0 + y);
    return out;
}

inline ImageBuffer adjust_brightness(const ImageBuffer& in, double factor) {
    detail::require(factor >= 0.0, "jitter: brightness factor must be >= 0");
    ImageBuffer out = in;
    for (uint8_t& b : out.bytes())
        b = detail::clamp_u8(b * factor);
    return out;
}

namespace detail {

inline double luma(const uint8_t* p) { return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]; }

} // namespace detail

/// Blend toward the image's mean gray level.
inline ImageBuffer adjust_contrast(const ImageBuffer& in, double factor) {
    detail::require(factor >= 0.0, "jitter: contrast factor must be >= 0");
    detail::require(!in.empty(), "jitter: empty image");
    double mean = 0.0;
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x)
            mean += detail::luma(in.at(x, y));
    mean /= static_cast<double>(in.pixels());
    ImageBuffer out = in;
    for (uint8_t& b : out.bytes())
        b = detail::clamp_u8(mean + factor * (b - mean));
    return out;
}

/// Blend toward the per-pixel gray level.
inline ImageBuffer adjust_saturation(const ImageBuffer& in, double factor) {
    detail::require(factor >= 0.0, "jitter: saturation factor must be >= 0");
    ImageBuffer out = in;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            uint8_t* p = out.at(x, y);
            const double g = detail::luma(p);
            for (int c = 0; c < 3; ++c)
                p[c] = detail::clamp_u8(g + factor * (p[c] - g));
        }
    return out;
}

namespace detail {

struct Hsv {
    double h, s, v; // h in [0,1)
};

inline Hsv rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    Hsv out{0.0, 0.0, mx};
    if (mx > 0.0)
        out.s = d / mx;
    if (d > 0.0) {
        if (mx == r)
            out.h = (g - b) / d;
        else if (mx == g)
            out.h = 2.0 + (b - r) / d;
        else
            out.h = 4.0 + (r - g) / d;
        out.h /= 6.0;
        if (out.h < 0.0)
            out.h += 1.0;
    }
    return out;
}

inline void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
    const double h6 = hsv.h * 6.0;
    const int i = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    const double p = hsv.v * (1.0 - hsv.s);
    const double q = hsv.v * (1.0 - hsv.s * f);
    const double t = hsv.v * (1.0 - hsv.s * (1.0 - f));
    switch (i) {
    case 0: r = hsv.v; g = t; b = p; break;
    case 1: r = q; g = hsv.v; b = p; break;
    case 2: r = p; g = hsv.v; b = t; break;
    case 3: r = p; g = q; b = hsv.v; break;
    case 4: r = t; g = p; b = hsv.v; break;
    default: r = hsv.v; g = p; b = q; break;
    }
}

} // namespace detail

/// Rotate hue by `shift` (fraction of a full turn, in [-0.5, 0.5]).
inline ImageBuffer adjust_hue(const ImageBuffer& in, double shift) {
    detail::require(shift >= -0.5 && shift <= 0.5, "jitter: hue shift must be in [-0.5, 0.5]");
    ImageBuffer out = in;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            uint8_t* px = out.at(x, y);
            detail::Hsv hsv =
                detail::rgb_to_hsv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0);
            hsv.h += shift;
            hsv.h -= std::floor(hsv.h);
            double r, g, b;
            detail::hsv_to_rgb(hsv, r, g, b);
            px[0] = detail::clamp_u8(r * 255.0);
            px[1] = detail::clamp_u8(g * 255.0);
            px[2] = detail::clamp_u8(b * 255.0);
        }
    return out;
}

} // namespace segfuse
