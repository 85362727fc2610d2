#pragma once

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <png.h>

#include "segfuse/core.hpp"
#include "segfuse/io/file.hpp"

namespace segfuse {

namespace detail {

struct MemCursor {
    const uint8_t* data;
    size_t size;
    size_t pos;
};

inline void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
    auto* c = static_cast<MemCursor*>(png_get_io_ptr(png));
    if (c->pos + n > c->size)
        png_error(png, "unexpected end of PNG stream");
    std::memcpy(out, c->data + c->pos, n);
    c->pos += n;
}

inline void png_mem_write(png_structp png, png_bytep data, png_size_t n) {
    auto* v = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
    v->insert(v->end(), data, data + n);
}

inline void png_mem_flush(png_structp) {}

struct PngReadGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngReadGuard() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        require(png != nullptr, "png: failed to allocate read state");
        info = png_create_info_struct(png);
        require(info != nullptr, "png: failed to allocate info state");
    }
    ~PngReadGuard() { png_destroy_read_struct(&png, &info, nullptr); }
    PngReadGuard(const PngReadGuard&) = delete;
    PngReadGuard& operator=(const PngReadGuard&) = delete;
};

struct PngWriteGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWriteGuard() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        require(png != nullptr, "png: failed to allocate write state");
        info = png_create_info_struct(png);
        require(info != nullptr, "png: failed to allocate info state");
    }
    ~PngWriteGuard() { png_destroy_write_struct(&png, &info); }
    PngWriteGuard(const PngWriteGuard&) = delete;
    PngWriteGuard& operator=(const PngWriteGuard&) = delete;
};

inline void check_png_signature(std::span<const uint8_t> bytes, const std::string& what) {
    require(bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0, what + ": not a PNG file");
}

/// Strict single-channel decode shared by the label and depth readers.
/// Rows come out in PNG network order (big-endian for 16-bit).
inline std::vector<uint8_t> decode_gray(std::span<const uint8_t> bytes, int want_depth, int& w,
                                        int& h, const std::string& what) {
    check_png_signature(bytes, what);
    PngReadGuard g;
    MemCursor cur{bytes.data(), bytes.size(), 0};
    std::vector<uint8_t> rows;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(g.png)))
        fail(what + ": PNG decode failed");
    png_set_read_fn(g.png, &cur, &png_mem_read);
    png_read_info(g.png, g.info);
    const int color = png_get_color_type(g.png, g.info);
    const int depth = png_get_bit_depth(g.png, g.info);
    const int channels = png_get_channels(g.png, g.info);
    if (color != PNG_COLOR_TYPE_GRAY)
        fail(what + ": expected a single-channel grayscale PNG, got " +
             std::to_string(channels) + " channel(s) of color type " + std::to_string(color));
    if (depth != want_depth)
        fail(what + ": expected bit depth " + std::to_string(want_depth) + ", got " +
             std::to_string(depth));
    w = static_cast<int>(png_get_image_width(g.png, g.info));
    h = static_cast<int>(png_get_image_height(g.png, g.info));
    check_dims(w, h);
    const size_t rowbytes = png_get_rowbytes(g.png, g.info);
    rows.resize(rowbytes * static_cast<size_t>(h));
    row_ptrs.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        row_ptrs[static_cast<size_t>(y)] = rows.data() + rowbytes * static_cast<size_t>(y);
    png_read_image(g.png, row_ptrs.data());
    png_read_end(g.png, nullptr);
    return rows;
}

inline std::vector<uint8_t> encode_png(int w, int h, int color_type, int bit_depth,
                                       const std::vector<png_bytep>& row_ptrs) {
    PngWriteGuard g;
    std::vector<uint8_t> out;
    if (setjmp(png_jmpbuf(g.png)))
        fail("png: encode failed");
    png_set_write_fn(g.png, &out, &png_mem_write, &png_mem_flush);
    png_set_compression_level(g.png, 6);
    png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    png_write_image(g.png, const_cast<png_bytepp>(row_ptrs.data()));
    png_write_end(g.png, nullptr);
    return out;
}

} // namespace detail

/// PNG primitives. The typed readers and writers below are built on these;
/// they are exposed so tests and scripts can craft arbitrary files.
inline std::vector<uint8_t> encode_gray8_png(int w, int h, std::span<const uint8_t> values) {
    detail::check_dims(w, h);
    detail::require(values.size() == static_cast<size_t>(w) * h,
                    "png: gray8 value count does not match dimensions");
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(values.data() + static_cast<size_t>(y) * w);
    return detail::encode_png(w, h, PNG_COLOR_TYPE_GRAY, 8, rows);
}

inline std::vector<uint8_t> encode_gray16_png(int w, int h, std::span<const uint16_t> values) {
    detail::check_dims(w, h);
    detail::require(values.size() == static_cast<size_t>(w) * h,
                    "png: gray16 value count does not match dimensions");
    std::vector<uint8_t> be(values.size() * 2);
    for (size_t i = 0; i < values.size(); ++i) {
        be[2 * i] = static_cast<uint8_t>(values[i] >> 8);
        be[2 * i + 1] = static_cast<uint8_t>(values[i] & 0xFF);
    }
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] = be.data() + static_cast<size_t>(y) * w * 2;
    return detail::encode_png(w, h, PNG_COLOR_TYPE_GRAY, 16, rows);
}

inline std::vector<uint8_t> encode_rgb8_png(int w, int h, std::span<const uint8_t> rgb) {
    detail::check_dims(w, h);
    detail::require(rgb.size() == static_cast<size_t>(w) * h * 3,
                    "png: rgb byte count does not match dimensions");
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * w * 3);
    return detail::encode_png(w, h, PNG_COLOR_TYPE_RGB, 8, rows);
}

inline std::vector<uint16_t> decode_gray16_png(std::span<const uint8_t> bytes, int& w, int& h,
                                               const std::string& what) {
    const auto rows = detail::decode_gray(bytes, 16, w, h, what);
    std::vector<uint16_t> out(static_cast<size_t>(w) * h);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint16_t>((rows[2 * i] << 8) | rows[2 * i + 1]);
    return out;
}

inline std::vector<uint8_t> decode_gray8_png(std::span<const uint8_t> bytes, int& w, int& h,
                                             const std::string& what) {
    return detail::decode_gray(bytes, 8, w, h, what);
}

inline LabelMap read_label_png(const std::filesystem::path& path, const ClassTable& table) {
    const std::string what = "label png '" + path.string() + "'";
    int w = 0, h = 0;
    auto values = decode_gray8_png(read_file(path), w, h, what);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const uint8_t v = values[static_cast<size_t>(y) * w + x];
            if (!table.contains(v) && v != table.ignore_id())
                detail::fail(what + ": value " + std::to_string(v) + " at pixel (" +
                             std::to_string(x) + "," + std::to_string(y) +
                             ") is outside the class table");
        }
    return LabelMap(w, h, std::move(values));
}

inline void write_label_png(const std::filesystem::path& path, const LabelMap& label) {
    detail::require(!label.empty(), "label png: empty label map");
    write_file_atomic(path,
                      encode_gray8_png(label.width(), label.height(), label.values()));
}

constexpr double kDefaultDepthScale = 256.0;

/// 16-bit depth PNG: value = raw / scale; raw 0 and 65535 both decode as
/// invalid (missing and too-far pixels respectively).
inline DepthMap read_depth_png(const std::filesystem::path& path,
                               double scale = kDefaultDepthScale) {
    detail::require(std::isfinite(scale) && scale > 0.0, "depth png: scale must be > 0");
    const std::string what = "depth png '" + path.string() + "'";
    int w = 0, h = 0;
    const auto raw = decode_gray16_png(read_file(path), w, h, what);
    DepthMap out(w, h, 0.0f, false);
    for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == 0 || raw[i] == 65535)
            continue;
        out.values()[i] = static_cast<float>(raw[i] / scale);
        out.valid_mask()[i] = 1;
    }
    return out;
}

/// Valid depths are rounded to raw = depth * scale and clamped to [1, 65534]
/// so they can never collide with the invalid codes; invalid pixels write 0.
inline void write_depth_png(const std::filesystem::path& path, const DepthMap& depth,
                            double scale = kDefaultDepthScale) {
    detail::require(std::isfinite(scale) && scale > 0.0, "depth png: scale must be > 0");
    detail::require(!depth.empty(), "depth png: empty depth map");
    std::vector<uint16_t> raw(depth.pixels(), 0);
    for (size_t i = 0; i < raw.size(); ++i) {
        if (!depth.valid_mask()[i])
            continue;
        const float d = depth.values()[i];
        detail::require(std::isfinite(d) && d > 0.0f,
                        "depth png: valid pixel with non-positive or non-finite depth");
        const long long v = std::llround(static_cast<double>(d) * scale);
        raw[i] = static_cast<uint16_t>(std::clamp<long long>(v, 1, 65534));
    }
    write_file_atomic(path, encode_gray16_png(depth.width(), depth.height(), raw));
}

/// Lenient color decode: palette, gray, and alpha inputs are normalized to
/// 8-bit RGB.
inline ImageBuffer read_image_png(const std::filesystem::path& path) {
    const std::string what = "image png '" + path.string() + "'";
    const auto bytes = read_file(path);
    detail::check_png_signature(bytes, what);
    detail::PngReadGuard g;
    detail::MemCursor cur{bytes.data(), bytes.size(), 0};
    std::vector<uint8_t> rgb;
    std::vector<png_bytep> row_ptrs;
    int w = 0, h = 0;
    if (setjmp(png_jmpbuf(g.png)))
        detail::fail(what + ": PNG decode failed");
    png_set_read_fn(g.png, &cur, &detail::png_mem_read);
    png_read_info(g.png, g.info);
    png_set_palette_to_rgb(g.png);
    png_set_expand_gray_1_2_4_to_8(g.png);
    if (png_get_valid(g.png, g.info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(g.png);
    png_set_strip_16(g.png);
    png_set_gray_to_rgb(g.png);
    png_set_strip_alpha(g.png);
    png_read_update_info(g.png, g.info);
    detail::require(png_get_channels(g.png, g.info) == 3 &&
                        png_get_bit_depth(g.png, g.info) == 8,
                    what + ": cannot normalize to 8-bit RGB");
    w = static_cast<int>(png_get_image_width(g.png, g.info));
    h = static_cast<int>(png_get_image_height(g.png, g.info));
    detail::check_dims(w, h);
    rgb.resize(static_cast<size_t>(w) * h * 3);
    row_ptrs.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        row_ptrs[static_cast<size_t>(y)] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(g.png, row_ptrs.data());
    png_read_end(g.png, nullptr);
    return ImageBuffer(w, h, std::move(rgb));
}

inline void write_image_png(const std::filesystem::path& path, const ImageBuffer& image) {
    detail::require(!image.empty(), "image png: empty image");
    write_file_atomic(path, encode_rgb8_png(image.width(), image.height(), image.bytes()));
}

} // namespace segfuse
