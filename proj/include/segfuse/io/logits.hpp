#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segfuse/core.hpp"
#include "segfuse/io/file.hpp"

namespace segfuse {

/// "LGT1" logits container: 4 magic bytes, little-endian u32 height, width,
/// channels, then height*width*channels little-endian f32 in (row, column,
/// channel) order.

namespace detail {

constexpr char kLogitsMagic[4] = {'L', 'G', 'T', '1'};

inline void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xFF));
}

inline uint32_t get_u32_le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

} // namespace detail

template <class Tag>
std::vector<uint8_t> encode_tensor(const ChannelTensor<Tag>& t) {
    detail::require(!t.empty(), "logits: empty tensor");
    for (float v : t.values())
        detail::require(std::isfinite(v), "logits: non-finite value");
    std::vector<uint8_t> out;
    out.reserve(16 + t.values().size() * 4);
    out.insert(out.end(), detail::kLogitsMagic, detail::kLogitsMagic + 4);
    detail::put_u32_le(out, static_cast<uint32_t>(t.height()));
    detail::put_u32_le(out, static_cast<uint32_t>(t.width()));
    detail::put_u32_le(out, static_cast<uint32_t>(t.channels()));
    for (float v : t.values())
        detail::put_u32_le(out, std::bit_cast<uint32_t>(v));
    return out;
}

template <class Tag>
ChannelTensor<Tag> decode_tensor(std::span<const uint8_t> bytes, const std::string& what) {
    detail::require(bytes.size() >= 4, what + ": not a logits file (shorter than the magic)");
    if (std::memcmp(bytes.data(), "LGT", 3) != 0)
        detail::fail(what + ": not a logits file (bad magic)");
    if (bytes[3] != '1')
        detail::fail(what + ": unsupported logits format version '" +
                     std::string(1, static_cast<char>(bytes[3])) + "'");
    detail::require(bytes.size() >= 16, what + ": truncated header");
    const uint32_t h = detail::get_u32_le(bytes.data() + 4);
    const uint32_t w = detail::get_u32_le(bytes.data() + 8);
    const uint32_t c = detail::get_u32_le(bytes.data() + 12);
    detail::require(h >= 1 && w >= 1 && c >= 1, what + ": zero dimension in header");
    detail::require(h <= (1u << 20) && w <= (1u << 20) && c <= (1u << 16),
                    what + ": implausibly large dimensions");
    const uint64_t count = static_cast<uint64_t>(h) * w * c;
    const uint64_t want = 16 + count * 4;
    if (bytes.size() < want)
        detail::fail(what + ": truncated payload (" + std::to_string(bytes.size()) +
                     " bytes, header promises " + std::to_string(want) + ")");
    if (bytes.size() > want)
        detail::fail(what + ": trailing bytes after payload");
    std::vector<float> values(count);
    for (uint64_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(detail::get_u32_le(bytes.data() + 16 + i * 4));
        if (!std::isfinite(values[i]))
            detail::fail(what + ": non-finite value at flat index " + std::to_string(i));
    }
    return ChannelTensor<Tag>(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c),
                              std::move(values));
}

inline std::vector<uint8_t> encode_logits(const LogitTensor& t) { return encode_tensor(t); }

inline LogitTensor decode_logits(std::span<const uint8_t> bytes, const std::string& what) {
    return decode_tensor<detail::LogitTag>(bytes, what);
}

inline LogitTensor read_logits(const std::filesystem::path& path) {
    return decode_logits(read_file(path), "logits '" + path.string() + "'");
}

inline void write_logits(const std::filesystem::path& path, const LogitTensor& t) {
    write_file_atomic(path, encode_logits(t));
}

/// Fused score tensors reuse the same container format.
inline ScoreTensor read_scores(const std::filesystem::path& path) {
    return decode_tensor<detail::ScoreTag>(read_file(path), "scores '" + path.string() + "'");
}

inline void write_scores(const std::filesystem::path& path, const ScoreTensor& t) {
    write_file_atomic(path, encode_tensor(t));
}

} // namespace segfuse
