#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace segfuse {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond)
        fail(msg);
}

} // namespace detail

/// One semantic class: dense train id, display name, things/stuff flag.
struct ClassEntry {
    int id = 0;
    std::string name;
    bool is_thing = false;

    bool operator==(const ClassEntry&) const = default;
};

/// The class vocabulary. Ids are exactly {0..C-1}; ignore_id marks unlabelled
/// pixels and is never a class id. Immutable after construction.
class ClassTable {
public:
    ClassTable(std::vector<ClassEntry> classes, int ignore_id = 255)
        : classes_(std::move(classes)), ignore_id_(ignore_id) {
        detail::require(!classes_.empty(), "class table: empty class list");
        detail::require(classes_.size() <= 255, "class table: more than 255 classes");
        std::sort(classes_.begin(), classes_.end(),
                  [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });
        for (size_t i = 0; i < classes_.size(); ++i) {
            detail::require(classes_[i].id == static_cast<int>(i),
                            "class table: ids must be exactly {0..C-1}, got id " +
                                std::to_string(classes_[i].id) + " at position " + std::to_string(i));
            detail::require(!classes_[i].name.empty(), "class table: empty class name");
            for (size_t j = i + 1; j < classes_.size(); ++j)
                detail::require(classes_[i].name != classes_[j].name,
                                "class table: duplicate class name '" + classes_[i].name + "'");
        }
        detail::require(ignore_id_ >= 0 && ignore_id_ <= 255,
                        "class table: ignore_id must be in [0,255]");
        detail::require(ignore_id_ >= static_cast<int>(classes_.size()),
                        "class table: ignore_id " + std::to_string(ignore_id_) +
                            " collides with a class id");
    }

    size_t size() const { return classes_.size(); }
    int ignore_id() const { return ignore_id_; }
    const std::vector<ClassEntry>& classes() const { return classes_; }
    const ClassEntry& at(int id) const {
        detail::require(contains(id), "class table: no class with id " + std::to_string(id));
        return classes_[static_cast<size_t>(id)];
    }
    bool contains(int id) const { return id >= 0 && id < static_cast<int>(classes_.size()); }
    bool is_thing(int id) const { return at(id).is_thing; }

    std::optional<int> find(std::string_view name) const {
        for (const auto& c : classes_)
            if (c.name == name)
                return c.id;
        return std::nullopt;
    }

    std::vector<int> thing_ids() const {
        std::vector<int> ids;
        for (const auto& c : classes_)
            if (c.is_thing)
                ids.push_back(c.id);
        return ids;
    }

    bool operator==(const ClassTable&) const = default;

private:
    std::vector<ClassEntry> classes_;
    int ignore_id_;
};

/// Named preset tables. "cityscapes19" is the 19-class train-id vocabulary,
/// "synseq12" the 12-class one; things default to the instance-style classes
/// plus traffic light and traffic sign.
inline ClassTable default_class_table(std::string_view preset) {
    if (preset == "cityscapes19") {
        return ClassTable({
            {0, "road", false},
            {1, "sidewalk", false},
            {2, "building", false},
            {3, "wall", false},
            {4, "fence", false},
            {5, "pole", false},
            {6, "traffic light", true},
            {7, "traffic sign", true},
            {8, "vegetation", false},
            {9, "terrain", false},
            {10, "sky", false},
            {11, "person", true},
            {12, "rider", true},
            {13, "car", true},
            {14, "truck", true},
            {15, "bus", true},
            {16, "train", true},
            {17, "motorcycle", true},
            {18, "bicycle", true},
        });
    }
    if (preset == "synseq12") {
        return ClassTable({
            {0, "sky", false},
            {1, "building", false},
            {2, "road", false},
            {3, "sidewalk", false},
            {4, "fence", false},
            {5, "vegetation", false},
            {6, "pole", false},
            {7, "car", true},
            {8, "traffic sign", true},
            {9, "person", true},
            {10, "bicycle", true},
            {11, "traffic light", true},
        });
    }
    detail::fail("unknown class-table preset '" + std::string(preset) +
                 "' (expected cityscapes19 or synseq12)");
}

namespace detail {

inline void check_dims(int width, int height) {
    require(width >= 1 && height >= 1, "raster dimensions must be >= 1, got " +
                                           std::to_string(width) + "x" + std::to_string(height));
}

} // namespace detail

/// Per-pixel class ids (or ignore_id). Row-major uint8 storage.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int width, int height, uint8_t fill = 0)
        : w_(width), h_(height), v_(static_cast<size_t>(width) * height, fill) {
        detail::check_dims(width, height);
    }
    LabelMap(int width, int height, std::vector<uint8_t> values)
        : w_(width), h_(height), v_(std::move(values)) {
        detail::check_dims(width, height);
        detail::require(v_.size() == pixels(), "label map: value count does not match dimensions");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    size_t pixels() const { return static_cast<size_t>(w_) * h_; }
    bool empty() const { return v_.empty(); }

    uint8_t at(int x, int y) const { return v_[idx(x, y)]; }
    uint8_t& at(int x, int y) { return v_[idx(x, y)]; }
    std::span<const uint8_t> values() const { return v_; }
    std::span<uint8_t> values() { return v_; }

    bool operator==(const LabelMap&) const = default;

private:
    size_t idx(int x, int y) const { return static_cast<size_t>(y) * w_ + x; }
    int w_ = 0, h_ = 0;
    std::vector<uint8_t> v_;
};

/// Per-pixel depth in arbitrary monotone units (larger = farther) plus a
/// validity mask. Invalid pixels carry no usable depth value.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height, float fill = 1.0f, bool valid = true)
        : w_(width), h_(height), v_(static_cast<size_t>(width) * height, fill),
          valid_(static_cast<size_t>(width) * height, valid ? 1 : 0) {
        detail::check_dims(width, height);
    }
    DepthMap(int width, int height, std::vector<float> values, std::vector<uint8_t> valid)
        : w_(width), h_(height), v_(std::move(values)), valid_(std::move(valid)) {
        detail::check_dims(width, height);
        detail::require(v_.size() == pixels() && valid_.size() == pixels(),
                        "depth map: buffer size does not match dimensions");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    size_t pixels() const { return static_cast<size_t>(w_) * h_; }
    bool empty() const { return v_.empty(); }

    float at(int x, int y) const { return v_[idx(x, y)]; }
    float& at(int x, int y) { return v_[idx(x, y)]; }
    bool valid_at(int x, int y) const { return valid_[idx(x, y)] != 0; }
    void set_valid(int x, int y, bool valid) { valid_[idx(x, y)] = valid ? 1 : 0; }

    std::span<const float> values() const { return v_; }
    std::span<float> values() { return v_; }
    std::span<const uint8_t> valid_mask() const { return valid_; }
    std::span<uint8_t> valid_mask() { return valid_; }

    size_t valid_count() const {
        size_t n = 0;
        for (uint8_t m : valid_)
            n += m != 0;
        return n;
    }

    bool operator==(const DepthMap&) const = default;

private:
    size_t idx(int x, int y) const { return static_cast<size_t>(y) * w_ + x; }
    int w_ = 0, h_ = 0;
    std::vector<float> v_;
    std::vector<uint8_t> valid_;
};

/// Interleaved 8-bit RGB image.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height)
        : w_(width), h_(height), v_(static_cast<size_t>(width) * height * 3, 0) {
        detail::check_dims(width, height);
    }
    ImageBuffer(int width, int height, std::vector<uint8_t> rgb)
        : w_(width), h_(height), v_(std::move(rgb)) {
        detail::check_dims(width, height);
        detail::require(v_.size() == static_cast<size_t>(width) * height * 3,
                        "image buffer: byte count does not match dimensions");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    size_t pixels() const { return static_cast<size_t>(w_) * h_; }
    bool empty() const { return v_.empty(); }

    /// Pointer to the 3 channel bytes at (x, y).
    const uint8_t* at(int x, int y) const { return v_.data() + idx(x, y); }
    uint8_t* at(int x, int y) { return v_.data() + idx(x, y); }
    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        uint8_t* p = at(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    std::span<const uint8_t> bytes() const { return v_; }
    std::span<uint8_t> bytes() { return v_; }

    bool operator==(const ImageBuffer&) const = default;

private:
    size_t idx(int x, int y) const { return (static_cast<size_t>(y) * w_ + x) * 3; }
    int w_ = 0, h_ = 0;
    std::vector<uint8_t> v_;
};

namespace detail {
struct LogitTag;
struct ScoreTag;
} // namespace detail

/// Dense per-pixel, per-class float plane with interleaved channels.
/// Tagged so logits and fused scores stay distinct types.
template <class Tag>
class ChannelTensor {
public:
    ChannelTensor() = default;
    ChannelTensor(int width, int height, int channels, float fill = 0.0f)
        : w_(width), h_(height), c_(channels),
          v_(static_cast<size_t>(width) * height * channels, fill) {
        detail::check_dims(width, height);
        detail::require(channels >= 1, "channel tensor: channels must be >= 1");
    }
    ChannelTensor(int width, int height, int channels, std::vector<float> values)
        : w_(width), h_(height), c_(channels), v_(std::move(values)) {
        detail::check_dims(width, height);
        detail::require(channels >= 1, "channel tensor: channels must be >= 1");
        detail::require(v_.size() == static_cast<size_t>(width) * height * channels,
                        "channel tensor: value count does not match dimensions");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    int channels() const { return c_; }
    size_t pixels() const { return static_cast<size_t>(w_) * h_; }
    bool empty() const { return v_.empty(); }

    /// Channels of pixel (x, y), contiguous.
    std::span<const float> at(int x, int y) const { return {v_.data() + idx(x, y), size_t(c_)}; }
    std::span<float> at(int x, int y) { return {v_.data() + idx(x, y), size_t(c_)}; }

    std::span<const float> values() const { return v_; }
    std::span<float> values() { return v_; }

    bool operator==(const ChannelTensor&) const = default;

private:
    size_t idx(int x, int y) const { return (static_cast<size_t>(y) * w_ + x) * c_; }
    int w_ = 0, h_ = 0, c_ = 0;
    std::vector<float> v_;
};

using LogitTensor = ChannelTensor<detail::LogitTag>;
using ScoreTensor = ChannelTensor<detail::ScoreTag>;

/// One dataset record: image and depth always present, ground-truth or pseudo
/// label and the two prediction branches optional.
struct SceneSample {
    std::string id;
    ImageBuffer image;
    DepthMap depth;
    std::optional<LabelMap> label;
    std::optional<LogitTensor> logits_dep;
    std::optional<LogitTensor> logits_uda;
};

struct Violation {
    enum class Kind {
        DimensionMismatch,
        LabelRange,
        DepthValue,
        LogitValue,
        ChannelCount,
    };
    Kind kind;
    std::string message;
};

/// Diagnostics for a sample against a class table. Returns one entry per
/// violated invariant (with the first offending pixel where applicable);
/// empty iff the sample is well-formed. Never throws.
inline std::vector<Violation> validate_sample(const SceneSample& sample, const ClassTable& table) {
    std::vector<Violation> out;
    const int w = sample.image.width(), h = sample.image.height();

    auto check_dims = [&](int rw, int rh, const char* what) {
        if (rw != w || rh != h)
            out.push_back({Violation::Kind::DimensionMismatch,
                           std::string(what) + " is " + std::to_string(rw) + "x" +
                               std::to_string(rh) + " but image is " + std::to_string(w) + "x" +
                               std::to_string(h)});
    };
    check_dims(sample.depth.width(), sample.depth.height(), "depth map");
    if (sample.label)
        check_dims(sample.label->width(), sample.label->height(), "label map");
    if (sample.logits_dep)
        check_dims(sample.logits_dep->width(), sample.logits_dep->height(), "dep logits");
    if (sample.logits_uda)
        check_dims(sample.logits_uda->width(), sample.logits_uda->height(), "uda logits");

    if (sample.label) {
        size_t bad = 0;
        int bx = 0, by = 0, bv = 0;
        for (int y = 0; y < sample.label->height(); ++y)
            for (int x = 0; x < sample.label->width(); ++x) {
                int v = sample.label->at(x, y);
                if (!table.contains(v) && v != table.ignore_id()) {
                    if (bad++ == 0) {
                        bx = x;
                        by = y;
                        bv = v;
                    }
                }
            }
        if (bad > 0)
            out.push_back({Violation::Kind::LabelRange,
                           "label value " + std::to_string(bv) + " at pixel (" + std::to_string(bx) +
                               "," + std::to_string(by) + ") is outside the class table (" +
                               std::to_string(bad) + " such pixels)"});
    }

    {
        size_t bad = 0;
        int bx = 0, by = 0;
        float bv = 0;
        for (int y = 0; y < sample.depth.height(); ++y)
            for (int x = 0; x < sample.depth.width(); ++x) {
                if (!sample.depth.valid_at(x, y))
                    continue;
                float d = sample.depth.at(x, y);
                if (!std::isfinite(d) || d <= 0.0f) {
                    if (bad++ == 0) {
                        bx = x;
                        by = y;
                        bv = d;
                    }
                }
            }
        if (bad > 0)
            out.push_back({Violation::Kind::DepthValue,
                           "valid depth " + std::to_string(bv) + " at pixel (" + std::to_string(bx) +
                               "," + std::to_string(by) + ") is not finite and > 0 (" +
                               std::to_string(bad) + " such pixels)"});
    }

    auto check_logits = [&](const LogitTensor& t, const char* what) {
        if (t.channels() != static_cast<int>(table.size()))
            out.push_back({Violation::Kind::ChannelCount,
                           std::string(what) + " has " + std::to_string(t.channels()) +
                               " channels but the class table has " + std::to_string(table.size()) +
                               " classes"});
        for (size_t i = 0; i < t.values().size(); ++i)
            if (!std::isfinite(t.values()[i])) {
                out.push_back({Violation::Kind::LogitValue,
                               std::string(what) + " contains a non-finite score at flat index " +
                                   std::to_string(i)});
                break;
            }
    };
    if (sample.logits_dep)
        check_logits(*sample.logits_dep, "dep logits");
    if (sample.logits_uda)
        check_logits(*sample.logits_uda, "uda logits");

    return out;
}

} // namespace segfuse
