#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segfuse/core.hpp"

namespace segfuse {

/// Per-class pixel counts and frequencies over a set of label maps.
/// Ignore pixels are excluded from both the counts and the total.
struct FrequencyStats {
    std::vector<uint64_t> counts;
    uint64_t total = 0;
    std::vector<double> freqs;
};

/// Accumulates class-frequency counts. Shardable: accumulate per map (or per
/// shard) and merge(); integer counts make the merge order irrelevant.
class FrequencyAccumulator {
public:
    explicit FrequencyAccumulator(const ClassTable& table)
        : counts_(table.size(), 0), ignore_id_(table.ignore_id()) {}

    void add(const LabelMap& labels) {
        for (uint8_t v : labels.values()) {
            if (v == ignore_id_)
                continue;
            detail::require(v < counts_.size(),
                            "frequency accumulation: label value " + std::to_string(v) +
                                " is outside the class table");
            ++counts_[v];
            ++total_;
        }
        ++maps_;
    }

    void merge(const FrequencyAccumulator& other) {
        detail::require(counts_.size() == other.counts_.size(),
                        "frequency merge: class count mismatch");
        for (size_t i = 0; i < counts_.size(); ++i)
            counts_[i] += other.counts_[i];
        total_ += other.total_;
        maps_ += other.maps_;
    }

    size_t maps_seen() const { return maps_; }

    FrequencyStats finalize() const {
        detail::require(maps_ > 0, "frequency stats: no label maps were accumulated");
        detail::require(total_ > 0,
                        "frequency stats: zero labelled pixels (all pixels are ignore_id)");
        FrequencyStats stats;
        stats.counts = counts_;
        stats.total = total_;
        stats.freqs.resize(counts_.size());
        for (size_t i = 0; i < counts_.size(); ++i)
            stats.freqs[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
        return stats;
    }

private:
    std::vector<uint64_t> counts_;
    uint64_t total_ = 0;
    size_t maps_ = 0;
    size_t ignore_id_;
};

inline FrequencyStats compute_frequencies(std::span<const LabelMap> labels,
                                          const ClassTable& table) {
    FrequencyAccumulator acc(table);
    for (const LabelMap& m : labels)
        acc.add(m);
    return acc.finalize();
}

/// Inverse-log frequency weight: 1 / ln(delta + f). Positive and strictly
/// decreasing in f for delta > 1.
inline double uda_weight_raw(double f, double delta) {
    detail::require(delta > 1.0, "uda weights: delta must be > 1, got " + std::to_string(delta));
    detail::require(std::isfinite(f) && f >= 0.0 && f <= 1.0,
                    "uda weights: frequency must be in [0,1]");
    return 1.0 / std::log(delta + f);
}

inline std::vector<double> uda_weights_raw(const FrequencyStats& stats, double delta) {
    std::vector<double> w(stats.freqs.size());
    for (size_t i = 0; i < w.size(); ++i)
        w[i] = uda_weight_raw(stats.freqs[i], delta);
    return w;
}

/// Final per-class fusion weights. In the default normalized mode
/// w_uda in (0,1] with max 1 and w_dep = 1 - w_uda in [0,1); the raw mode
/// keeps the unnormalized inverse-log weights (w_dep then goes negative and
/// is useful only for experimentation).
struct ClassWeights {
    double delta = 1.02;
    bool normalized = true;
    std::vector<double> w_uda_raw;
    std::vector<double> w_uda;
    std::vector<double> w_dep;

    size_t size() const { return w_uda.size(); }
};

inline ClassWeights finalize_weights(std::vector<double> raw, double delta = 1.02,
                                     bool normalize = true) {
    detail::require(!raw.empty(), "finalize weights: empty weight vector");
    double max_raw = 0.0;
    for (double w : raw) {
        detail::require(std::isfinite(w) && w > 0.0,
                        "finalize weights: raw weights must be positive and finite");
        max_raw = std::max(max_raw, w);
    }
    ClassWeights out;
    out.delta = delta;
    out.normalized = normalize;
    out.w_uda_raw = std::move(raw);
    out.w_uda.resize(out.w_uda_raw.size());
    out.w_dep.resize(out.w_uda_raw.size());
    for (size_t i = 0; i < out.w_uda_raw.size(); ++i) {
        out.w_uda[i] = normalize ? out.w_uda_raw[i] / max_raw : out.w_uda_raw[i];
        out.w_dep[i] = 1.0 - out.w_uda[i];
    }
    return out;
}

inline ClassWeights compute_class_weights(const FrequencyStats& stats, double delta = 1.02,
                                          bool normalize = true) {
    return finalize_weights(uda_weights_raw(stats, delta), delta, normalize);
}

} // namespace segfuse
