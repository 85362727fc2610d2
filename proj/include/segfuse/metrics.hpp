#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segfuse/core.hpp"

namespace segfuse {

/// C x C pixel counts, rows = ground truth, columns = prediction.
/// Ground-truth ignore pixels contribute nothing. 64-bit counts.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(size_t num_classes)
        : n_(num_classes), counts_(num_classes * num_classes, 0) {
        detail::require(num_classes >= 1, "confusion matrix: need at least one class");
    }

    size_t num_classes() const { return n_; }
    uint64_t at(size_t gt, size_t pred) const { return counts_[gt * n_ + pred]; }
    uint64_t& at(size_t gt, size_t pred) { return counts_[gt * n_ + pred]; }

    uint64_t total() const {
        uint64_t t = 0;
        for (uint64_t c : counts_)
            t += c;
        return t;
    }

    void accumulate(const LabelMap& gt, const LabelMap& pred, const ClassTable& table) {
        detail::require(gt.width() == pred.width() && gt.height() == pred.height(),
                        "metrics: ground truth is " + std::to_string(gt.width()) + "x" +
                            std::to_string(gt.height()) + " but prediction is " +
                            std::to_string(pred.width()) + "x" + std::to_string(pred.height()));
        detail::require(table.size() == n_, "metrics: class table size mismatch");
        const int ignore = table.ignore_id();
        auto g = gt.values();
        auto p = pred.values();
        for (size_t i = 0; i < g.size(); ++i) {
            if (g[i] == ignore)
                continue;
            detail::require(g[i] < n_, "metrics: ground-truth value " + std::to_string(g[i]) +
                                           " is outside the class table");
            detail::require(p[i] != ignore,
                            "metrics: prediction contains ignore_id at flat index " +
                                std::to_string(i));
            detail::require(p[i] < n_, "metrics: prediction value " + std::to_string(p[i]) +
                                           " is outside the class table");
            ++counts_[static_cast<size_t>(g[i]) * n_ + p[i]];
        }
    }

    void merge(const ConfusionMatrix& other) {
        detail::require(n_ == other.n_, "metrics: merging matrices of different sizes");
        for (size_t i = 0; i < counts_.size(); ++i)
            counts_[i] += other.counts_[i];
    }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    size_t n_;
    std::vector<uint64_t> counts_;
};

/// IoU per class: diag / (row + col - diag). Classes with an empty union
/// have no defined IoU and are returned as nullopt.
inline std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
    const size_t n = cm.num_classes();
    std::vector<std::optional<double>> out(n);
    for (size_t c = 0; c < n; ++c) {
        uint64_t row = 0, col = 0;
        for (size_t j = 0; j < n; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const uint64_t inter = cm.at(c, c);
        const uint64_t uni = row + col - inter;
        if (uni > 0)
            out[c] = static_cast<double>(inter) / static_cast<double>(uni);
    }
    return out;
}

struct MetricsSummary {
    double miou = 0.0;
    double accuracy = 0.0;
    size_t classes_in_mean = 0;
};

/// Mean of the defined per-class IoUs plus overall pixel accuracy.
inline MetricsSummary miou_and_acc(const ConfusionMatrix& cm) {
    const uint64_t total = cm.total();
    detail::require(total > 0, "metrics: empty confusion matrix (total count is 0)");
    MetricsSummary s;
    double sum = 0.0;
    for (const auto& iou : iou_per_class(cm))
        if (iou) {
            sum += *iou;
            ++s.classes_in_mean;
        }
    // total > 0 implies at least one class has a nonempty union
    s.miou = sum / static_cast<double>(s.classes_in_mean);
    uint64_t diag = 0;
    for (size_t c = 0; c < cm.num_classes(); ++c)
        diag += cm.at(c, c);
    s.accuracy = static_cast<double>(diag) / static_cast<double>(total);
    return s;
}

} // namespace segfuse
