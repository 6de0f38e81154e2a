#pragma once

#include "scsm/smg.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scsm::metrics {

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const { return k_; }
    std::int64_t at(int truth, int pred) const { return counts_[idx(truth, pred)]; }
    std::int64_t total() const;

    void add(int truth, int pred);
    void accumulate(const smg::ArgmaxMask& pred, const smg::ArgmaxMask& truth);
    void merge(const ConfusionMatrix& other);

    std::int64_t tp(int k) const;
    std::int64_t fp(int k) const;
    std::int64_t fn(int k) const;
    std::int64_t tn(int k) const;

private:
    std::size_t idx(int t, int p) const { return static_cast<std::size_t>(t) * k_ + p; }
    int k_;
    std::vector<std::int64_t> counts_;
};

struct ClassScores {
    double iou, precision, recall, f1;
    bool absent;  // zero-denominator class, scored 0 by convention
};

struct Summary {
    double miou, af, oa;
};

std::vector<ClassScores> class_scores(const ConfusionMatrix& cm);
Summary summary(const ConfusionMatrix& cm);

// Line-oriented key=value report, one line per class plus the three summaries.
std::string report(const ConfusionMatrix& cm);

}  // namespace scsm::metrics
