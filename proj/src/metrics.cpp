#include "scsm/metrics.hpp"

#include <numeric>
#include <sstream>

namespace scsm::metrics {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
    if (num_classes < 2) throw ConfigError("ConfusionMatrix: need at least 2 classes");
    counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

void ConfusionMatrix::add(int truth, int pred) {
    if (truth < 0 || truth >= k_ || pred < 0 || pred >= k_)
        throw DimensionError("ConfusionMatrix: class index outside [0," + std::to_string(k_) +
                             ")");
    ++counts_[idx(truth, pred)];
}

void ConfusionMatrix::accumulate(const smg::ArgmaxMask& pred, const smg::ArgmaxMask& truth) {
    if (pred.height != truth.height || pred.width != truth.width)
        throw DimensionError("accumulate: mask extents differ");
    for (std::size_t i = 0; i < pred.idx.size(); ++i) add(truth.idx[i], pred.idx[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw DimensionError("merge: class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::int64_t ConfusionMatrix::tp(int k) const { return counts_[idx(k, k)]; }

std::int64_t ConfusionMatrix::fp(int k) const {
    std::int64_t s = 0;
    for (int t = 0; t < k_; ++t)
        if (t != k) s += counts_[idx(t, k)];
    return s;
}

std::int64_t ConfusionMatrix::fn(int k) const {
    std::int64_t s = 0;
    for (int p = 0; p < k_; ++p)
        if (p != k) s += counts_[idx(k, p)];
    return s;
}

std::int64_t ConfusionMatrix::tn(int k) const { return total() - tp(k) - fp(k) - fn(k); }

namespace {

double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<ClassScores> class_scores(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ConfigError("class_scores: empty confusion matrix");
    std::vector<ClassScores> out;
    out.reserve(static_cast<std::size_t>(cm.num_classes()));
    for (int k = 0; k < cm.num_classes(); ++k) {
        const std::int64_t tp = cm.tp(k), fp = cm.fp(k), fn = cm.fn(k);
        ClassScores s;
        s.absent = tp + fp + fn == 0;
        s.iou = ratio(tp, tp + fp + fn);
        s.precision = ratio(tp, tp + fp);
        s.recall = ratio(tp, tp + fn);
        s.f1 = (s.precision + s.recall) == 0.0
                   ? 0.0
                   : 2.0 * s.precision * s.recall / (s.precision + s.recall);
        out.push_back(s);
    }
    return out;
}

Summary summary(const ConfusionMatrix& cm) {
    const auto scores = class_scores(cm);
    Summary s{0.0, 0.0, 0.0};
    for (const auto& c : scores) {
        s.miou += c.iou;
        s.af += c.f1;
    }
    s.miou /= static_cast<double>(scores.size());
    s.af /= static_cast<double>(scores.size());
    std::int64_t diag = 0;
    for (int k = 0; k < cm.num_classes(); ++k) diag += cm.tp(k);
    s.oa = static_cast<double>(diag) / static_cast<double>(cm.total());
    return s;
}

std::string report(const ConfusionMatrix& cm) {
    const auto scores = class_scores(cm);
    const auto sum = summary(cm);
    std::ostringstream os;
    for (int k = 0; k < cm.num_classes(); ++k) {
        os << "class" << k << ".iou=" << scores[k].iou << " precision=" << scores[k].precision
           << " recall=" << scores[k].recall << " f1=" << scores[k].f1;
        if (scores[k].absent) os << " absent=1";
        os << "\n";
    }
    os << "miou=" << sum.miou << "\n";
    os << "af=" << sum.af << "\n";
    os << "oa=" << sum.oa << "\n";
    return os.str();
}

}  // namespace scsm::metrics
