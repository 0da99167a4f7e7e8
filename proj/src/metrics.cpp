#include "awseg/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

#include "awseg/errors.hpp"

namespace awseg::metrics {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelVec& preds, const LabelVec& truth) {
  if (preds.size() != truth.size())
    throw ArgumentError(fmt::format("{} predictions for {} ground-truth labels", preds.size(), truth.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= n_ || truth[i] >= n_)
      throw ArgumentError(fmt::format("class id at point {} outside [0, {})", i, n_));
  }
  for (std::size_t i = 0; i < preds.size(); ++i) ++counts_[truth[i] * n_ + preds[i]];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ArgumentError("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  std::vector<std::optional<double>> out(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) out[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

std::optional<double> miou(const ConfusionMatrix& cm, std::span<const ClassId> classes,
                           AbsentClassPolicy policy) {
  const auto ious = iou_per_class(cm);
  std::vector<ClassId> filter(classes.begin(), classes.end());
  if (filter.empty()) {
    filter.resize(ious.size());
    std::iota(filter.begin(), filter.end(), ClassId{0});
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (ClassId c : filter) {
    if (c >= ious.size()) throw ArgumentError(fmt::format("class {} outside confusion matrix", c));
    if (ious[c]) {
      sum += *ious[c];
      ++count;
    } else if (policy == AbsentClassPolicy::kScoreZero) {
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  if (policy == AbsentClassPolicy::kScoreZero &&
      std::none_of(filter.begin(), filter.end(), [&](ClassId c) { return ious[c].has_value(); }))
    return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace awseg::metrics
