#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "awseg/pcio.hpp"

namespace awseg::metrics {

/// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : n_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }
  std::uint64_t total() const;

  /// Throws ArgumentError on length mismatch or ids >= num_classes.
  void accumulate(const LabelVec& preds, const LabelVec& truth);
  /// Elementwise sum; class counts must agree.
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// How classes with an empty union (absent from truth and prediction)
/// enter the mean.
enum class AbsentClassPolicy { kExclude, kScoreZero };

/// TP / (TP + FP + FN) per class; nullopt where the union is empty.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

/// Mean IoU over `classes` (all when empty). nullopt when no class in the
/// filter is defined (or the filter is empty under kScoreZero).
std::optional<double> miou(const ConfusionMatrix& cm, std::span<const ClassId> classes = {},
                           AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

}  // namespace awseg::metrics
