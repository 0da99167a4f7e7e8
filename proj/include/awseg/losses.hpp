#pragma once

#include <cstdint>
#include <span>

#include "awseg/matrix.hpp"
#include "awseg/pcio.hpp"

namespace awseg::losses {

/// A scalar objective and its gradient with respect to the differentiated
/// input (same shape as that input).
struct LossOutput {
  double value = 0.0;
  Matrix grad;
};

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

/// Mean over points of -log p_{y_i}.
LossOutput ce_loss(const Matrix& logits, const LabelVec& labels);

struct SceParams {
  double alpha = 1.0;
  double beta = 1.0;
  double clip_log = -6.0;  // stands in for log(0) in the reverse term
};

/// alpha * CE(y, p) + beta * RCE(p, y) with RCE_i = -clip_log * (1 - p_{y_i}).
LossOutput sce_loss(const Matrix& logits, const LabelVec& labels, const SceParams& params = {});

/// Distillation of a teacher restricted to base classes. Student columns
/// `base_ids` are softened by `temperature` and matched to the teacher's
/// softened distribution; value and gradient are scaled by T². Columns not
/// in base_ids get zero gradient.
LossOutput kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                   std::span<const ClassId> base_ids, double temperature = 1.0);

/// Entropy of the softened teacher distribution, averaged over points and
/// scaled by T²: the minimum kd_loss can reach.
double kd_teacher_entropy(const Matrix& teacher_logits, double temperature = 1.0);

/// Lovász-softmax on probabilities: for every class in `classes` (all when
/// empty) that appears in the labels or the argmax predictions, the Lovász
/// extension of the Jaccard loss over per-point errors, averaged over those
/// classes. Gradient is with respect to the probabilities.
LossOutput lovasz_softmax_probs(const Matrix& probs, const LabelVec& labels,
                                std::span<const ClassId> classes = {});

/// Same loss taking logits; the gradient is chained through the softmax.
LossOutput lovasz_softmax(const Matrix& logits, const LabelVec& labels,
                          std::span<const ClassId> classes = {});

struct TripletParams {
  double margin = 1.0;
  std::size_t max_anchors = 50;
};

/// Hardest-in-batch triplet hinge over up to max_anchors sampled anchors.
/// Gradient is with respect to the embeddings.
LossOutput triplet_reg(const Matrix& features, const LabelVec& labels, const TripletParams& params,
                       std::uint64_t seed);

}  // namespace awseg::losses
