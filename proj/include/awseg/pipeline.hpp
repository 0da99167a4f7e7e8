#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awseg/augment.hpp"
#include "awseg/config.hpp"
#include "awseg/metrics.hpp"
#include "awseg/model.hpp"
#include "awseg/pcio.hpp"
#include "awseg/schema.hpp"

namespace awseg::pipeline {

/// A labeled scan with its per-point feature matrix.
struct FeaturedScan {
  LabeledScan scan;
  Matrix features;
};

FeaturedScan featurize(LabeledScan scan, const geom::FeatureParams& params);
std::vector<FeaturedScan> featurize_all(std::span<const LabeledScan> scans,
                                        const geom::FeatureParams& params);

struct EvalResult {
  metrics::ConfusionMatrix confusion{0};
  std::vector<std::optional<double>> iou;
  std::optional<double> miou_all;
  std::optional<double> miou_base;
  std::optional<double> miou_novel;
};

/// Argmax over logits per point; ties go to the lower class id.
LabelVec argmax_labels(const Matrix& logits);
LabelVec generate_pseudo_labels(const model::Model& model, const Matrix& features);
LabelVec generate_pseudo_labels(const model::Model& model, const PointCloud& cloud,
                                const geom::FeatureParams& params);

/// Confusion over all scans, then per-class IoU and mIoU for all / base /
/// novel classes. The model must output |C_b| or |C_b| + |C_n| logits.
EvalResult evaluate(const model::Model& model, std::span<const FeaturedScan> scans,
                    const ClassSchema& schema,
                    metrics::AbsentClassPolicy policy = metrics::AbsentClassPolicy::kExclude);
EvalResult evaluate(const model::Model& model, std::span<const LabeledScan> scans,
                    const ClassSchema& schema, const geom::FeatureParams& params,
                    metrics::AbsentClassPolicy policy = metrics::AbsentClassPolicy::kExclude);

/// Best checkpoint seen so far on a pseudo-validation set.
struct BestModelState {
  std::optional<model::Model> model;
  double miou = -std::numeric_limits<double>::infinity();
  std::size_t epoch = 0;
  /// Number of times a new best was installed.
  std::size_t updates = 0;
};

/// Installs `current` iff `miou` is strictly greater than the stored best
/// (the first offer always installs). Returns whether it did.
bool offer_best(BestModelState& state, const model::Model& current, double miou, std::size_t epoch);

struct Selection {
  double miou = 0.0;
  bool updated = false;
  EvalResult eval;
};

/// Scores `current` on the pseudo-validation set by mIoU over all classes
/// and offers it to `state`. An undefined mIoU scores 0.
Selection select_best(const model::Model& current, std::span<const FeaturedScan> pseudoval,
                      const ClassSchema& schema, BestModelState& state, std::size_t epoch,
                      metrics::AbsentClassPolicy policy = metrics::AbsentClassPolicy::kExclude);

/// One line of the metrics log.
struct EvalRecord {
  int stage = 0;
  std::size_t epoch = 0;
  std::optional<double> miou_all, miou_base, miou_novel;
  bool best_flag = false;
  double best_miou = 0.0;
  bool ssl_active = false;
};

/// `stage=1 epoch=50 miou_all=... miou_base=... miou_novel=... best_flag=1
/// best_miou=... ssl_active=0`, values printed with 17 significant digits
/// and `undefined` where a mean has no defined class.
std::string format_record(const EvalRecord& r);
std::string format_log(std::span<const EvalRecord> records);

/// Optional probes into a training run.
struct TrainHooks {
  std::function<void(const EvalRecord&)> on_evaluation;
  /// Stage one: epoch, the unlabeled-pool indices consumed and, per index,
  /// the epoch of the best model whose predictions served as labels.
  std::function<void(std::size_t, const std::vector<std::size_t>&, const std::vector<std::size_t>&)>
      on_pseudo_labels;
};

struct StageResult {
  BestModelState best;
  model::Model final_model;
  std::vector<EvalRecord> log;
  std::vector<double> loss_trace;
};

/// Supervised pretraining on the source pool with |C_b| outputs.
/// Normalization statistics are computed from source features and frozen.
StageResult train_stage0(std::span<const LabeledScan> source, const ClassSchema& schema,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Few-shot fine-tuning on the shots plus warmup-gated pseudo-label
/// training on the unlabeled pool, with best-model selection.
StageResult train_stage1(const model::Model& phi0, std::span<const LabeledScan> shots,
                         std::span<const PointCloud> unlabeled, const ClassSchema& schema,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Few-shot training from phi0 with base-class distillation and polar
/// mixes of pseudo-labeled target scans (labels from phi1_best) with
/// labeled source scans.
StageResult train_stage2(const model::Model& phi0, const model::Model& phi1_best,
                         std::span<const LabeledScan> shots, std::span<const PointCloud> unlabeled,
                         std::span<const LabeledScan> source, const ClassSchema& schema,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});

/// The supervised shot loss selected by cfg.fss_method, with parameter
/// gradients. `seed` drives triplet anchor sampling.
struct LossAndGrads {
  double value = 0.0;
  model::Gradients grads;
};
LossAndGrads fss_loss(const model::Model& model, const FeaturedScan& shot, const TrainConfig& cfg,
                      std::uint64_t seed);

}  // namespace awseg::pipeline
