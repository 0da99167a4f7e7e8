#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awseg/augment.hpp"
#include "awseg/geom.hpp"
#include "awseg/keyvalue.hpp"
#include "awseg/losses.hpp"
#include "awseg/metrics.hpp"

namespace awseg {

/// Supervised loss used on labeled shots (and for stage-zero pretraining).
enum class FssMethod {
  kLwf,    // cross-entropy
  kFssad,  // cross-entropy + Lovász-softmax
  kGfss,   // cross-entropy + triplet regularization on embeddings
};

std::string to_string(FssMethod m);
FssMethod parse_fss_method(const std::string& s);

/// Every scalar that shapes a training run. Serialized as `key = value`
/// text with the field names below; unknown keys are rejected.
struct TrainConfig {
  // Optimizer.
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  // Loss weights and the stage-one warmup threshold on pseudo-val mIoU.
  double omega0 = 0.5;
  double omega1 = 0.5;
  double omega2 = 0.5;
  double gamma = 0.75;
  /// Keep the SSL term on once enabled, even if pseudo-val mIoU later drops
  /// below gamma. When false the gate follows the latest evaluation.
  bool ssl_hysteresis = true;

  std::size_t selection_interval = 50;  // M
  std::size_t pseudoval_size = 500;

  std::size_t stage0_epochs = 10;
  std::size_t stage0_batch_scans = 4;
  std::size_t stage1_epochs = 200;
  std::size_t stage2_epochs = 300;

  std::uint64_t seed = 0;

  FssMethod fss_method = FssMethod::kFssad;
  losses::SceParams sce;
  double kd_temperature = 1.0;
  losses::TripletParams triplet;

  /// Unlabeled scans pseudo-labeled and consumed per stage-one epoch.
  std::size_t ssl_batch = 4;
  /// (unlabeled, source) pairs mixed per stage-two epoch.
  std::size_t mix_batch = 4;

  std::vector<std::size_t> hidden_dims{64, 64};
  double head_init_scale = 1e-2;
  geom::FeatureParams features;
  metrics::AbsentClassPolicy absent_classes = metrics::AbsentClassPolicy::kExclude;

  augment::AugmentationParams augmentation;

  void validate() const;
  std::string serialize() const;
  /// Starts from `base`, overrides the keys present in `kv` and validates.
  static TrainConfig parse(const KeyValues& kv, const TrainConfig& base);
  static TrainConfig parse(const KeyValues& kv);
  /// FNV-1a of serialize().
  std::uint64_t hash() const;
};

/// γ above the largest attainable mIoU: the SSL term never switches on.
inline constexpr double kUnreachableGamma = 1.01;

}  // namespace awseg
