#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awseg/matrix.hpp"
#include "awseg/schema.hpp"

namespace awseg::model {

/// Fully connected layer; weight is out × in.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Per-dimension affine normalization applied to features before the first
/// layer. Frozen once computed on the source pool.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Per-point MLP classifier: ReLU between layers, linear output logits.
struct Model {
  std::vector<DenseLayer> layers;
  NormStats norm;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Hash of every parameter and normalization value bit pattern.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Model&, const Model&) = default;
};

/// Same layout as the model's layers.
using Gradients = std::vector<DenseLayer>;

/// Fan-in uniform init U(-1/sqrt(in), 1/sqrt(in)), zero biases, identity
/// normalization.
Model init_model(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t out_classes,
                 std::uint64_t seed);

/// Mean and standard deviation over the rows of all matrices. Dimensions
/// with (near) zero spread get stddev 1.
NormStats compute_norm_stats(std::span<const Matrix> feature_sets);

struct ForwardCache {
  /// inputs[l] is what layer l consumed; inputs[0] is the normalized input,
  /// inputs.back() the embedding fed to the classifier layer.
  std::vector<Matrix> inputs;
  std::uint64_t model_fingerprint = 0;

  const Matrix& embedding() const { return inputs.back(); }
};

/// N×C logits. Fills `cache` when given.
Matrix forward(const Model& model, const Matrix& features, ForwardCache* cache = nullptr);

/// Reverse-mode gradients. `grad_embedding`, when given, is an extra
/// gradient on the classifier layer's input (for embedding regularizers).
/// Throws ArgumentError when the cache came from different parameters.
Gradients backward(const Model& model, const ForwardCache& cache, const Matrix& grad_logits,
                   const Matrix* grad_embedding = nullptr);

Gradients zero_gradients(const Model& model);
/// acc += scale * g
void accumulate(Gradients& acc, const Gradients& g, double scale = 1.0);

struct OptimizerState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  Gradients velocity;  // lazily shaped on the first step
};

/// v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
void sgd_step(Model& model, const Gradients& grads, OptimizerState& opt);

/// New output rows drawn from U(-init_scale, init_scale) with zero bias;
/// existing rows are copied unchanged.
Model extend_classifier(const Model& model, std::size_t extra, std::uint64_t seed,
                        double init_scale = 1e-2);

struct Checkpoint {
  Model model;
  ClassSchema schema;
  std::uint64_t epoch = 0;
  std::uint64_t config_hash = 0;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt);

struct LoadedCheckpoint {
  Checkpoint checkpoint;
  std::vector<std::string> warnings;
};

/// Throws FormatError on bad magic, version, truncation, or checksum. A
/// config hash that differs from `expected_config_hash` only adds a warning.
LoadedCheckpoint deserialize_checkpoint(std::span<const std::byte> bytes,
                                        std::optional<std::uint64_t> expected_config_hash = {});

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> expected_config_hash = {});

}  // namespace awseg::model
