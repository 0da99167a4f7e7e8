#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "awseg/pcio.hpp"
#include "awseg/rng.hpp"
#include "awseg/schema.hpp"

namespace awseg::augment {

/// Random transforms applied to labeled shots before they enter a
/// pseudo-validation mix. Defaults are the published settings.
struct AugmentationParams {
  bool flip_x = true;
  bool flip_y = true;
  double rotation_min = -std::numbers::pi / 4;
  double rotation_max = std::numbers::pi / 4;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double intensity_min = 0.9;
  double intensity_max = 1.0;
  double novel_jitter_std = 0.3;  // meters, xyz noise on novel-class points only
  std::uint64_t seed = 0;

  void validate() const;
  /// No-op configuration: flips off, all ranges collapsed, no jitter.
  static AugmentationParams identity();
};

/// Flips (p = 0.5 per enabled axis), z-rotation, global scale, intensity
/// scale clamped to [0, 1], then Gaussian xyz jitter on novel-class points.
/// Labels and point order are preserved.
LabeledScan augment_scan(const LabeledScan& scan, const AugmentationParams& params,
                         const ClassSchema& schema, std::uint64_t draw_seed);

/// A mixed scan plus, per output point, the index of the input it came from.
struct MixedScan {
  LabeledScan scan;
  std::vector<std::uint32_t> origin;
};

/// Points of `a` inside sector [start, start + theta) followed by points of
/// `b` outside it, each group in input order. theta must lie in (0, 2π).
LabeledScan polar_mix(const LabeledScan& a, const LabeledScan& b, double theta, double start);
MixedScan polar_mix_tracked(const LabeledScan& a, const LabeledScan& b, double theta, double start);

/// n sorted uniform draws on [0, 2π).
std::vector<double> draw_sector_boundaries(std::size_t n, Rng& rng);
/// Widths of the sectors delimited by sorted boundaries; they sum to 2π.
std::vector<double> sector_widths(std::span<const double> boundaries);

/// Scan i contributes its points in the sector [b_{i-1}, b_i) (indices mod
/// n, so scan 0 owns the wrapping sector). Boundaries must be sorted.
MixedScan polar_mix_multi(std::span<const LabeledScan> scans, std::span<const double> boundaries);
/// Draws the boundaries from `seed`. Needs at least two scans.
MixedScan polar_mix_multi(std::span<const LabeledScan> scans, std::uint64_t seed);

enum class PseudoValStage { kStageOne, kStageTwo };
std::string to_string(PseudoValStage stage);

/// Labeled validation scans synthesized from the shots alone (stage one)
/// or from shots mixed with source scans (stage two).
struct PseudoValSet {
  std::vector<LabeledScan> scans;
  /// Per scan, per point: which mixed input the point came from. For stage
  /// two 0 = augmented shot, 1 = source scan.
  std::vector<std::vector<std::uint32_t>> origins;
  PseudoValStage stage = PseudoValStage::kStageOne;

  std::size_t size() const { return scans.size(); }
};

/// Shots drawn per stage-one pseudo-validation mix.
inline constexpr std::size_t kStageOneMixCount = 4;

PseudoValSet build_pseudoval_stage1(std::span<const LabeledScan> shots, std::size_t size,
                                    const AugmentationParams& params, const ClassSchema& schema,
                                    std::uint64_t seed);

PseudoValSet build_pseudoval_stage2(std::span<const LabeledScan> shots,
                                    std::span<const LabeledScan> source, std::size_t size,
                                    const AugmentationParams& params, const ClassSchema& schema,
                                    std::uint64_t seed);

}  // namespace awseg::augment
