#include "awseg/augment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "awseg/errors.hpp"
#include "awseg/geom.hpp"

namespace awseg::augment {

void AugmentationParams::validate() const {
  if (!(rotation_min <= rotation_max)) throw ArgumentError("rotation range is not ordered");
  if (!(scale_min <= scale_max) || !(scale_min > 0.0))
    throw ArgumentError("scale range must be ordered and positive");
  if (!(intensity_min <= intensity_max) || !(intensity_min >= 0.0))
    throw ArgumentError("intensity range must be ordered and non-negative");
  if (!(novel_jitter_std >= 0.0)) throw ArgumentError("jitter std must be >= 0");
}

AugmentationParams AugmentationParams::identity() {
  AugmentationParams p;
  p.flip_x = p.flip_y = false;
  p.rotation_min = p.rotation_max = 0.0;
  p.scale_min = p.scale_max = 1.0;
  p.intensity_min = p.intensity_max = 1.0;
  p.novel_jitter_std = 0.0;
  return p;
}

LabeledScan augment_scan(const LabeledScan& scan, const AugmentationParams& params,
                         const ClassSchema& schema, std::uint64_t draw_seed) {
  params.validate();
  Rng rng(draw_seed);
  std::bernoulli_distribution coin(0.5);
  const bool flip_x = coin(rng) && params.flip_x;
  const bool flip_y = coin(rng) && params.flip_y;
  const double angle = uniform(rng, params.rotation_min, params.rotation_max);
  const double scale = uniform(rng, params.scale_min, params.scale_max);
  const double intensity_scale = uniform(rng, params.intensity_min, params.intensity_max);
  const double c = std::cos(angle), s = std::sin(angle);

  LabeledScan out = scan;
  Matrix& pts = out.cloud.points;
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    auto p = pts.row(i);
    double x = flip_x ? -p[0] : p[0];
    double y = flip_y ? -p[1] : p[1];
    const double rx = c * x - s * y;
    const double ry = s * x + c * y;
    p[0] = rx * scale;
    p[1] = ry * scale;
    p[2] = p[2] * scale;
    p[3] = std::clamp(p[3] * intensity_scale, 0.0, 1.0);
    if (params.novel_jitter_std > 0.0 && schema.is_novel(out.labels[i])) {
      p[0] += params.novel_jitter_std * jitter(rng);
      p[1] += params.novel_jitter_std * jitter(rng);
      p[2] += params.novel_jitter_std * jitter(rng);
    }
  }
  return out;
}

namespace {

void append_point(MixedScan& out, const LabeledScan& src, std::size_t i, std::uint32_t origin) {
  out.scan.cloud.points.append_row(src.cloud.points.row(i));
  out.scan.labels.push_back(src.labels[i]);
  out.origin.push_back(origin);
}

void check_scan(const LabeledScan& s) {
  if (s.labels.size() != s.cloud.size())
    throw ArgumentError("scan label count does not match point count");
}

}  // namespace

MixedScan polar_mix_tracked(const LabeledScan& a, const LabeledScan& b, double theta, double start) {
  if (!(theta > 0.0 && theta < geom::kTwoPi))
    throw ArgumentError(fmt::format("mix angle {} outside the open interval (0, 2pi)", theta));
  check_scan(a);
  check_scan(b);
  MixedScan out;
  const auto in_a = geom::sector_mask(a.cloud, start, theta);
  const auto in_b = geom::sector_mask(b.cloud, start, theta);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (in_a[i]) append_point(out, a, i, 0);
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!in_b[i]) append_point(out, b, i, 1);
  return out;
}

LabeledScan polar_mix(const LabeledScan& a, const LabeledScan& b, double theta, double start) {
  return polar_mix_tracked(a, b, theta, start).scan;
}

std::vector<double> draw_sector_boundaries(std::size_t n, Rng& rng) {
  std::vector<double> b(n);
  for (auto& v : b) v = uniform(rng, 0.0, geom::kTwoPi);
  std::sort(b.begin(), b.end());
  return b;
}

std::vector<double> sector_widths(std::span<const double> boundaries) {
  const std::size_t n = boundaries.size();
  std::vector<double> w(n);
  if (n == 0) return w;
  w[0] = boundaries[0] + geom::kTwoPi - boundaries[n - 1];
  for (std::size_t i = 1; i < n; ++i) w[i] = boundaries[i] - boundaries[i - 1];
  return w;
}

MixedScan polar_mix_multi(std::span<const LabeledScan> scans, std::span<const double> boundaries) {
  if (scans.size() < 2) throw ArgumentError("polar_mix_multi needs at least two scans");
  if (boundaries.size() != scans.size())
    throw ArgumentError("need exactly one boundary per scan");
  if (!std::is_sorted(boundaries.begin(), boundaries.end()))
    throw ArgumentError("sector boundaries must be sorted");
  const auto widths = sector_widths(boundaries);
  const std::size_t n = scans.size();
  MixedScan out;
  for (std::size_t s = 0; s < n; ++s) {
    check_scan(scans[s]);
    const double start = boundaries[(s + n - 1) % n];
    const auto mask = geom::sector_mask(scans[s].cloud, start, std::min(widths[s], geom::kTwoPi));
    for (std::size_t i = 0; i < scans[s].size(); ++i)
      if (mask[i]) append_point(out, scans[s], i, static_cast<std::uint32_t>(s));
  }
  return out;
}

MixedScan polar_mix_multi(std::span<const LabeledScan> scans, std::uint64_t seed) {
  if (scans.size() < 2) throw ArgumentError("polar_mix_multi needs at least two scans");
  Rng rng(seed);
  const auto boundaries = draw_sector_boundaries(scans.size(), rng);
  return polar_mix_multi(scans, boundaries);
}

std::string to_string(PseudoValStage stage) {
  return stage == PseudoValStage::kStageOne ? "stage-one" : "stage-two";
}

PseudoValSet build_pseudoval_stage1(std::span<const LabeledScan> shots, std::size_t size,
                                    const AugmentationParams& params, const ClassSchema& schema,
                                    std::uint64_t seed) {
  if (shots.empty()) throw ArgumentError("pseudo-validation needs at least one shot");
  if (size < 1) throw ArgumentError("pseudo-validation size must be >= 1");
  params.validate();
  PseudoValSet set;
  set.stage = PseudoValStage::kStageOne;
  const std::size_t k = shots.size();
  for (std::size_t s = 0; s < size; ++s) {
    Rng rng(derive_seed(seed, kStreamPseudoVal, s));
    std::vector<std::size_t> picks;
    if (k < kStageOneMixCount) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      for (std::size_t d = 0; d < kStageOneMixCount; ++d) picks.push_back(pick(rng));
    } else {
      std::vector<std::size_t> order(k);
      for (std::size_t i = 0; i < k; ++i) order[i] = i;
      for (std::size_t d = 0; d < kStageOneMixCount; ++d) {
        std::uniform_int_distribution<std::size_t> pick(d, k - 1);
        std::swap(order[d], order[pick(rng)]);
        picks.push_back(order[d]);
      }
    }
    std::vector<LabeledScan> augmented;
    for (std::size_t idx : picks) augmented.push_back(augment_scan(shots[idx], params, schema, rng()));
    const auto boundaries = draw_sector_boundaries(augmented.size(), rng);
    auto mixed = polar_mix_multi(augmented, boundaries);
    set.scans.push_back(std::move(mixed.scan));
    set.origins.push_back(std::move(mixed.origin));
  }
  return set;
}

PseudoValSet build_pseudoval_stage2(std::span<const LabeledScan> shots,
                                    std::span<const LabeledScan> source, std::size_t size,
                                    const AugmentationParams& params, const ClassSchema& schema,
                                    std::uint64_t seed) {
  if (shots.empty()) throw ArgumentError("pseudo-validation needs at least one shot");
  if (source.empty()) throw ArgumentError("stage-two pseudo-validation needs source scans");
  if (size < 1) throw ArgumentError("pseudo-validation size must be >= 1");
  params.validate();
  PseudoValSet set;
  set.stage = PseudoValStage::kStageTwo;
  for (std::size_t s = 0; s < size; ++s) {
    Rng rng(derive_seed(seed ^ 0x5354414745320000ULL, kStreamPseudoVal, s));
    std::uniform_int_distribution<std::size_t> pick_shot(0, shots.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_source(0, source.size() - 1);
    const auto shot = augment_scan(shots[pick_shot(rng)], params, schema, rng());
    const auto& src = source[pick_source(rng)];
    const double theta = uniform(rng, std::numbers::pi / 2, 3 * std::numbers::pi / 2);

    // Anchor the shot's sector on a random novel point when there is one.
    std::vector<std::size_t> novel;
    for (std::size_t i = 0; i < shot.size(); ++i)
      if (schema.is_novel(shot.labels[i])) novel.push_back(i);
    const double u = uniform(rng, 0.05, 0.95);
    double start = uniform(rng, 0.0, geom::kTwoPi);
    if (!novel.empty()) {
      std::uniform_int_distribution<std::size_t> pick_novel(0, novel.size() - 1);
      const std::size_t p = novel[pick_novel(rng)];
      start = geom::wrap_angle(geom::azimuth(shot.cloud.x(p), shot.cloud.y(p)) - u * theta);
    }
    auto mixed = polar_mix_tracked(shot, src, theta, start);
    set.scans.push_back(std::move(mixed.scan));
    set.origins.push_back(std::move(mixed.origin));
  }
  return set;
}

}  // namespace awseg::augment
