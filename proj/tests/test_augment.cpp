#include <doctest.h>

#include <numbers>

#include "awseg/augment.hpp"
#include "awseg/errors.hpp"
#include "awseg/geom.hpp"
#include "awseg/synth.hpp"
#include "oracles.hpp"

using namespace awseg;
using std::numbers::pi;

namespace {

LabeledScan scan_at_azimuths(std::initializer_list<double> az, ClassId label) {
  Matrix m(0, 4);
  for (double a : az) {
    const double row[4] = {2 * std::cos(a), 2 * std::sin(a), 0.0, 0.5};
    m.append_row(row);
  }
  return {PointCloud(std::move(m)), LabelVec(az.size(), label)};
}

LabeledScan random_scan(std::size_t n, std::mt19937_64& rng, std::size_t classes) {
  return {oracle::random_cloud(n, rng, 10.0), oracle::random_labels(n, classes, rng)};
}

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < m.rows(); ++i) rows.emplace_back(m.row(i).begin(), m.row(i).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

synth::SceneGenParams small(synth::SceneGenParams p) {
  p.points_per_scan = 300;
  return p;
}

}  // namespace

TEST_CASE("default augmentation parameters") {
  const augment::AugmentationParams p;
  CHECK(p.rotation_min == -pi / 4);
  CHECK(p.rotation_max == pi / 4);
  CHECK(p.scale_min == 0.9);
  CHECK(p.scale_max == 1.1);
  CHECK(p.intensity_min == 0.9);
  CHECK(p.intensity_max == 1.0);
  CHECK(p.novel_jitter_std == 0.3);
}

TEST_CASE("identity augmentation is a no-op") {
  std::mt19937_64 rng(1);
  const auto schema = ClassSchema::default_schema();
  const auto s = random_scan(50, rng, 4);
  CHECK(augment::augment_scan(s, augment::AugmentationParams::identity(), schema, 7) == s);
}

TEST_CASE("forced rotation") {
  auto p = augment::AugmentationParams::identity();
  p.rotation_min = p.rotation_max = pi / 2;
  Matrix m(1, 4);
  m(0, 0) = 1.0;
  const LabeledScan s{PointCloud(m), {0}};
  const auto out = augment::augment_scan(s, p, ClassSchema::default_schema(), 3);
  CHECK(std::fabs(out.cloud.x(0)) <= 1e-12);
  CHECK(std::fabs(out.cloud.y(0) - 1.0) <= 1e-12);
  CHECK(out.cloud.z(0) == 0.0);
}

TEST_CASE("jitter touches only novel points") {
  std::mt19937_64 rng(2);
  const auto schema = ClassSchema::default_schema();
  augment::AugmentationParams with;
  auto without = with;
  without.novel_jitter_std = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto s = random_scan(60, rng, 4);
    const auto a = augment::augment_scan(s, with, schema, t);
    const auto b = augment::augment_scan(s, without, schema, t);
    CHECK(a.labels == s.labels);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool novel = schema.is_novel(s.labels[i]);
      for (std::size_t k = 0; k < 3; ++k) {
        if (novel) CHECK(a.cloud.points(i, k) != b.cloud.points(i, k));
        else CHECK(a.cloud.points(i, k) == b.cloud.points(i, k));
      }
      CHECK(a.cloud.intensity(i) == b.cloud.intensity(i));
      CHECK(a.cloud.intensity(i) >= 0.0);
      CHECK(a.cloud.intensity(i) <= 1.0);
    }
  }
  LabelVec base_only(30, 1);
  const LabeledScan s{oracle::random_cloud(30, rng, 5.0), base_only};
  CHECK(augment::augment_scan(s, with, schema, 9) == augment::augment_scan(s, without, schema, 9));
}

TEST_CASE("rotation preserves planar norms") {
  std::mt19937_64 rng(3);
  auto p = augment::AugmentationParams::identity();
  p.rotation_min = -pi;
  p.rotation_max = pi;
  p.flip_x = p.flip_y = true;
  const auto s = random_scan(40, rng, 3);
  const auto out = augment::augment_scan(s, p, ClassSchema::identity(3), 5);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double n0 = std::hypot(s.cloud.x(i), s.cloud.y(i));
    const double n1 = std::hypot(out.cloud.x(i), out.cloud.y(i));
    CHECK(std::fabs(n0 - n1) <= 1e-9 * n0);
  }
}

TEST_CASE("polar_mix hand example and limits") {
  const auto a = scan_at_azimuths({0.1, 3.0}, 0);
  const auto b = scan_at_azimuths({0.2, 3.1}, 1);
  const auto out = augment::polar_mix(a, b, pi, 0.0);
  REQUIRE(out.size() == 2);
  // 3.0 and 3.1 are both below pi, so the sector keeps both a-points and
  // drops both b-points.
  CHECK(out.labels == LabelVec{0, 0});
  CHECK(geom::azimuth(out.cloud.x(0), out.cloud.y(0)) == doctest::Approx(0.1));
  CHECK(geom::azimuth(out.cloud.x(1), out.cloud.y(1)) == doctest::Approx(3.0));
  const auto shifted = augment::polar_mix(a, b, 3.05, 0.0);
  CHECK(shifted.labels == LabelVec{0, 0, 1});
  CHECK(geom::azimuth(shifted.cloud.x(2), shifted.cloud.y(2)) == doctest::Approx(3.1));

  const LabeledScan empty{PointCloud{}, {}};
  CHECK(augment::polar_mix(a, empty, 2 * pi - 1e-9, 0.05) == a);
  CHECK_THROWS_AS(augment::polar_mix(a, b, 0.0, 0.0), ArgumentError);
  CHECK_THROWS_AS(augment::polar_mix(a, b, 2 * pi, 0.0), ArgumentError);
}

TEST_CASE("polar_mix conserves points") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(1e-6, 2 * pi - 1e-6);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_scan(1 + rng() % 80, rng, 3);
    const auto b = random_scan(1 + rng() % 80, rng, 3);
    const double theta = ang(rng), start = ang(rng);
    const auto in_a = geom::sector_mask(a.cloud, start, theta);
    const auto in_b = geom::sector_mask(b.cloud, start, theta);
    const auto mixed = augment::polar_mix_tracked(a, b, theta, start);
    const auto na = static_cast<std::size_t>(std::count(in_a.begin(), in_a.end(), true));
    const auto nb = static_cast<std::size_t>(std::count(in_b.begin(), in_b.end(), false));
    REQUIRE(mixed.scan.size() == na + nb);
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < mixed.scan.size(); ++i) {
      const auto row = mixed.scan.cloud.points.row(i);
      if (i < na) {
        while (!in_a[ia]) ++ia;
        CHECK(std::equal(row.begin(), row.end(), a.cloud.points.row(ia).begin()));
        CHECK(mixed.scan.labels[i] == a.labels[ia]);
        CHECK(mixed.origin[i] == 0);
        ++ia;
      } else {
        while (in_b[ib]) ++ib;
        CHECK(std::equal(row.begin(), row.end(), b.cloud.points.row(ib).begin()));
        CHECK(mixed.origin[i] == 1);
        ++ib;
      }
    }
  }
}

TEST_CASE("polar_mix_multi") {
  const auto s0 = scan_at_azimuths({0.0}, 0);
  const auto s1 = scan_at_azimuths({2 * pi / 3}, 1);
  const auto s2 = scan_at_azimuths({4 * pi / 3}, 2);
  const std::vector<LabeledScan> three{s0, s1, s2};
  const std::vector<double> bounds{pi / 3, pi, 5 * pi / 3};
  const auto out = augment::polar_mix_multi(three, bounds);
  CHECK(out.scan.labels == LabelVec{0, 1, 2});

  std::mt19937_64 rng(5);
  const auto s = random_scan(120, rng, 3);
  const std::vector<LabeledScan> twins{s, s};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = augment::polar_mix_multi(twins, seed);
    CHECK(sorted_rows(m.scan.cloud.points) == sorted_rows(s.cloud.points));
  }

  for (int t = 0; t < 50; ++t) {
    Rng r(t);
    const auto b = augment::draw_sector_boundaries(2 + t % 5, r);
    const auto w = augment::sector_widths(b);
    CHECK(std::fabs(std::accumulate(w.begin(), w.end(), 0.0) - 2 * pi) <= 1e-12);
  }
  const std::vector<LabeledScan> one{s};
  CHECK_THROWS_AS(augment::polar_mix_multi(one, 1), ArgumentError);
}

TEST_CASE("stage-one pseudo-validation") {
  const auto schema = ClassSchema::default_schema();
  const auto adverse = small(synth::SceneGenParams::adverse_weather());
  std::vector<LabeledScan> shots{synth::gen_scene(adverse, 1)};
  const auto ident = augment::AugmentationParams::identity();
  const auto set = augment::build_pseudoval_stage1(shots, 20, ident, schema, 3);
  CHECK(set.size() == 20);
  CHECK(set.stage == augment::PseudoValStage::kStageOne);
  for (const auto& s : set.scans) CHECK(sorted_rows(s.cloud.points) == sorted_rows(shots[0].cloud.points));

  for (std::uint64_t i = 2; i <= 6; ++i) shots.push_back(synth::gen_scene(adverse, i));
  const augment::AugmentationParams p;
  const auto a = augment::build_pseudoval_stage1(shots, 500, p, schema, 4);
  const auto b = augment::build_pseudoval_stage1(shots, 500, p, schema, 4);
  CHECK(a.size() == 500);
  CHECK(a.scans == b.scans);
  CHECK_THROWS_AS(augment::build_pseudoval_stage1({}, 5, p, schema, 4), ArgumentError);
}

TEST_CASE("stage-two pseudo-validation mixes shots with source scans") {
  const auto schema = ClassSchema::default_schema();
  const auto split = synth::gen_split(small(synth::SceneGenParams::good_weather()),
                                      small(synth::SceneGenParams::adverse_weather()), 8, 3, 5, 2);
  const augment::AugmentationParams p;
  const auto set = augment::build_pseudoval_stage2(split.target_labeled, split.source, 500, p, schema, 6);
  CHECK(set.size() == 500);
  CHECK(set.stage == augment::PseudoValStage::kStageTwo);
  for (std::size_t s = 0; s < set.size(); ++s) {
    const auto& labels = set.scans[s].labels;
    CHECK(std::any_of(labels.begin(), labels.end(), [&](ClassId c) { return schema.is_novel(c); }));
    const auto& origin = set.origins[s];
    CHECK(std::count(origin.begin(), origin.end(), 1u) > 0);
    CHECK(std::count(origin.begin(), origin.end(), 0u) > 0);
  }
  const auto again = augment::build_pseudoval_stage2(split.target_labeled, split.source, 500, p, schema, 6);
  CHECK(again.scans == set.scans);
}
