#include "awseg/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "awseg/errors.hpp"
#include "awseg/keyvalue.hpp"
#include "awseg/rng.hpp"

namespace awseg::synth {

namespace {

constexpr double kGroundZ = -1.7;
constexpr double kMinRange = 2.5;

struct Vehicle {
  double cx, cy, heading;
  double length = 4.2, width = 1.8, height = 1.5;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

void push_point(Matrix& pts, LabelVec& labels, double x, double y, double z, double intensity,
                ClassId label) {
  const double row[4] = {x, y, z, intensity};
  pts.append_row(row);
  labels.push_back(label);
}

// Uniform sample on the four sides and the roof of an oriented box.
void sample_box_surface(const Vehicle& v, Rng& rng, double& x, double& y, double& z) {
  const double side_long = v.length * v.height;
  const double side_short = v.width * v.height;
  const double roof = v.length * v.width;
  const double total = 2 * side_long + 2 * side_short + roof;
  double pick = uniform(rng, 0.0, total);
  double u = 0, w = 0, h = 0;  // box-local coordinates, origin at the bottom center
  if (pick < 2 * side_long) {
    u = uniform(rng, -v.length / 2, v.length / 2);
    w = pick < side_long ? -v.width / 2 : v.width / 2;
    h = uniform(rng, 0.0, v.height);
  } else if ((pick -= 2 * side_long) < 2 * side_short) {
    u = pick < side_short ? -v.length / 2 : v.length / 2;
    w = uniform(rng, -v.width / 2, v.width / 2);
    h = uniform(rng, 0.0, v.height);
  } else {
    u = uniform(rng, -v.length / 2, v.length / 2);
    w = uniform(rng, -v.width / 2, v.width / 2);
    h = v.height;
  }
  const double c = std::cos(v.heading), s = std::sin(v.heading);
  x = v.cx + c * u - s * w;
  y = v.cy + s * u + c * w;
  z = kGroundZ + h;
}

}  // namespace

void SceneGenParams::validate() const {
  if (points_per_scan < 1) throw ArgumentError("points_per_scan must be >= 1");
  for (double f : {vehicle_fraction, structure_fraction, novel_fraction})
    if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError(fmt::format("class fraction {} outside [0,1]", f));
  if (vehicle_fraction + structure_fraction + novel_fraction > 1.0 + 1e-12)
    throw ArgumentError("class fractions sum to more than 1");
  if (novel_fraction > 0.0 && noise_cluster_count < 1)
    throw ArgumentError("novel points need at least one noise cluster");
  if (!(noise_sigma >= 0.0)) throw ArgumentError("noise_sigma must be >= 0");
  if (!(sensor_range > kMinRange + 1.0)) throw ArgumentError("sensor_range too small");
  if (!(base_intensity_scale >= 0.0)) throw ArgumentError("base_intensity_scale must be >= 0");
  if (!(noise_intensity_max >= 0.0 && noise_intensity_max <= 1.0))
    throw ArgumentError("noise_intensity_max must be in [0,1]");
  if (!(severity_max >= 0.0 && severity_max <= 1.0)) throw ArgumentError("severity_max must be in [0,1]");
  if (!(severity_attenuation >= 0.0 && severity_attenuation <= 1.0))
    throw ArgumentError("severity_attenuation must be in [0,1]");
  if (!(severity_spread >= 0.0 && severity_brightness >= 0.0))
    throw ArgumentError("severity effects must be >= 0");
}

SceneGenParams SceneGenParams::good_weather() { return {}; }

SceneGenParams SceneGenParams::adverse_weather() {
  SceneGenParams p;
  p.vehicle_fraction = 0.3;
  p.structure_fraction = 0.0;
  p.novel_fraction = 0.2;
  p.base_intensity_scale = 0.6;
  return p;
}

LabeledScan gen_scene(const SceneGenParams& params, std::uint64_t scan_seed) {
  params.validate();
  Rng rng(derive_seed(params.seed, scan_seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = params.points_per_scan;

  const std::size_t n_vehicle = params.vehicle_count > 0 ? rounded_count(params.vehicle_fraction, n) : 0;
  const std::size_t n_structure = rounded_count(params.structure_fraction, n);
  const std::size_t n_novel = rounded_count(params.novel_fraction, n);
  if (n_vehicle + n_structure + n_novel > n) throw ArgumentError("rounded class counts exceed points_per_scan");
  const std::size_t n_ground = n - n_vehicle - n_structure - n_novel;

  std::vector<Vehicle> vehicles(params.vehicle_count);
  for (auto& v : vehicles) {
    const double r = uniform(rng, 6.0, std::min(18.0, params.sensor_range - 2.0));
    const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    v.cx = r * std::cos(a);
    v.cy = r * std::sin(a);
    v.heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }

  Matrix pts(0, PointCloud::kColumns);
  LabelVec labels;
  labels.reserve(n);
  const double severity = params.severity_max > 0.0 ? uniform(rng, 0.0, params.severity_max) : 0.0;
  const double scale = params.base_intensity_scale * (1.0 - params.severity_attenuation * severity);
  const double sigma = params.noise_sigma * (1.0 + params.severity_spread * severity);
  const double noise_peak =
      std::min(1.0, params.noise_intensity_max * (1.0 + params.severity_brightness * severity));

  for (std::size_t i = 0; i < n_ground; ++i) {
    // Uniform range gives the 1/r density falloff of a spinning sensor.
    const double r = uniform(rng, kMinRange, params.sensor_range);
    const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    push_point(pts, labels, r * std::cos(a), r * std::sin(a), kGroundZ + 0.03 * gauss(rng),
               clamp01(scale * (0.25 + 0.05 * gauss(rng))), kGround);
  }

  for (std::size_t i = 0; i < n_vehicle; ++i) {
    double x, y, z;
    sample_box_surface(vehicles[i % vehicles.size()], rng, x, y, z);
    push_point(pts, labels, x, y, z, clamp01(scale * (0.7 + 0.1 * gauss(rng))), kVehicle);
  }

  if (n_structure > 0) {
    constexpr std::size_t kWalls = 2;
    struct Wall { double cx, cy, tx, ty; };
    std::vector<Wall> walls;
    for (std::size_t w = 0; w < kWalls; ++w) {
      const double d = uniform(rng, 0.6, 0.85) * params.sensor_range;
      const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      walls.push_back({d * std::cos(a), d * std::sin(a), -std::sin(a), std::cos(a)});
    }
    for (std::size_t i = 0; i < n_structure; ++i) {
      const Wall& w = walls[i % kWalls];
      const double t = uniform(rng, -8.0, 8.0);
      const double h = uniform(rng, 0.0, 4.0);
      push_point(pts, labels, w.cx + t * w.tx + 0.05 * gauss(rng),
                 w.cy + t * w.ty + 0.05 * gauss(rng), kGroundZ + h,
                 clamp01(scale * (0.45 + 0.08 * gauss(rng))), kStructure);
    }
  }

  if (n_novel > 0) {
    // Spray trails behind vehicles; free-floating clutter without them.
    std::vector<std::array<double, 3>> centers(params.noise_cluster_count);
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (!vehicles.empty()) {
        const Vehicle& v = vehicles[c % vehicles.size()];
        const double back = v.length / 2 + 1.5;
        centers[c] = {v.cx - back * std::cos(v.heading), v.cy - back * std::sin(v.heading),
                      kGroundZ + 0.7};
      } else {
        const double r = uniform(rng, 6.0, 18.0);
        const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        centers[c] = {r * std::cos(a), r * std::sin(a), kGroundZ + 0.7};
      }
    }
    for (std::size_t i = 0; i < n_novel; ++i) {
      const auto& c = centers[i % centers.size()];
      push_point(pts, labels, c[0] + sigma * gauss(rng), c[1] + sigma * gauss(rng),
                 c[2] + 0.5 * sigma * gauss(rng), uniform(rng, 0.0, noise_peak), kWeatherNoise);
    }
  }

  return {PointCloud(std::move(pts)), std::move(labels)};
}

DatasetSplit gen_split(const SceneGenParams& good, const SceneGenParams& adverse,
                       std::size_t n_source, std::size_t n_target_unlabeled, std::size_t k,
                       std::uint64_t seed) {
  if (k < 1) throw ArgumentError("K must be >= 1");
  if (good.novel_fraction != 0.0)
    throw ArgumentError("good-weather scenes must not contain novel classes");
  DatasetSplit split;
  split.k = k;
  for (std::size_t i = 0; i < n_source; ++i)
    split.source.push_back(gen_scene(good, derive_seed(seed, kStreamSource, i)));

  const std::size_t pool = n_target_unlabeled + k;
  std::vector<LabeledScan> target;
  target.reserve(pool);
  for (std::size_t i = 0; i < pool; ++i)
    target.push_back(gen_scene(adverse, derive_seed(seed, kStreamTargetUnlabeled, i)));

  std::vector<std::size_t> order(pool);
  for (std::size_t i = 0; i < pool; ++i) order[i] = i;
  Rng rng(derive_seed(seed, kStreamTargetLabeled));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> is_shot(pool, false);
  for (std::size_t idx : order) {
    if (split.target_labeled.size() == k) break;
    const auto& labels = target[idx].labels;
    if (std::find(labels.begin(), labels.end(), kWeatherNoise) == labels.end()) continue;
    is_shot[idx] = true;
    split.target_labeled.push_back(target[idx]);
  }
  if (split.target_labeled.size() < k)
    throw ArgumentError(fmt::format("K = {} exceeds the {} generated target scans with weather noise", k,
                                    split.target_labeled.size()));
  for (std::size_t i = 0; i < pool; ++i)
    if (!is_shot[i]) split.target_unlabeled.push_back(std::move(target[i].cloud));
  return split;
}

std::vector<LabeledScan> gen_test_set(const SceneGenParams& params, std::size_t count,
                                      std::uint64_t seed, bool adverse) {
  std::vector<LabeledScan> out;
  out.reserve(count);
  const auto stream = adverse ? kStreamTestAdverse : kStreamTestSource;
  for (std::size_t i = 0; i < count; ++i) out.push_back(gen_scene(params, derive_seed(seed, stream, i)));
  return out;
}

std::filesystem::path scan_path(const std::filesystem::path& root, const std::string& split,
                                std::size_t index) {
  return root / split / "velodyne" / fmt::format("{:06}.bin", index);
}

std::filesystem::path label_path(const std::filesystem::path& root, const std::string& split,
                                 std::size_t index) {
  return root / split / "labels" / fmt::format("{:06}.label", index);
}

namespace {

void write_labeled(const std::filesystem::path& root, const std::string& split,
                   const std::vector<LabeledScan>& scans, const ClassSchema& schema) {
  for (std::size_t i = 0; i < scans.size(); ++i) {
    pcio::write_scan(scans[i].cloud, scan_path(root, split, i));
    LabelVec raw(scans[i].labels.size());
    std::transform(scans[i].labels.begin(), scans[i].labels.end(), raw.begin(),
                   [&](ClassId id) { return schema.to_raw(id); });
    pcio::write_labels(raw, label_path(root, split, i));
  }
}

std::size_t count_scans(const std::filesystem::path& root, const std::string& split) {
  std::size_t n = 0;
  while (std::filesystem::exists(scan_path(root, split, n))) ++n;
  return n;
}

}  // namespace

void write_dataset(const std::filesystem::path& root, const GeneratedData& data,
                   const ClassSchema& schema, const std::string& manifest_extra) {
  write_labeled(root, DataLayout::kSource, data.split.source, schema);
  write_labeled(root, DataLayout::kTargetLabeled, data.split.target_labeled, schema);
  for (std::size_t i = 0; i < data.split.target_unlabeled.size(); ++i)
    pcio::write_scan(data.split.target_unlabeled[i], scan_path(root, DataLayout::kTargetUnlabeled, i));
  write_labeled(root, DataLayout::kTestAdverse, data.test_adverse, schema);
  write_labeled(root, DataLayout::kTestSource, data.test_source, schema);

  std::string text = "# awseg synthetic dataset\n";
  text += schema.serialize();
  text += fmt::format("k = {}\nn_source = {}\nn_target_labeled = {}\nn_target_unlabeled = {}\n"
                      "n_test_adverse = {}\nn_test_source = {}\n",
                      data.split.k, data.split.source.size(), data.split.target_labeled.size(),
                      data.split.target_unlabeled.size(), data.test_adverse.size(),
                      data.test_source.size());
  text += manifest_extra;
  write_text_file(root / DataLayout::kManifest, text);
}

std::vector<LabeledScan> read_labeled_split(const std::filesystem::path& root,
                                            const std::string& split, const ClassSchema& schema) {
  std::vector<LabeledScan> out;
  const std::size_t n = count_scans(root, split);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(pcio::read_labeled_scan(scan_path(root, split, i), label_path(root, split, i), schema));
  return out;
}

std::vector<PointCloud> read_unlabeled_split(const std::filesystem::path& root,
                                             const std::string& split) {
  std::vector<PointCloud> out;
  const std::size_t n = count_scans(root, split);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pcio::read_scan(scan_path(root, split, i)));
  return out;
}

ClassSchema read_dataset_schema(const std::filesystem::path& root) {
  return ClassSchema::parse(read_key_value_file(root / DataLayout::kManifest));
}

}  // namespace awseg::synth
