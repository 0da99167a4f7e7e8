#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "awseg/pcio.hpp"
#include "awseg/schema.hpp"

namespace awseg::synth {

/// Procedural scene parameters. Class counts are round(fraction * points);
/// ground receives whatever the other classes leave over.
struct SceneGenParams {
  std::uint64_t seed = 0;
  std::size_t points_per_scan = 1000;
  double vehicle_fraction = 0.25;
  double structure_fraction = 0.25;
  double novel_fraction = 0.0;
  std::size_t vehicle_count = 3;
  std::size_t noise_cluster_count = 3;
  double noise_sigma = 0.8;       // meters
  double sensor_range = 30.0;     // meters
  /// Reflectivity multiplier applied to base-class returns (wet surfaces
  /// in adverse weather return less energy).
  double base_intensity_scale = 1.0;
  /// Upper end of the uniform intensity of weather-noise returns.
  double noise_intensity_max = 0.08;

  /// Per-scan weather severity s ~ U(0, severity_max); 0 disables it. At
  /// severity s base intensities shrink by (1 - severity_attenuation * s),
  /// noise blobs widen by (1 + severity_spread * s) and noise returns get
  /// brighter by (1 + severity_brightness * s).
  double severity_max = 0.0;
  double severity_attenuation = 0.0;
  double severity_spread = 0.0;
  double severity_brightness = 0.0;

  /// Throws ArgumentError on out-of-range values.
  void validate() const;

  static SceneGenParams good_weather();
  static SceneGenParams adverse_weather();
};

/// Good-weather pool, K labeled adverse shots, unlabeled adverse scans.
struct DatasetSplit {
  std::vector<LabeledScan> source;
  std::vector<LabeledScan> target_labeled;
  std::vector<PointCloud> target_unlabeled;
  std::size_t k = 0;
};

/// Schema-default class ids used by the generator.
enum SceneClass : ClassId { kGround = 0, kVehicle = 1, kStructure = 2, kWeatherNoise = 3 };

/// Deterministic for (params, scan_seed). Ground lies on an annulus, vehicles
/// are box surfaces, structures are vertical walls, weather noise forms
/// low-intensity Gaussian blobs trailing the vehicles.
LabeledScan gen_scene(const SceneGenParams& params, std::uint64_t scan_seed);

/// Generates n_target_unlabeled + k adverse scans and picks k of those that
/// contain weather noise as labeled shots; the rest lose their labels.
DatasetSplit gen_split(const SceneGenParams& good, const SceneGenParams& adverse,
                       std::size_t n_source, std::size_t n_target_unlabeled, std::size_t k,
                       std::uint64_t seed);

/// Held-out labeled scans drawn from an independent seed stream.
std::vector<LabeledScan> gen_test_set(const SceneGenParams& params, std::size_t count,
                                      std::uint64_t seed, bool adverse);

/// Everything `gen-data` writes.
struct GeneratedData {
  DatasetSplit split;
  std::vector<LabeledScan> test_adverse;
  std::vector<LabeledScan> test_source;
};

struct DataLayout {
  static constexpr const char* kSource = "source";
  static constexpr const char* kTargetLabeled = "target_labeled";
  static constexpr const char* kTargetUnlabeled = "target_unlabeled";
  static constexpr const char* kTestAdverse = "test_adverse";
  static constexpr const char* kTestSource = "test_source";
  static constexpr const char* kManifest = "dataset.txt";
};

std::filesystem::path scan_path(const std::filesystem::path& root, const std::string& split,
                                std::size_t index);
std::filesystem::path label_path(const std::filesystem::path& root, const std::string& split,
                                 std::size_t index);

/// Writes {split}/{velodyne|labels}/{index:06}.{bin|label} plus dataset.txt.
/// Label files carry the schema's raw ids.
void write_dataset(const std::filesystem::path& root, const GeneratedData& data,
                   const ClassSchema& schema, const std::string& manifest_extra);

/// Reads a labeled split directory back (all indices present in velodyne/).
std::vector<LabeledScan> read_labeled_split(const std::filesystem::path& root,
                                            const std::string& split, const ClassSchema& schema);
std::vector<PointCloud> read_unlabeled_split(const std::filesystem::path& root,
                                             const std::string& split);
/// Schema stored in dataset.txt.
ClassSchema read_dataset_schema(const std::filesystem::path& root);

}  // namespace awseg::synth
