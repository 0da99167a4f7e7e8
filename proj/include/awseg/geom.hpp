#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "awseg/matrix.hpp"
#include "awseg/pcio.hpp"

namespace awseg::geom {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Counterclockwise angle from +x, in [0, 2π). The origin maps to 0.
double azimuth(double x, double y);

/// Wraps an angle into [0, 2π).
double wrap_angle(double angle);

/// True iff `angle` lies in the half-open sector [start, start + width)
/// taken modulo 2π. width 0 selects nothing, width 2π everything.
bool in_sector(double angle, double start, double width);

/// Per-point sector membership by azimuth. width must lie in [0, 2π].
std::vector<bool> sector_mask(const PointCloud& cloud, double start, double width);

struct CellKey {
  std::int64_t x = 0, y = 0, z = 0;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept;
};

/// Uniform hash grid over xyz. Every point index lives in exactly one cell.
class GridIndex {
 public:
  GridIndex(double cell_size, std::size_t point_count, std::uint64_t fingerprint)
      : cell_size_(cell_size), point_count_(point_count), fingerprint_(fingerprint) {}

  double cell_size() const { return cell_size_; }
  std::size_t point_count() const { return point_count_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  CellKey cell_of(double x, double y, double z) const;

  const std::vector<std::uint32_t>* find(const CellKey& key) const;
  const std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash>& cells() const {
    return cells_;
  }
  void insert(const CellKey& key, std::uint32_t index) { cells_[key].push_back(index); }

 private:
  double cell_size_;
  std::size_t point_count_;
  std::uint64_t fingerprint_;
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> cells_;
};

/// Hash of the xyz bit patterns; ties a GridIndex to the cloud it indexes.
std::uint64_t cloud_fingerprint(const PointCloud& cloud);

GridIndex build_grid_index(const PointCloud& cloud, double cell);

/// Columns of the per-point feature matrix.
enum FeatureColumn : std::size_t {
  kFeatX = 0,
  kFeatY,
  kFeatZ,
  kFeatIntensity,
  kFeatRange,
  kFeatNeighborCount,
  kFeatMeanKnnDist,
  kFeatureDim
};

struct FeatureParams {
  double radius = 1.0;  // meters
  std::size_t k = 5;
};

/// N×7 features: x, y, z, intensity, range, number of other points within
/// `radius`, mean distance to the k nearest other points (over fewer when
/// the cloud is small, 2·radius when the point is alone). The grid only
/// accelerates the search; results equal an exhaustive scan exactly.
Matrix neighbor_features(const PointCloud& cloud, const GridIndex& index, double radius,
                         std::size_t k);

/// Builds a grid with cell = radius and computes neighbor_features.
Matrix compute_features(const PointCloud& cloud, const FeatureParams& params);

}  // namespace awseg::geom
