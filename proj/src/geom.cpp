#include "awseg/geom.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "awseg/errors.hpp"

namespace awseg::geom {

double azimuth(double x, double y) {
  if (x == 0.0 && y == 0.0) return 0.0;
  double a = std::atan2(y, x);
  if (a < 0.0) a += kTwoPi;
  // atan2 of a tiny negative y can round up to exactly 2π after the shift.
  return a >= kTwoPi ? 0.0 : a;
}

double wrap_angle(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;
}

bool in_sector(double angle, double start, double width) {
  if (width <= 0.0) return false;
  if (width >= kTwoPi) return true;
  const double s = wrap_angle(start);
  const double e = s + width;
  if (e <= kTwoPi) return angle >= s && angle < e;
  return angle >= s || angle < e - kTwoPi;
}

std::vector<bool> sector_mask(const PointCloud& cloud, double start, double width) {
  if (!(width >= 0.0 && width <= kTwoPi))
    throw ArgumentError(fmt::format("sector width {} outside [0, 2pi]", width));
  std::vector<bool> mask(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    mask[i] = in_sector(azimuth(cloud.x(i), cloud.y(i)), start, width);
  return mask;
}

std::size_t CellKeyHash::operator()(const CellKey& k) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
  h ^= static_cast<std::uint64_t>(k.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(k.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

CellKey GridIndex::cell_of(double x, double y, double z) const {
  return {static_cast<std::int64_t>(std::floor(x / cell_size_)),
          static_cast<std::int64_t>(std::floor(y / cell_size_)),
          static_cast<std::int64_t>(std::floor(z / cell_size_))};
}

const std::vector<std::uint32_t>* GridIndex::find(const CellKey& key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::uint64_t cloud_fingerprint(const PointCloud& cloud) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ cloud.size();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      h ^= std::bit_cast<std::uint64_t>(cloud.points(i, c));
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

GridIndex build_grid_index(const PointCloud& cloud, double cell) {
  if (!(cell > 0.0)) throw ArgumentError(fmt::format("grid cell size must be > 0, got {}", cell));
  GridIndex index(cell, cloud.size(), cloud_fingerprint(cloud));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    index.insert(index.cell_of(cloud.x(i), cloud.y(i), cloud.z(i)), static_cast<std::uint32_t>(i));
  return index;
}

namespace {

// Rings searched before falling back to a scan of the whole cloud.
constexpr std::int64_t kMaxRing = 4;

double distance(const PointCloud& cloud, std::size_t a, std::size_t b) {
  const double dx = cloud.x(b) - cloud.x(a);
  const double dy = cloud.y(b) - cloud.y(a);
  const double dz = cloud.z(b) - cloud.z(a);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Appends distances from point i to every point in the cells at Chebyshev
// offset exactly `ring` from `center`.
void gather_ring(const PointCloud& cloud, const GridIndex& index, std::size_t i,
                 const CellKey& center, std::int64_t ring, std::vector<double>& out) {
  for (std::int64_t dx = -ring; dx <= ring; ++dx) {
    for (std::int64_t dy = -ring; dy <= ring; ++dy) {
      for (std::int64_t dz = -ring; dz <= ring; ++dz) {
        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
        const auto* bucket = index.find({center.x + dx, center.y + dy, center.z + dz});
        if (!bucket) continue;
        for (std::uint32_t j : *bucket)
          if (j != i) out.push_back(distance(cloud, i, j));
      }
    }
  }
}

}  // namespace

Matrix neighbor_features(const PointCloud& cloud, const GridIndex& index, double radius,
                         std::size_t k) {
  if (!(radius > 0.0)) throw ArgumentError("neighbor radius must be > 0");
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (index.point_count() != cloud.size() || index.fingerprint() != cloud_fingerprint(cloud))
    throw ArgumentError("grid index was built from a different cloud");

  const std::size_t n = cloud.size();
  const double cell = index.cell_size();
  const auto reach = static_cast<std::int64_t>(std::ceil(radius / cell));
  Matrix feats(n, kFeatureDim);
  std::vector<double> dists;
  dists.reserve(64);

  for (std::size_t i = 0; i < n; ++i) {
    const CellKey center = index.cell_of(cloud.x(i), cloud.y(i), cloud.z(i));
    dists.clear();
    bool complete = false;
    std::int64_t ring = 0;
    for (; ring <= std::max(reach, kMaxRing); ++ring) {
      gather_ring(cloud, index, i, center, ring, dists);
      if (dists.size() == n - 1) {
        complete = true;
        break;
      }
      if (ring < reach || dists.size() < k) continue;
      // Anything outside rings 0..ring is farther than ring * cell.
      std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1), dists.end());
      if (dists[k - 1] <= static_cast<double>(ring) * cell) {
        complete = true;
        break;
      }
    }
    if (!complete) {
      dists.clear();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) dists.push_back(distance(cloud, i, j));
    }

    const auto neighbors =
        std::count_if(dists.begin(), dists.end(), [radius](double d) { return d <= radius; });
    const std::size_t take = std::min(k, dists.size());
    double mean_knn = 2.0 * radius;
    if (take > 0) {
      std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(take), dists.end());
      double sum = 0.0;
      for (std::size_t j = 0; j < take; ++j) sum += dists[j];
      mean_knn = sum / static_cast<double>(take);
    }

    auto row = feats.row(i);
    row[kFeatX] = cloud.x(i);
    row[kFeatY] = cloud.y(i);
    row[kFeatZ] = cloud.z(i);
    row[kFeatIntensity] = cloud.intensity(i);
    row[kFeatRange] = std::sqrt(cloud.x(i) * cloud.x(i) + cloud.y(i) * cloud.y(i) +
                                cloud.z(i) * cloud.z(i));
    row[kFeatNeighborCount] = static_cast<double>(neighbors);
    row[kFeatMeanKnnDist] = mean_knn;
  }
  return feats;
}

Matrix compute_features(const PointCloud& cloud, const FeatureParams& params) {
  return neighbor_features(cloud, build_grid_index(cloud, params.radius), params.radius, params.k);
}

}  // namespace awseg::geom
