#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "awseg/matrix.hpp"
#include "awseg/schema.hpp"

namespace awseg {

/// One LiDAR sweep: N rows of (x, y, z, intensity), stored as doubles.
struct PointCloud {
  static constexpr std::size_t kColumns = 4;

  Matrix points{0, kColumns};

  PointCloud() = default;
  explicit PointCloud(Matrix pts);

  std::size_t size() const { return points.rows(); }
  double x(std::size_t i) const { return points(i, 0); }
  double y(std::size_t i) const { return points(i, 1); }
  double z(std::size_t i) const { return points(i, 2); }
  double intensity(std::size_t i) const { return points(i, 3); }

  /// Throws DataError naming the first non-finite point.
  void validate() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

using LabelVec = std::vector<ClassId>;

struct LabeledScan {
  PointCloud cloud;
  LabelVec labels;

  std::size_t size() const { return cloud.size(); }
  /// Throws DataError when lengths disagree or an id is outside the schema.
  void validate(const ClassSchema& schema) const;

  friend bool operator==(const LabeledScan&, const LabeledScan&) = default;
};

namespace pcio {

/// Records of four little-endian binary32 values (x, y, z, intensity).
PointCloud parse_scan(std::span<const std::byte> bytes);
std::vector<std::byte> encode_scan(const PointCloud& cloud);

/// Little-endian uint32 words; the semantic class is the low 16 bits.
LabelVec parse_labels(std::span<const std::byte> bytes, const ClassSchema& schema);
std::vector<std::byte> encode_labels(const LabelVec& labels);

PointCloud read_scan(const std::filesystem::path& path);
LabelVec read_labels(const std::filesystem::path& path, const ClassSchema& schema);
void write_scan(const PointCloud& cloud, const std::filesystem::path& path);
/// Writes ids verbatim. Map through ClassSchema::to_raw first when the file
/// should carry raw dataset ids.
void write_labels(const LabelVec& labels, const std::filesystem::path& path);

/// Reads a scan and its label file and checks that they pair up.
LabeledScan read_labeled_scan(const std::filesystem::path& scan_path,
                              const std::filesystem::path& label_path,
                              const ClassSchema& schema);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace pcio
}  // namespace awseg
