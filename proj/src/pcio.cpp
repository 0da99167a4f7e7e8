#include "awseg/pcio.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "awseg/errors.hpp"

namespace awseg {

static_assert(std::endian::native == std::endian::little,
              "wire formats are little-endian; big-endian hosts need byte swapping");

PointCloud::PointCloud(Matrix pts) : points(std::move(pts)) {
  if (points.rows() == 0 && points.cols() == 0) points = Matrix(0, kColumns);
  if (points.cols() != kColumns)
    throw ArgumentError(fmt::format("point cloud needs {} columns, got {}", kColumns, points.cols()));
}

void PointCloud::validate() const {
  if (points.cols() != kColumns) throw DataError("point cloud must have 4 columns");
  for (std::size_t i = 0; i < size(); ++i)
    for (double v : points.row(i))
      if (!std::isfinite(v)) throw DataError(fmt::format("non-finite value at point {}", i));
}

void LabeledScan::validate(const ClassSchema& schema) const {
  if (labels.size() != cloud.size())
    throw DataError(fmt::format("label count {} does not match point count {}", labels.size(),
                                cloud.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= schema.num_classes())
      throw DataError(fmt::format("label {} at point {} outside schema", labels[i], i));
}

namespace pcio {

namespace {

constexpr std::size_t kRecordBytes = 16;

}  // namespace

PointCloud parse_scan(std::span<const std::byte> bytes) {
  if (bytes.size() % kRecordBytes != 0)
    throw FormatError(fmt::format("scan size {} bytes is not a multiple of {}", bytes.size(),
                                  kRecordBytes));
  const std::size_t n = bytes.size() / kRecordBytes;
  Matrix pts(n, PointCloud::kColumns);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < PointCloud::kColumns; ++c) {
      float v;
      std::memcpy(&v, bytes.data() + i * kRecordBytes + c * 4, 4);
      if (!std::isfinite(v))
        throw DataError(fmt::format("non-finite value at point {} (byte offset {})", i,
                                    i * kRecordBytes + c * 4));
      pts(i, c) = static_cast<double>(v);
    }
  }
  return PointCloud(std::move(pts));
}

std::vector<std::byte> encode_scan(const PointCloud& cloud) {
  std::vector<std::byte> out(cloud.size() * kRecordBytes);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t c = 0; c < PointCloud::kColumns; ++c) {
      const float v = static_cast<float>(cloud.points(i, c));
      std::memcpy(out.data() + i * kRecordBytes + c * 4, &v, 4);
    }
  }
  return out;
}

LabelVec parse_labels(std::span<const std::byte> bytes, const ClassSchema& schema) {
  if (bytes.size() % 4 != 0)
    throw FormatError(fmt::format("label file size {} bytes is not a multiple of 4", bytes.size()));
  LabelVec out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t word;
    std::memcpy(&word, bytes.data() + i * 4, 4);
    out[i] = schema.from_raw(word & 0xFFFFu);
  }
  return out;
}

std::vector<std::byte> encode_labels(const LabelVec& labels) {
  std::vector<std::byte> out(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t word = labels[i];
    std::memcpy(out.data() + i * 4, &word, 4);
  }
  return out;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::byte> bytes(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw std::runtime_error(fmt::format("read failed on '{}'", path.string()));
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(fmt::format("write failed on '{}'", path.string()));
}

PointCloud read_scan(const std::filesystem::path& path) {
  try {
    return parse_scan(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

LabelVec read_labels(const std::filesystem::path& path, const ClassSchema& schema) {
  try {
    return parse_labels(read_file(path), schema);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_scan(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file(path, encode_scan(cloud));
}

void write_labels(const LabelVec& labels, const std::filesystem::path& path) {
  write_file(path, encode_labels(labels));
}

LabeledScan read_labeled_scan(const std::filesystem::path& scan_path,
                              const std::filesystem::path& label_path,
                              const ClassSchema& schema) {
  LabeledScan scan{read_scan(scan_path), read_labels(label_path, schema)};
  if (scan.labels.size() != scan.cloud.size())
    throw DataError(fmt::format("{} has {} labels but {} has {} points", label_path.string(),
                                scan.labels.size(), scan_path.string(), scan.cloud.size()));
  return scan;
}

}  // namespace pcio
}  // namespace awseg
