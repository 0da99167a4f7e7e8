#include <doctest.h>

#include <limits>

#include "awseg/errors.hpp"
#include "awseg/pcio.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace awseg;

TEST_CASE("parse_scan reads little-endian float records") {
  std::vector<std::byte> buf;
  for (float v : {1.0f, 0.0f, 0.0f, 0.5f, 0.0f, 1.0f, 0.0f, 1.0f}) testutil::put_f32(buf, v);
  const PointCloud c = pcio::parse_scan(buf);
  REQUIRE(c.size() == 2);
  CHECK(c.x(0) == 1.0);
  CHECK(c.intensity(0) == 0.5);
  CHECK(c.y(1) == 1.0);
  CHECK(c.intensity(1) == 1.0);
}

TEST_CASE("empty scan and bad sizes") {
  CHECK(pcio::parse_scan({}).size() == 0);
  std::vector<std::byte> buf(17);
  CHECK_THROWS_AS(pcio::parse_scan(buf), FormatError);
}

TEST_CASE("non-finite values are data errors naming the point") {
  std::vector<std::byte> buf;
  for (float v : {0.f, 0.f, 0.f, 0.f, 1.f, std::numeric_limits<float>::quiet_NaN(), 0.f, 0.f})
    testutil::put_f32(buf, v);
  try {
    pcio::parse_scan(buf);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("point 1") != std::string::npos);
  }
}

TEST_CASE("labels keep the low 16 bits and remap through the schema") {
  const ClassSchema schema({{"a", 0}, {"b", 5}, {"c", 10}}, {}, 0);
  std::vector<std::byte> buf;
  testutil::put_u32(buf, 0);
  testutil::put_u32(buf, 0x0001000A);
  testutil::put_u32(buf, 77);  // unknown
  const LabelVec l = pcio::parse_labels(buf, schema);
  CHECK(l == LabelVec{0, 2, 0});
}

TEST_CASE("write then read round-trips after float quantization") {
  std::mt19937_64 rng(3);
  const PointCloud c = oracle::random_cloud(40, rng, 20.0);
  const auto dir = testutil::temp_dir("pcio_rt");
  pcio::write_scan(c, dir / "a.bin");
  const PointCloud back = pcio::read_scan(dir / "a.bin");
  REQUIRE(back.size() == c.size());
  CHECK(std::filesystem::file_size(dir / "a.bin") == 16 * c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(back.points(i, k) == static_cast<double>(static_cast<float>(c.points(i, k))));

  const LabelVec labels{0, 1, 2};
  pcio::write_labels(labels, dir / "a.label");
  CHECK(pcio::read_labels(dir / "a.label", ClassSchema::identity(3)) == labels);

  pcio::write_scan(PointCloud{}, dir / "empty.bin");
  CHECK(std::filesystem::file_size(dir / "empty.bin") == 0);
}

TEST_CASE("read_labeled_scan checks pairing") {
  std::mt19937_64 rng(4);
  const auto dir = testutil::temp_dir("pcio_pair");
  pcio::write_scan(oracle::random_cloud(3, rng, 1.0), dir / "s.bin");
  pcio::write_labels({0, 1}, dir / "s.label");
  CHECK_THROWS_AS(pcio::read_labeled_scan(dir / "s.bin", dir / "s.label", ClassSchema::identity(2)),
                  DataError);
}
