#include <doctest.h>

#include <numbers>

#include "awseg/config.hpp"
#include "awseg/errors.hpp"
#include "awseg/keyvalue.hpp"

using namespace awseg;

TEST_CASE("default config matches the golden file") {
  const std::string golden = read_text_file(std::string(AWSEG_TEST_DATA_DIR) + "/golden/default_config.txt");
  CHECK(TrainConfig{}.serialize() == golden);
}

TEST_CASE("default hyperparameters") {
  const TrainConfig c;
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.momentum == 0.9);
  CHECK(c.weight_decay == 1e-4);
  CHECK(c.omega0 == 0.5);
  CHECK(c.omega1 == 0.5);
  CHECK(c.omega2 == 0.5);
  CHECK(c.gamma == 0.75);
  CHECK(c.selection_interval == 50);
  CHECK(c.pseudoval_size == 500);
  CHECK(c.augmentation.rotation_min == -std::numbers::pi / 4);
  CHECK(c.augmentation.rotation_max == std::numbers::pi / 4);
  CHECK(c.augmentation.scale_min == 0.9);
  CHECK(c.augmentation.scale_max == 1.1);
  CHECK(c.augmentation.intensity_min == 0.9);
  CHECK(c.augmentation.intensity_max == 1.0);
  CHECK(c.augmentation.novel_jitter_std == 0.3);
  CHECK(c.augmentation.flip_x);
  CHECK(c.augmentation.flip_y);

  const auto kv = parse_key_values(c.serialize());
  CHECK(kv.at("learning_rate") == "0.001");
  CHECK(kv.at("weight_decay") == "0.0001");
  CHECK(kv.at("gamma") == "0.75");
  CHECK(kv.at("selection_interval") == "50");
  CHECK(kv.at("pseudoval_size") == "500");
  CHECK(kv.at("aug_novel_jitter_std") == "0.3");
}

TEST_CASE("config round trip and overrides") {
  TrainConfig c;
  c.learning_rate = 0.0123456789012345;
  c.gamma = 0.6;
  c.ssl_hysteresis = false;
  c.fss_method = FssMethod::kGfss;
  c.hidden_dims = {32, 16, 8};
  c.absent_classes = metrics::AbsentClassPolicy::kScoreZero;
  const auto back = TrainConfig::parse(parse_key_values(c.serialize()));
  CHECK(back.serialize() == c.serialize());
  CHECK(back.hash() == c.hash());
  CHECK(back.hash() != TrainConfig{}.hash());

  const auto partial = TrainConfig::parse(parse_key_values("omega0 = 0.25\n# comment\n\nseed = 9\n"));
  CHECK(partial.omega0 == 0.25);
  CHECK(partial.seed == 9);
  CHECK(partial.omega1 == 0.5);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(TrainConfig::parse(parse_key_values("learning_rat = 0.1\n")), FormatError);
  CHECK_THROWS_AS(TrainConfig::parse(parse_key_values("seed = -1\n")), FormatError);
  CHECK_THROWS_AS(TrainConfig::parse(parse_key_values("momentum = fast\n")), FormatError);
  CHECK_THROWS_AS(TrainConfig::parse(parse_key_values("fss_method = unet\n")), FormatError);
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), FormatError);
  CHECK_THROWS_AS(TrainConfig::parse(parse_key_values("gamma = -0.1\n")), ArgumentError);
  CHECK_THROWS_AS(TrainConfig::parse(parse_key_values("selection_interval = 0\n")), ArgumentError);
}
