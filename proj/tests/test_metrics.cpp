#include <doctest.h>

#include "awseg/errors.hpp"
#include "awseg/metrics.hpp"
#include "metric_oracle.hpp"

using namespace awseg;
using metrics::AbsentClassPolicy;

TEST_CASE("confusion accumulation") {
  metrics::ConfusionMatrix cm(2);
  cm.accumulate({0, 0, 1, 1}, {0, 1, 1, 1});
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.total() == 4);

  metrics::ConfusionMatrix diag(3);
  diag.accumulate({0, 2, 2, 1}, {0, 2, 2, 1});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p)
      if (t != p) CHECK(diag.at(t, p) == 0);

  std::mt19937_64 rng(1);
  const LabelVec pred = oracle::random_labels(100, 4, rng), truth = oracle::random_labels(100, 4, rng);
  metrics::ConfusionMatrix whole(4), first(4), second(4);
  whole.accumulate(pred, truth);
  first.accumulate(LabelVec(pred.begin(), pred.begin() + 37), LabelVec(truth.begin(), truth.begin() + 37));
  second.accumulate(LabelVec(pred.begin() + 37, pred.end()), LabelVec(truth.begin() + 37, truth.end()));
  second.merge(first);
  CHECK(second == whole);

  CHECK_THROWS_AS(cm.accumulate({0}, {0, 1}), ArgumentError);
  CHECK_THROWS_AS(cm.accumulate({2}, {0}), ArgumentError);
  CHECK_THROWS_AS(cm.merge(metrics::ConfusionMatrix(3)), ArgumentError);
}

TEST_CASE("iou and miou") {
  metrics::ConfusionMatrix cm(2);
  cm.accumulate({0, 0, 1, 1}, {0, 1, 1, 1});
  const auto iou = metrics::iou_per_class(cm);
  CHECK(*iou[0] == 0.5);
  CHECK(*iou[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(*metrics::miou(cm) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));

  metrics::ConfusionMatrix perfect(3);
  perfect.accumulate({0, 1, 1}, {0, 1, 1});
  const auto p = metrics::iou_per_class(perfect);
  CHECK(*p[0] == 1.0);
  CHECK(*p[1] == 1.0);
  CHECK(!p[2].has_value());
  CHECK(*metrics::miou(perfect) == 1.0);
  const std::vector<ClassId> novel{2};
  CHECK(!metrics::miou(perfect, novel).has_value());
  CHECK(*metrics::miou(perfect, {}, AbsentClassPolicy::kScoreZero) == doctest::Approx(2.0 / 3.0));
  CHECK(!metrics::miou(perfect, novel, AbsentClassPolicy::kScoreZero).has_value());
  CHECK(!metrics::miou(metrics::ConfusionMatrix(2)).has_value());
}

TEST_CASE("miou is order invariant") {
  std::mt19937_64 rng(2);
  LabelVec pred = oracle::random_labels(150, 5, rng), truth = oracle::random_labels(150, 5, rng);
  metrics::ConfusionMatrix a(5), b(5);
  a.accumulate(pred, truth);
  std::vector<std::size_t> perm(150);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  LabelVec pp, tp;
  for (auto i : perm) {
    pp.push_back(pred[i]);
    tp.push_back(truth[i]);
  }
  b.accumulate(pp, tp);
  CHECK(metrics::miou(a) == metrics::miou(b));
}

TEST_CASE("set oracle") { CHECK(metric_oracle::run(1000, 3) == 0); }
