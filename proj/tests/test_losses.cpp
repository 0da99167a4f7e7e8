#include <doctest.h>

#include <cmath>

#include "awseg/errors.hpp"
#include "awseg/losses.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace awseg;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(0, r.begin()->size());
  for (const auto& row : r) m.append_row(std::vector<double>(row));
  return m;
}

}  // namespace

TEST_CASE("softmax") {
  auto p = losses::softmax(rows({{0, 0}, {1000, 0}, {1, 2}}));
  CHECK(p(0, 0) == 0.5);
  CHECK(p(0, 1) == 0.5);
  CHECK(std::fabs(p(1, 0) - 1.0) <= 1e-12);
  CHECK(std::fabs(p(1, 1)) <= 1e-12);
  p = losses::softmax(rows({{1, 2, 3}}));
  CHECK(p(0, 0) == doctest::Approx(0.09003057).epsilon(1e-7));
  CHECK(p(0, 1) == doctest::Approx(0.24472847).epsilon(1e-7));
  CHECK(p(0, 2) == doctest::Approx(0.66524096).epsilon(1e-7));

  std::mt19937_64 rng(1);
  p = losses::softmax(oracle::random_matrix(20, 5, rng, 10.0));
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0;
    for (double v : p.row(i)) s += v;
    CHECK(std::fabs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("cross-entropy") {
  CHECK(losses::ce_loss(rows({{0, 0}}), {0}).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(losses::ce_loss(rows({{50, 0}, {0, 50}}), {0, 1}).value < 1e-6);
  CHECK_THROWS_AS(losses::ce_loss(rows({{0, 0}}), {2}), ArgumentError);
  CHECK_THROWS_AS(losses::ce_loss(rows({{0, 0}}), {0, 1}), ArgumentError);
  CHECK(gradcheck::ce(30, 2).worst <= 1e-6);
}

TEST_CASE("symmetric cross-entropy") {
  CHECK(losses::sce_loss(rows({{1000, 0}}), {0}).value == 0.0);
  CHECK(losses::sce_loss(rows({{0, 0}}), {0}).value == doctest::Approx(3.693147).epsilon(1e-6));
  std::mt19937_64 rng(3);
  const Matrix x = oracle::random_matrix(7, 4, rng, 2.0);
  const LabelVec y = oracle::random_labels(7, 4, rng);
  const auto ce = losses::ce_loss(x, y);
  const auto sce = losses::sce_loss(x, y, {0.7, 0.0, -6.0});
  CHECK(sce.value == 0.7 * ce.value);
  for (std::size_t i = 0; i < ce.grad.data().size(); ++i) CHECK(sce.grad.data()[i] == 0.7 * ce.grad.data()[i]);
  CHECK(gradcheck::sce(30, 4).worst <= 1e-6);
}

TEST_CASE("loss permutation equivariance") {
  std::mt19937_64 rng(5);
  const Matrix x = oracle::random_matrix(6, 3, rng, 2.0);
  const LabelVec y = oracle::random_labels(6, 3, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  const Matrix xp = x.select_rows(perm);
  LabelVec yp;
  for (auto i : perm) yp.push_back(y[i]);
  const auto a = losses::sce_loss(x, y), b = losses::sce_loss(xp, yp);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
  for (std::size_t r = 0; r < perm.size(); ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(b.grad(r, c) == a.grad(perm[r], c));
}

TEST_CASE("knowledge distillation") {
  const std::vector<ClassId> base{0, 1};
  std::mt19937_64 rng(6);
  const Matrix teacher = oracle::random_matrix(5, 2, rng, 2.0);
  Matrix student(5, 4);
  for (std::size_t i = 0; i < 5; ++i) {
    student(i, 0) = teacher(i, 0);
    student(i, 1) = teacher(i, 1);
    student(i, 2) = 3.0;
    student(i, 3) = -1.0;
  }
  for (double t : {1.0, 2.5}) {
    const auto same = losses::kd_loss(student, teacher, base, t);
    CHECK(same.value == doctest::Approx(losses::kd_teacher_entropy(teacher, t)).epsilon(1e-12));
    for (double g : same.grad.data()) CHECK(std::fabs(g) <= 1e-10);
  }
  const auto uniform = losses::kd_loss(rows({{0, 0}}), rows({{1000, 0}}), base, 1.0);
  CHECK(uniform.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const Matrix s = oracle::random_matrix(5, 4, rng, 2.0);
  const auto out = losses::kd_loss(s, teacher, base, 2.0);
  CHECK(out.value >= losses::kd_teacher_entropy(teacher, 2.0) - 1e-10);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(out.grad(i, 2) == 0.0);
    CHECK(out.grad(i, 3) == 0.0);
  }
  CHECK_THROWS_AS(losses::kd_loss(s, oracle::random_matrix(4, 2, rng), base, 1.0), ArgumentError);
  CHECK(gradcheck::kd(30, 7).worst <= 1e-6);
}

TEST_CASE("lovasz-softmax") {
  CHECK(losses::lovasz_softmax_probs(rows({{1, 0}, {0, 1}}), {0, 1}).value == 0.0);

  const Matrix probs = rows({{0.4, 0.6}, {0.6, 0.4}});
  const LabelVec labels{1, 0};
  const std::vector<ClassId> positive{1};
  CHECK(losses::lovasz_softmax_probs(probs, labels, positive).value == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(losses::lovasz_softmax_probs(probs, labels).value ==
        doctest::Approx(oracle::lovasz_softmax(probs, labels)).epsilon(1e-12));

  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 8, c = 2 + rng() % 3;
    const Matrix p = losses::softmax(oracle::random_matrix(n, c, rng, 2.0));
    const LabelVec y = oracle::random_labels(n, c, rng);
    const double v = losses::lovasz_softmax_probs(p, y).value;
    CHECK(v == doctest::Approx(oracle::lovasz_softmax(p, y)).epsilon(1e-12));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(losses::lovasz_softmax_probs(rows({{0.5, 0.6}}), {0}), ArgumentError);
  CHECK(gradcheck::lovasz(30, 9).worst <= 1e-5);
}

TEST_CASE("triplet regularization") {
  losses::TripletParams p;
  std::mt19937_64 rng(10);
  const Matrix f = oracle::random_matrix(10, 3, rng);
  CHECK(losses::triplet_reg(f, LabelVec(10, 2), p, 1).value == 0.0);

  Matrix far(0, 2);
  for (double x : {0.0, 0.1, 0.05, 100.0, 100.1, 100.05}) far.append_row(std::vector<double>{x, 0.0});
  CHECK(losses::triplet_reg(far, {0, 0, 0, 1, 1, 1}, p, 2).value == 0.0);

  // Anchor a: 1 - 1.5 + 1 = 0.5. Anchor p: d(p,a) = 1, d(p,n) = 0.5 gives
  // 1.5. The negative has no positive and is skipped.
  const Matrix hand = rows({{0, 0}, {1, 0}, {1.5, 0}});
  const auto out = losses::triplet_reg(hand, {0, 0, 1}, p, 3);
  CHECK(out.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gradcheck::triplet(30, 11).worst <= 1e-5);
}
