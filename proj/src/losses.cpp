#include "awseg/losses.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "awseg/errors.hpp"
#include "awseg/rng.hpp"

namespace awseg::losses {

namespace {

void check_labels(const Matrix& logits, const LabelVec& labels) {
  if (labels.size() != logits.rows())
    throw ArgumentError(fmt::format("{} labels for {} rows", labels.size(), logits.rows()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= logits.cols())
      throw ArgumentError(fmt::format("label {} at row {} outside [0, {})", labels[i], i, logits.cols()));
}

// Writes softmax of `in` into `out` and returns log-sum-exp of the row.
double softmax_row(std::span<const double> in, std::span<double> out) {
  const double mx = *std::max_element(in.begin(), in.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  for (auto& v : out) v /= sum;
  return mx + std::log(sum);
}

}  // namespace

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  if (logits.cols() == 0) return p;
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax_row(logits.row(i), p.row(i));
  return p;
}

LossOutput ce_loss(const Matrix& logits, const LabelVec& labels) {
  check_labels(logits, labels);
  LossOutput out{0.0, Matrix(logits.rows(), logits.cols())};
  const std::size_t n = logits.rows();
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto g = out.grad.row(i);
    const double lse = softmax_row(logits.row(i), g);
    out.value += lse - logits(i, labels[i]);
    g[labels[i]] -= 1.0;
    for (auto& v : g) v *= inv_n;
  }
  out.value *= inv_n;
  return out;
}

LossOutput sce_loss(const Matrix& logits, const LabelVec& labels, const SceParams& params) {
  if (params.alpha < 0.0 || params.beta < 0.0) throw ArgumentError("SCE weights must be >= 0");
  if (!(params.clip_log < 0.0)) throw ArgumentError("SCE clip_log must be < 0");
  LossOutput ce = ce_loss(logits, labels);
  const std::size_t n = logits.rows();
  LossOutput out{params.alpha * ce.value, Matrix(n, logits.cols())};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> p(logits.cols());
  double rce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    softmax_row(logits.row(i), p);
    const ClassId y = labels[i];
    rce += -params.clip_log * (1.0 - p[y]);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d_rce = params.clip_log * p[y] * ((j == y ? 1.0 : 0.0) - p[j]) * inv_n;
      out.grad(i, j) = params.alpha * ce.grad(i, j) + params.beta * d_rce;
    }
  }
  out.value += params.beta * (rce * inv_n);
  return out;
}

LossOutput kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                   std::span<const ClassId> base_ids, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("KD temperature must be > 0");
  if (student_logits.rows() != teacher_logits.rows())
    throw ArgumentError("student and teacher row counts differ");
  if (teacher_logits.cols() != base_ids.size())
    throw ArgumentError(fmt::format("teacher has {} outputs but {} base ids were given",
                                    teacher_logits.cols(), base_ids.size()));
  for (ClassId id : base_ids)
    if (id >= student_logits.cols()) throw ArgumentError(fmt::format("base id {} not a student column", id));

  const std::size_t n = student_logits.rows(), b = base_ids.size();
  LossOutput out{0.0, Matrix(n, student_logits.cols())};
  if (n == 0 || b == 0) return out;
  const double inv_t = 1.0 / temperature;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> s(b), t(b), p(b), q(b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      s[j] = student_logits(i, base_ids[j]) * inv_t;
      t[j] = teacher_logits(i, j) * inv_t;
    }
    const double lse_s = softmax_row(s, p);
    softmax_row(t, q);
    double ce = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      ce -= q[j] * (s[j] - lse_s);
      out.grad(i, base_ids[j]) = temperature * (p[j] - q[j]) * inv_n;
    }
    out.value += ce;
  }
  out.value *= temperature * temperature * inv_n;
  return out;
}

double kd_teacher_entropy(const Matrix& teacher_logits, double temperature) {
  const std::size_t n = teacher_logits.rows(), b = teacher_logits.cols();
  if (n == 0 || b == 0) return 0.0;
  std::vector<double> t(b), q(b);
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j) t[j] = teacher_logits(i, j) / temperature;
    const double lse = softmax_row(t, q);
    for (std::size_t j = 0; j < b; ++j) h -= q[j] * (t[j] - lse);
  }
  return h * temperature * temperature / static_cast<double>(n);
}

LossOutput lovasz_softmax_probs(const Matrix& probs, const LabelVec& labels,
                                std::span<const ClassId> classes) {
  check_labels(probs, labels);
  const std::size_t n = probs.rows(), c_total = probs.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double v : probs.row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(fmt::format("probability outside [0,1] at row {}", i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ArgumentError(fmt::format("row {} sums to {}, not 1", i, sum));
  }

  std::vector<ClassId> candidates(classes.begin(), classes.end());
  if (candidates.empty()) {
    candidates.resize(c_total);
    std::iota(candidates.begin(), candidates.end(), ClassId{0});
  }
  std::vector<bool> present(c_total, false);
  for (std::size_t i = 0; i < n; ++i) {
    present[labels[i]] = true;
    auto row = probs.row(i);
    present[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())] = true;
  }

  LossOutput out{0.0, Matrix(n, c_total)};
  std::vector<double> errors(n), jaccard_grad(n);
  std::vector<std::size_t> order(n);
  std::size_t counted = 0;
  for (ClassId c : candidates) {
    if (c >= c_total) throw ArgumentError(fmt::format("class {} outside [0, {})", c, c_total));
    if (!present[c]) continue;
    ++counted;
    double gts = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool fg = labels[i] == c;
      errors[i] = fg ? 1.0 - probs(i, c) : probs(i, c);
      gts += fg ? 1.0 : 0.0;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
    // Jaccard loss of the first r sorted points, differenced along the path.
    double cum_fg = 0.0, prev = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      cum_fg += labels[order[r]] == c ? 1.0 : 0.0;
      const double intersection = gts - cum_fg;
      const double uni = gts + static_cast<double>(r + 1) - cum_fg;
      const double jac = 1.0 - intersection / uni;
      jaccard_grad[r] = jac - prev;
      prev = jac;
    }
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = order[r];
      out.value += errors[i] * jaccard_grad[r];
      out.grad(i, c) += labels[i] == c ? -jaccard_grad[r] : jaccard_grad[r];
    }
  }
  if (counted > 0) {
    const double inv = 1.0 / static_cast<double>(counted);
    out.value *= inv;
    for (auto& v : out.grad.data()) v *= inv;
  }
  return out;
}

LossOutput lovasz_softmax(const Matrix& logits, const LabelVec& labels,
                          std::span<const ClassId> classes) {
  const Matrix p = softmax(logits);
  LossOutput on_probs = lovasz_softmax_probs(p, labels, classes);
  LossOutput out{on_probs.value, Matrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) dot += p(i, j) * on_probs.grad(i, j);
    for (std::size_t j = 0; j < logits.cols(); ++j)
      out.grad(i, j) = p(i, j) * (on_probs.grad(i, j) - dot);
  }
  return out;
}

namespace {

double euclid(const Matrix& f, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t d = 0; d < f.cols(); ++d) {
    const double diff = f(a, d) - f(b, d);
    s += diff * diff;
  }
  return std::sqrt(s);
}

// Adds sign * (f_a - f_b) / dist to grad rows a and -(...) to row b.
void add_distance_grad(const Matrix& f, std::size_t a, std::size_t b, double dist, double scale,
                       Matrix& grad) {
  if (dist <= 0.0) return;
  for (std::size_t d = 0; d < f.cols(); ++d) {
    const double g = scale * (f(a, d) - f(b, d)) / dist;
    grad(a, d) += g;
    grad(b, d) -= g;
  }
}

}  // namespace

LossOutput triplet_reg(const Matrix& features, const LabelVec& labels, const TripletParams& params,
                       std::uint64_t seed) {
  if (!(params.margin > 0.0)) throw ArgumentError("triplet margin must be > 0");
  if (params.max_anchors < 1) throw ArgumentError("max_anchors must be >= 1");
  if (labels.size() != features.rows()) throw ArgumentError("triplet labels do not match rows");
  const std::size_t n = features.rows();
  LossOutput out{0.0, Matrix(n, features.cols())};
  if (n < 2) return out;

  std::vector<std::size_t> anchors(n);
  std::iota(anchors.begin(), anchors.end(), std::size_t{0});
  Rng rng(seed);
  const std::size_t m = std::min(params.max_anchors, n);
  for (std::size_t d = 0; d < m; ++d) {
    std::uniform_int_distribution<std::size_t> pick(d, n - 1);
    std::swap(anchors[d], anchors[pick(rng)]);
  }
  anchors.resize(m);

  struct Term { std::size_t a, p, n; double d_ap, d_an; };
  std::vector<Term> active;
  std::size_t used = 0;
  for (std::size_t a : anchors) {
    std::size_t pos = n, neg = n;
    double d_ap = -1.0, d_an = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = euclid(features, a, j);
      if (labels[j] == labels[a]) {
        if (d > d_ap) { d_ap = d; pos = j; }
      } else if (neg == n || d < d_an) {
        d_an = d;
        neg = j;
      }
    }
    if (pos == n || neg == n) continue;
    ++used;
    const double hinge = d_ap - d_an + params.margin;
    if (hinge > 0.0) {
      out.value += hinge;
      active.push_back({a, pos, neg, d_ap, d_an});
    }
  }
  if (used == 0) return out;
  const double inv = 1.0 / static_cast<double>(used);
  out.value *= inv;
  for (const auto& t : active) {
    add_distance_grad(features, t.a, t.p, t.d_ap, inv, out.grad);
    add_distance_grad(features, t.a, t.n, t.d_an, -inv, out.grad);
  }
  return out;
}

}  // namespace awseg::losses
