#pragma once

// Finite-difference gradient checks shared by the unit tests and the
// acceptance suite. Each routine draws `instances` random small problems
// and reports the worst relative error between analytic and central
// difference gradients (h = 1e-5).

#include <algorithm>
#include <limits>

#include "awseg/losses.hpp"
#include "awseg/model.hpp"
#include "oracles.hpp"

namespace gradcheck {

using awseg::LabelVec;
using awseg::Matrix;

struct Report {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // instances rejected for sitting near a tie or kink
  double worst = 0.0;
};

inline constexpr double kStep = 1e-5;

inline void record(Report& r, const Matrix& analytic, const Matrix& numeric) {
  r.worst = std::max(r.worst, oracle::relative_error(analytic.data(), numeric.data()));
  ++r.checked;
}

inline Report ce(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Report r;
  while (r.checked < instances) {
    const std::size_t n = 1 + rng() % 8, c = 2 + rng() % 4;
    const Matrix x = oracle::random_matrix(n, c, rng, 2.0);
    const LabelVec y = oracle::random_labels(n, c, rng);
    const auto out = awseg::losses::ce_loss(x, y);
    record(r, out.grad, oracle::numeric_gradient([&](const Matrix& m) { return awseg::losses::ce_loss(m, y).value; }, x, kStep));
  }
  return r;
}

inline Report sce(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  Report r;
  while (r.checked < instances) {
    const std::size_t n = 1 + rng() % 8, c = 2 + rng() % 4;
    const Matrix x = oracle::random_matrix(n, c, rng, 2.0);
    const LabelVec y = oracle::random_labels(n, c, rng);
    awseg::losses::SceParams p{u(rng), u(rng), -1.0 - 3.0 * u(rng)};
    const auto out = awseg::losses::sce_loss(x, y, p);
    record(r, out.grad, oracle::numeric_gradient([&](const Matrix& m) { return awseg::losses::sce_loss(m, y, p).value; }, x, kStep));
  }
  return r;
}

inline Report kd(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> temp(0.5, 4.0);
  Report r;
  while (r.checked < instances) {
    const std::size_t n = 1 + rng() % 8, base = 2 + rng() % 3, novel = rng() % 3;
    std::vector<awseg::ClassId> ids(base);
    std::iota(ids.begin(), ids.end(), 0u);
    const Matrix student = oracle::random_matrix(n, base + novel, rng, 2.0);
    const Matrix teacher = oracle::random_matrix(n, base, rng, 2.0);
    const double t = temp(rng);
    const auto out = awseg::losses::kd_loss(student, teacher, ids, t);
    record(r, out.grad, oracle::numeric_gradient([&](const Matrix& m) { return awseg::losses::kd_loss(m, teacher, ids, t).value; }, student, kStep));
  }
  return r;
}

/// Smallest gap between distinct sorted per-class errors and the argmax
/// margin; Lovász is only differentiable away from both kinds of ties.
inline double lovasz_tie_gap(const Matrix& probs, const LabelVec& labels) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < probs.cols(); ++c) {
    std::vector<double> err;
    for (std::size_t i = 0; i < probs.rows(); ++i)
      err.push_back(labels[i] == c ? 1.0 - probs(i, c) : probs(i, c));
    std::sort(err.begin(), err.end());
    for (std::size_t i = 1; i < err.size(); ++i) gap = std::min(gap, err[i] - err[i - 1]);
  }
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::vector<double> row(probs.row(i).begin(), probs.row(i).end());
    std::sort(row.rbegin(), row.rend());
    gap = std::min(gap, row[0] - row[1]);
  }
  return gap;
}

inline Report lovasz(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Report r;
  while (r.checked < instances) {
    const std::size_t n = 2 + rng() % 6, c = 2 + rng() % 3;
    const Matrix x = oracle::random_matrix(n, c, rng, 1.5);
    const LabelVec y = oracle::random_labels(n, c, rng);
    if (lovasz_tie_gap(awseg::losses::softmax(x), y) < 1e-3) {
      ++r.skipped;
      continue;
    }
    const auto out = awseg::losses::lovasz_softmax(x, y);
    record(r, out.grad, oracle::numeric_gradient([&](const Matrix& m) { return awseg::losses::lovasz_softmax(m, y).value; }, x, kStep));
  }
  return r;
}

/// Distance from every anchor's hinge and hardest-example choices to a kink.
inline double triplet_kink_gap(const Matrix& f, const LabelVec& y, double margin) {
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t k = 0; k < f.cols(); ++k) s += (f(a, k) - f(b, k)) * (f(a, k) - f(b, k));
    return std::sqrt(s);
  };
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < f.rows(); ++a) {
    std::vector<double> pos, neg;
    for (std::size_t b = 0; b < f.rows(); ++b) {
      if (b == a) continue;
      (y[b] == y[a] ? pos : neg).push_back(dist(a, b));
    }
    if (pos.empty() || neg.empty()) continue;
    std::sort(pos.rbegin(), pos.rend());
    std::sort(neg.begin(), neg.end());
    if (pos.size() > 1) gap = std::min(gap, pos[0] - pos[1]);
    if (neg.size() > 1) gap = std::min(gap, neg[1] - neg[0]);
    gap = std::min(gap, std::fabs(pos[0] - neg[0] + margin));
    gap = std::min(gap, pos[0]);
  }
  return gap;
}

inline Report triplet(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Report r;
  while (r.checked < instances) {
    const std::size_t n = 3 + rng() % 8, d = 2 + rng() % 3;
    const Matrix f = oracle::random_matrix(n, d, rng, 1.0);
    const LabelVec y = oracle::random_labels(n, 2 + rng() % 2, rng);
    awseg::losses::TripletParams p{1.0, 1 + rng() % 12};
    const std::uint64_t s = rng();
    const auto out = awseg::losses::triplet_reg(f, y, p, s);
    if (triplet_kink_gap(f, y, p.margin) < 1e-3 || out.value == 0.0) {
      ++r.skipped;
      continue;
    }
    record(r, out.grad, oracle::numeric_gradient([&](const Matrix& m) { return awseg::losses::triplet_reg(m, y, p, s).value; }, f, kStep));
  }
  return r;
}

/// Scalar probe loss sum(G .* forward(model, x)) so that grad_logits = G.
inline double probe(const awseg::model::Model& m, const Matrix& x, const Matrix& g) {
  const Matrix out = awseg::model::forward(m, x);
  double s = 0;
  for (std::size_t i = 0; i < out.data().size(); ++i) s += out.data()[i] * g.data()[i];
  return s;
}

/// Smallest |pre-activation| over hidden units; ReLU kinks sit at zero.
inline double relu_gap(const awseg::model::Model& m, const Matrix& x) {
  awseg::model::ForwardCache cache;
  awseg::model::forward(m, x, &cache);
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    const Matrix& in = cache.inputs[l];
    for (std::size_t i = 0; i < in.rows(); ++i)
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        double z = layer.bias[o];
        for (std::size_t k = 0; k < layer.weight.cols(); ++k) z += layer.weight(o, k) * in(i, k);
        gap = std::min(gap, std::fabs(z));
      }
  }
  return gap;
}

inline Report mlp(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Report r;
  while (r.checked < instances) {
    const std::size_t in = 2 + rng() % 5, out = 2 + rng() % 3, depth = rng() % 3;
    std::vector<std::size_t> hidden;
    for (std::size_t d = 0; d < depth; ++d) hidden.push_back(2 + rng() % 6);
    auto m = awseg::model::init_model(in, hidden, out, rng());
    for (auto& l : m.layers)
      for (auto& b : l.bias) b = u(rng);
    for (std::size_t k = 0; k < in; ++k) {
      m.norm.mean[k] = u(rng);
      m.norm.stddev[k] = 1.0 + u(rng);
    }
    const Matrix x = oracle::random_matrix(1 + rng() % 6, in, rng, 1.0);
    const Matrix g = oracle::random_matrix(x.rows(), out, rng, 1.0);
    if (relu_gap(m, x) < 1e-3) {
      ++r.skipped;
      continue;
    }
    awseg::model::ForwardCache cache;
    awseg::model::forward(m, x, &cache);
    const auto grads = awseg::model::backward(m, cache, g);

    std::vector<double> analytic, numeric;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      auto perturb = [&](double& slot) {
        const double orig = slot;
        slot = orig + kStep;
        const double up = probe(m, x, g);
        slot = orig - kStep;
        const double down = probe(m, x, g);
        slot = orig;
        numeric.push_back((up - down) / (2 * kStep));
      };
      for (std::size_t i = 0; i < m.layers[l].weight.data().size(); ++i) {
        analytic.push_back(grads[l].weight.data()[i]);
        perturb(m.layers[l].weight.data()[i]);
      }
      for (std::size_t i = 0; i < m.layers[l].bias.size(); ++i) {
        analytic.push_back(grads[l].bias[i]);
        perturb(m.layers[l].bias[i]);
      }
    }
    r.worst = std::max(r.worst, oracle::relative_error(analytic, numeric));
    ++r.checked;
  }
  return r;
}

}  // namespace gradcheck
