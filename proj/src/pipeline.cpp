#include "awseg/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "awseg/errors.hpp"
#include "awseg/geom.hpp"
#include "awseg/losses.hpp"
#include "awseg/rng.hpp"

namespace awseg::pipeline {

FeaturedScan featurize(LabeledScan scan, const geom::FeatureParams& params) {
  Matrix f = geom::compute_features(scan.cloud, params);
  return {std::move(scan), std::move(f)};
}

std::vector<FeaturedScan> featurize_all(std::span<const LabeledScan> scans,
                                        const geom::FeatureParams& params) {
  std::vector<FeaturedScan> out;
  out.reserve(scans.size());
  for (const auto& s : scans) out.push_back(featurize(s, params));
  return out;
}

LabelVec argmax_labels(const Matrix& logits) {
  LabelVec out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    // max_element returns the first maximum, i.e. the lowest id on ties.
    out[i] = static_cast<ClassId>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

LabelVec generate_pseudo_labels(const model::Model& model, const Matrix& features) {
  return argmax_labels(model::forward(model, features));
}

LabelVec generate_pseudo_labels(const model::Model& model, const PointCloud& cloud,
                                const geom::FeatureParams& params) {
  return generate_pseudo_labels(model, geom::compute_features(cloud, params));
}

namespace {

void check_model_schema(const model::Model& m, const ClassSchema& schema) {
  if (m.output_dim() != schema.num_classes() && m.output_dim() != schema.num_base())
    throw ArgumentError(fmt::format("model has {} outputs; schema has {} base and {} total classes",
                                    m.output_dim(), schema.num_base(), schema.num_classes()));
}

EvalResult summarize(metrics::ConfusionMatrix cm, const ClassSchema& schema,
                     metrics::AbsentClassPolicy policy) {
  EvalResult r;
  r.iou = metrics::iou_per_class(cm);
  r.miou_all = metrics::miou(cm, {}, policy);
  r.miou_base = metrics::miou(cm, schema.base_ids(), policy);
  const auto novel = schema.novel_ids();
  if (!novel.empty()) r.miou_novel = metrics::miou(cm, novel, policy);
  r.confusion = std::move(cm);
  return r;
}

}  // namespace

EvalResult evaluate(const model::Model& model, std::span<const FeaturedScan> scans,
                    const ClassSchema& schema, metrics::AbsentClassPolicy policy) {
  if (scans.empty()) throw ArgumentError("evaluate needs at least one scan");
  check_model_schema(model, schema);
  metrics::ConfusionMatrix cm(schema.num_classes());
  for (const auto& s : scans) cm.accumulate(generate_pseudo_labels(model, s.features), s.scan.labels);
  return summarize(std::move(cm), schema, policy);
}

EvalResult evaluate(const model::Model& model, std::span<const LabeledScan> scans,
                    const ClassSchema& schema, const geom::FeatureParams& params,
                    metrics::AbsentClassPolicy policy) {
  if (scans.empty()) throw ArgumentError("evaluate needs at least one scan");
  check_model_schema(model, schema);
  metrics::ConfusionMatrix cm(schema.num_classes());
  for (const auto& s : scans)
    cm.accumulate(generate_pseudo_labels(model, s.cloud, params), s.labels);
  return summarize(std::move(cm), schema, policy);
}

bool offer_best(BestModelState& state, const model::Model& current, double miou, std::size_t epoch) {
  if (state.model && !(miou > state.miou)) return false;
  state.model = current;
  state.miou = miou;
  state.epoch = epoch;
  ++state.updates;
  return true;
}

Selection select_best(const model::Model& current, std::span<const FeaturedScan> pseudoval,
                      const ClassSchema& schema, BestModelState& state, std::size_t epoch,
                      metrics::AbsentClassPolicy policy) {
  if (pseudoval.empty()) throw ArgumentError("pseudo-validation set is empty");
  Selection s;
  s.eval = evaluate(current, pseudoval, schema, policy);
  s.miou = s.eval.miou_all.value_or(0.0);
  s.updated = offer_best(state, current, s.miou, epoch);
  return s;
}

namespace {

std::string fmt_metric(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string("undefined");
}

}  // namespace

std::string format_record(const EvalRecord& r) {
  return fmt::format("stage={} epoch={} miou_all={} miou_base={} miou_novel={} best_flag={} best_miou={:.17g} ssl_active={}",
                     r.stage, r.epoch, fmt_metric(r.miou_all), fmt_metric(r.miou_base),
                     fmt_metric(r.miou_novel), r.best_flag ? 1 : 0, r.best_miou, r.ssl_active ? 1 : 0);
}

std::string format_log(std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) out += format_record(r) + "\n";
  return out;
}

LossAndGrads fss_loss(const model::Model& model, const FeaturedScan& shot, const TrainConfig& cfg,
                      std::uint64_t seed) {
  model::ForwardCache cache;
  const Matrix logits = model::forward(model, shot.features, &cache);
  losses::LossOutput total = losses::ce_loss(logits, shot.scan.labels);
  std::optional<Matrix> grad_embedding;
  if (cfg.fss_method == FssMethod::kFssad) {
    const auto lov = losses::lovasz_softmax(logits, shot.scan.labels);
    total.value += lov.value;
    for (std::size_t i = 0; i < total.grad.data().size(); ++i) total.grad.data()[i] += lov.grad.data()[i];
  } else if (cfg.fss_method == FssMethod::kGfss) {
    auto trip = losses::triplet_reg(cache.embedding(), shot.scan.labels, cfg.triplet, seed);
    total.value += trip.value;
    grad_embedding = std::move(trip.grad);
  }
  return {total.value,
          model::backward(model, cache, total.grad, grad_embedding ? &*grad_embedding : nullptr)};
}

namespace {

std::uint64_t step_seed(const TrainConfig& cfg, std::size_t epoch, std::size_t item) {
  return derive_seed(cfg.seed, kStreamTriplet, epoch * 1000003ULL + item);
}

std::uint64_t head_seed(const TrainConfig& cfg) { return derive_seed(cfg.seed, kStreamHeadExtension); }

// Sample `count` pool indices: without replacement when the pool is large
// enough, with replacement otherwise.
std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  if (pool == 0) return out;
  if (count <= pool) {
    std::vector<std::size_t> order(pool);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t d = 0; d < count; ++d) {
      std::uniform_int_distribution<std::size_t> pick(d, pool - 1);
      std::swap(order[d], order[pick(rng)]);
      out.push_back(order[d]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    for (std::size_t d = 0; d < count; ++d) out.push_back(pick(rng));
  }
  return out;
}

std::vector<FeaturedScan> featurize_pseudoval(const augment::PseudoValSet& set,
                                              const geom::FeatureParams& params) {
  return featurize_all(set.scans, params);
}

bool is_eval_epoch(std::size_t epoch, std::size_t total, std::size_t interval) {
  return epoch % interval == 0 || epoch == total;
}

model::Model extended_start(const model::Model& phi0, const ClassSchema& schema, const TrainConfig& cfg) {
  if (phi0.output_dim() != schema.num_base())
    throw ArgumentError(fmt::format("base model has {} outputs, schema has {} base classes",
                                    phi0.output_dim(), schema.num_base()));
  if (schema.num_novel() == 0) return phi0;
  return model::extend_classifier(phi0, schema.num_novel(), head_seed(cfg), cfg.head_init_scale);
}

model::OptimizerState make_optimizer(const TrainConfig& cfg) {
  model::OptimizerState opt;
  opt.learning_rate = cfg.learning_rate;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  return opt;
}

void check_shots(std::span<const LabeledScan> shots, const ClassSchema& schema) {
  if (shots.empty()) throw ArgumentError("at least one labeled shot is required");
  for (const auto& s : shots) s.validate(schema);
}

}  // namespace

StageResult train_stage0(std::span<const LabeledScan> source, const ClassSchema& schema,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
  (void)hooks;
  cfg.validate();
  if (source.empty()) throw ArgumentError("stage zero needs source scans");
  for (std::size_t s = 0; s < source.size(); ++s) {
    source[s].validate(schema);
    for (ClassId id : source[s].labels)
      if (id >= schema.num_base())
        throw DataError(fmt::format("source scan {} contains novel class '{}'", s, schema.name(id)));
  }

  auto data = featurize_all(source, cfg.features);
  std::vector<Matrix> feature_sets;
  for (const auto& d : data) feature_sets.push_back(d.features);

  StageResult result;
  model::Model m = model::init_model(geom::kFeatureDim, cfg.hidden_dims, schema.num_base(), cfg.seed);
  m.norm = model::compute_norm_stats(feature_sets);
  auto opt = make_optimizer(cfg);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.stage0_epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, kStreamShuffle, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.stage0_batch_scans) {
      const std::size_t end = std::min(order.size(), b + cfg.stage0_batch_scans);
      const double weight = 1.0 / static_cast<double>(end - b);
      model::Gradients grads = model::zero_gradients(m);
      for (std::size_t j = b; j < end; ++j) {
        auto lg = fss_loss(m, data[order[j]], cfg, step_seed(cfg, epoch, order[j]));
        model::accumulate(grads, lg.grads, weight);
        epoch_loss += lg.value;
      }
      model::sgd_step(m, grads, opt);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  result.final_model = m;
  offer_best(result.best, m, 0.0, cfg.stage0_epochs);
  return result;
}

StageResult train_stage1(const model::Model& phi0, std::span<const LabeledScan> shots,
                         std::span<const PointCloud> unlabeled, const ClassSchema& schema,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_shots(shots, schema);
  model::Model m = extended_start(phi0, schema, cfg);

  const auto shot_data = featurize_all(shots, cfg.features);
  std::vector<Matrix> unlabeled_features;
  unlabeled_features.reserve(unlabeled.size());
  for (const auto& u : unlabeled) unlabeled_features.push_back(geom::compute_features(u, cfg.features));

  const auto pv = augment::build_pseudoval_stage1(shots, cfg.pseudoval_size, cfg.augmentation, schema,
                                                  derive_seed(cfg.seed, kStreamPseudoVal, 1));
  const auto pv_data = featurize_pseudoval(pv, cfg.features);

  StageResult result;
  auto opt = make_optimizer(cfg);
  bool ssl_active = false;
  // Pseudo-labels from the current best model, dropped whenever it changes.
  struct PseudoLabels {
    LabelVec labels;
    std::size_t model_epoch = 0;
  };
  std::map<std::size_t, PseudoLabels> pseudo_cache;
  const double shot_weight = 1.0 / static_cast<double>(shot_data.size());

  for (std::size_t epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
    model::Gradients grads = model::zero_gradients(m);
    double loss = 0.0;
    for (std::size_t i = 0; i < shot_data.size(); ++i) {
      auto lg = fss_loss(m, shot_data[i], cfg, step_seed(cfg, epoch, i));
      model::accumulate(grads, lg.grads, shot_weight);
      loss += shot_weight * lg.value;
    }

    if (ssl_active && cfg.omega0 > 0.0 && !unlabeled_features.empty()) {
      Rng rng(derive_seed(cfg.seed, kStreamSslSampling, epoch));
      const auto picks = sample_indices(unlabeled_features.size(), cfg.ssl_batch, rng);
      const double weight = cfg.omega0 / static_cast<double>(picks.size());
      std::vector<std::size_t> label_epochs;
      for (std::size_t idx : picks) {
        auto it = pseudo_cache.find(idx);
        if (it == pseudo_cache.end()) {
          PseudoLabels fresh{generate_pseudo_labels(*result.best.model, unlabeled_features[idx]),
                             result.best.epoch};
          it = pseudo_cache.emplace(idx, std::move(fresh)).first;
        }
        label_epochs.push_back(it->second.model_epoch);
        model::ForwardCache cache;
        const Matrix logits = model::forward(m, unlabeled_features[idx], &cache);
        const auto sce = losses::sce_loss(logits, it->second.labels, cfg.sce);
        model::accumulate(grads, model::backward(m, cache, sce.grad), weight);
        loss += weight * sce.value;
      }
      if (hooks.on_pseudo_labels) hooks.on_pseudo_labels(epoch, picks, label_epochs);
    }

    model::sgd_step(m, grads, opt);
    result.loss_trace.push_back(loss);

    if (is_eval_epoch(epoch, cfg.stage1_epochs, cfg.selection_interval)) {
      const auto sel = select_best(m, pv_data, schema, result.best, epoch, cfg.absent_classes);
      if (sel.updated) pseudo_cache.clear();
      const bool above = sel.miou >= cfg.gamma;
      ssl_active = cfg.ssl_hysteresis ? (ssl_active || above) : above;
      EvalRecord rec{1, epoch, sel.eval.miou_all, sel.eval.miou_base, sel.eval.miou_novel,
                     sel.updated, result.best.miou, ssl_active};
      result.log.push_back(rec);
      if (hooks.on_evaluation) hooks.on_evaluation(rec);
    }
  }
  result.final_model = std::move(m);
  return result;
}

StageResult train_stage2(const model::Model& phi0, const model::Model& phi1_best,
                         std::span<const LabeledScan> shots, std::span<const PointCloud> unlabeled,
                         std::span<const LabeledScan> source, const ClassSchema& schema,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_shots(shots, schema);
  if (phi1_best.output_dim() != schema.num_classes())
    throw ArgumentError("stage-one model must cover every schema class");
  const bool mixing = cfg.omega2 > 0.0;
  if (mixing && (unlabeled.empty() || source.empty()))
    throw ArgumentError("stage-two mixing needs unlabeled target scans and source scans");
  model::Model m = extended_start(phi0, schema, cfg);
  const auto base_ids = schema.base_ids();

  const auto shot_data = featurize_all(shots, cfg.features);
  std::vector<Matrix> shot_teacher;
  for (const auto& s : shot_data) shot_teacher.push_back(model::forward(phi0, s.features));

  // Unlabeled scans carry stage-one pseudo-labels; features are recomputed
  // after each mix, so only the labels are cached.
  std::vector<std::optional<LabelVec>> pseudo(unlabeled.size());

  const auto pv = augment::build_pseudoval_stage2(shots, source, cfg.pseudoval_size, cfg.augmentation,
                                                  schema, derive_seed(cfg.seed, kStreamPseudoVal, 2));
  const auto pv_data = featurize_pseudoval(pv, cfg.features);

  StageResult result;
  auto opt = make_optimizer(cfg);
  const double shot_weight = 1.0 / static_cast<double>(shot_data.size());

  for (std::size_t epoch = 1; epoch <= cfg.stage2_epochs; ++epoch) {
    model::Gradients grads = model::zero_gradients(m);
    double loss = 0.0;
    for (std::size_t i = 0; i < shot_data.size(); ++i) {
      auto lg = fss_loss(m, shot_data[i], cfg, step_seed(cfg, epoch, i));
      model::accumulate(grads, lg.grads, shot_weight);
      loss += shot_weight * lg.value;
      if (cfg.omega1 > 0.0) {
        model::ForwardCache cache;
        const Matrix logits = model::forward(m, shot_data[i].features, &cache);
        const auto kd = losses::kd_loss(logits, shot_teacher[i], base_ids, cfg.kd_temperature);
        model::accumulate(grads, model::backward(m, cache, kd.grad), cfg.omega1 * shot_weight);
        loss += cfg.omega1 * shot_weight * kd.value;
      }
    }

    if (mixing) {
      Rng rng(derive_seed(cfg.seed, kStreamMixSampling, epoch));
      std::uniform_int_distribution<std::size_t> pick_u(0, unlabeled.size() - 1);
      std::uniform_int_distribution<std::size_t> pick_s(0, source.size() - 1);
      const double weight = cfg.omega2 / static_cast<double>(cfg.mix_batch);
      for (std::size_t j = 0; j < cfg.mix_batch; ++j) {
        const std::size_t u = pick_u(rng);
        const std::size_t s = pick_s(rng);
        double theta = uniform(rng, 0.0, geom::kTwoPi);
        if (theta <= 0.0) theta = std::numbers::pi;
        const double start = uniform(rng, 0.0, geom::kTwoPi);
        if (!pseudo[u]) pseudo[u] = generate_pseudo_labels(phi1_best, unlabeled[u], cfg.features);

        const LabeledScan target{unlabeled[u], *pseudo[u]};
        const LabeledScan mixed = augment::polar_mix(target, source[s], theta, start);
        const Matrix feats = geom::compute_features(mixed.cloud, cfg.features);
        const Matrix teacher = model::forward(phi0, feats);
        model::ForwardCache cache;
        const Matrix logits = model::forward(m, feats, &cache);
        auto sce = losses::sce_loss(logits, mixed.labels, cfg.sce);
        const auto kd = losses::kd_loss(logits, teacher, base_ids, cfg.kd_temperature);
        for (std::size_t k = 0; k < sce.grad.data().size(); ++k) sce.grad.data()[k] += kd.grad.data()[k];
        model::accumulate(grads, model::backward(m, cache, sce.grad), weight);
        loss += weight * (sce.value + kd.value);
      }
    }

    model::sgd_step(m, grads, opt);
    result.loss_trace.push_back(loss);

    if (is_eval_epoch(epoch, cfg.stage2_epochs, cfg.selection_interval)) {
      const auto sel = select_best(m, pv_data, schema, result.best, epoch, cfg.absent_classes);
      EvalRecord rec{2, epoch, sel.eval.miou_all, sel.eval.miou_base, sel.eval.miou_novel,
                     sel.updated, result.best.miou, mixing};
      result.log.push_back(rec);
      if (hooks.on_evaluation) hooks.on_evaluation(rec);
    }
  }
  result.final_model = std::move(m);
  return result;
}

}  // namespace awseg::pipeline
