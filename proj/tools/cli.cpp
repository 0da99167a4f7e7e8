#include "awseg/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

#include "awseg/augment.hpp"
#include "awseg/config.hpp"
#include "awseg/errors.hpp"
#include "awseg/keyvalue.hpp"
#include "awseg/model.hpp"
#include "awseg/pcio.hpp"
#include "awseg/pipeline.hpp"
#include "awseg/synth.hpp"

namespace awseg::cli {

namespace fs = std::filesystem;

std::string RunManifest::serialize() const {
  std::string s = fmt::format("# awseg run manifest\ntool_version = {}\ncommand = {}\nseed = {}\n",
                              kToolVersion, command, seed);
  if (!config_file.empty())
    s += fmt::format("config_file = {}\nconfig_hash = {:016x}\n", config_file, config_hash);
  for (const auto& [k, v] : inputs) s += fmt::format("input.{} = {}\n", k, v);
  for (const auto& [k, v] : outputs) s += fmt::format("output.{} = {}\n", k, v);
  for (const auto& [k, v] : flags) s += fmt::format("flag.{} = {}\n", k, v);
  for (const auto& [k, v] : timings) s += fmt::format("time.{}_seconds = {:.3f}\n", k, v);
  return s;
}

std::string WorkLayout::checkpoint(int stage) {
  return stage == 0 ? "stage0.ckpt" : fmt::format("stage{}_best.ckpt", stage);
}
std::string WorkLayout::metrics(int stage) { return fmt::format("stage{}_metrics.log", stage); }
std::string WorkLayout::manifest(int stage) { return fmt::format("stage{}_manifest.txt", stage); }
std::string WorkLayout::config(int stage) { return fmt::format("stage{}_config.txt", stage); }

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required) {
  cmd->add_option("--config", o.config, "key = value config file (TrainConfig field names)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed; overrides the config file");
  auto* out = cmd->add_option("--out", o.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--threads", o.threads, "worker threads (execution is sequential)")
      ->check(CLI::PositiveNumber);
}

TrainConfig resolve_config(const CommonOptions& o) {
  KeyValues kv;
  if (!o.config.empty()) kv = read_key_value_file(o.config);
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  TrainConfig cfg = TrainConfig::parse(kv);
  cfg.validate();
  return cfg;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

model::LoadedCheckpoint load_prerequisite(const fs::path& path, int stage, int needed_by,
                                          std::ostream& err) {
  if (!fs::exists(path))
    throw PrerequisiteError(fmt::format(
        "stage {} training needs the stage {} checkpoint '{}'; run train-stage{} first", needed_by,
        stage, path.string(), stage));
  auto loaded = model::load_checkpoint(path);
  for (const auto& w : loaded.warnings) fmt::print(err, "warning: {}: {}\n", path.string(), w);
  return loaded;
}

void write_run_outputs(const fs::path& dir, int stage, const TrainConfig& cfg,
                       const model::Checkpoint& ckpt, const std::string& metrics,
                       RunManifest manifest) {
  const fs::path ckpt_path = dir / WorkLayout::checkpoint(stage);
  const fs::path metrics_path = dir / WorkLayout::metrics(stage);
  const fs::path config_path = dir / WorkLayout::config(stage);
  model::save_checkpoint(ckpt, ckpt_path);
  write_text_file(metrics_path, metrics);
  write_text_file(config_path, cfg.serialize());
  manifest.seed = cfg.seed;
  manifest.config_file = config_path.filename().string();
  manifest.config_hash = cfg.hash();
  manifest.outputs["checkpoint"] = ckpt_path.string();
  manifest.outputs["metrics"] = metrics_path.string();
  write_text_file(dir / WorkLayout::manifest(stage), manifest.serialize());
}

std::string format_eval_line(const pipeline::EvalResult& r, const ClassSchema& schema,
                             const std::string& split, std::size_t scans) {
  auto fmt_opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.17g}", *v) : std::string("undefined");
  };
  std::string line = fmt::format("split={} scans={} miou_all={} miou_base={} miou_novel={}", split,
                                 scans, fmt_opt(r.miou_all), fmt_opt(r.miou_base),
                                 fmt_opt(r.miou_novel));
  for (ClassId c = 0; c < r.iou.size(); ++c)
    line += fmt::format(" iou.{}={}", schema.name(c), fmt_opt(r.iou[c]));
  return line;
}

/// Per-class table for people; the eval line follows it for scripts.
std::string format_eval_table(const pipeline::EvalResult& r, const ClassSchema& schema) {
  auto pct = [](const std::optional<double>& v) {
    return v ? fmt::format("{:>7.2f}", 100.0 * *v) : fmt::format("{:>7}", "-");
  };
  std::string t = fmt::format("{:<16} {:<6} {:>7}\n", "class", "group", "IoU %");
  for (ClassId c = 0; c < r.iou.size(); ++c)
    t += fmt::format("{:<16} {:<6} {}\n", schema.name(c), schema.is_novel(c) ? "novel" : "base",
                     pct(r.iou[c]));
  t += fmt::format("{:<16} {:<6} {}\n", "mIoU", "all", pct(r.miou_all));
  t += fmt::format("{:<16} {:<6} {}\n", "mIoU", "base", pct(r.miou_base));
  t += fmt::format("{:<16} {:<6} {}\n", "mIoU", "novel", pct(r.miou_novel));
  return t;
}

// ---- gen-data ---------------------------------------------------------------

struct GenOptions {
  CommonOptions common;
  std::size_t k = 5;
  std::size_t n_source = 200;
  std::size_t n_unlabeled = 200;
  std::size_t n_test = 100;
  std::size_t points = 1000;
};

int cmd_gen_data(const GenOptions& o, std::ostream& out) {
  const auto t0 = Clock::now();
  const std::uint64_t seed = o.common.seed.value_or(0);
  auto good = synth::SceneGenParams::good_weather();
  auto adverse = synth::SceneGenParams::adverse_weather();
  good.points_per_scan = adverse.points_per_scan = o.points;
  const ClassSchema schema = ClassSchema::default_schema();

  synth::GeneratedData data;
  data.split = synth::gen_split(good, adverse, o.n_source, o.n_unlabeled, o.k, seed);
  data.test_adverse = synth::gen_test_set(adverse, o.n_test, seed, true);
  data.test_source = synth::gen_test_set(good, o.n_test, seed, false);
  const fs::path root = o.common.out;
  synth::write_dataset(root, data, schema,
                       fmt::format("seed = {}\npoints_per_scan = {}\n", seed, o.points));

  RunManifest m;
  m.command = "gen-data";
  m.seed = seed;
  m.flags = {{"k", std::to_string(o.k)},
             {"n_source", std::to_string(o.n_source)},
             {"n_unlabeled", std::to_string(o.n_unlabeled)},
             {"n_test", std::to_string(o.n_test)},
             {"points", std::to_string(o.points)}};
  // Paths relative to the dataset root and no timings, so reruns give
  // byte-identical trees.
  m.outputs["dataset"] = synth::DataLayout::kManifest;
  const fs::path manifest_path = root / "run_manifest.txt";
  write_text_file(manifest_path, m.serialize());
  fmt::print(out, "{}\n", manifest_path.string());
  fmt::print(out, "generated in {:.2f} s\n", seconds_since(t0));
  return kExitOk;
}

// ---- training ---------------------------------------------------------------

struct TrainOptions {
  CommonOptions common;
  std::string data;
  std::string stage0;
  std::string stage1;
  bool ablate_fss_only = false;
};

fs::path or_default(const std::string& given, const fs::path& dir, const std::string& name) {
  return given.empty() ? dir / name : fs::path(given);
}

pipeline::TrainHooks progress_hooks(std::ostream& out) {
  pipeline::TrainHooks hooks;
  hooks.on_evaluation = [&out](const pipeline::EvalRecord& r) {
    fmt::print(out, "{}\n", pipeline::format_record(r));
  };
  return hooks;
}

int cmd_train(int stage, const TrainOptions& o, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = resolve_config(o.common);
  const fs::path dir = o.common.out;
  const fs::path data = o.data;
  RunManifest m;
  m.command = fmt::format("train-stage{}", stage);
  m.inputs["data"] = data.string();
  if (!fs::exists(data / synth::DataLayout::kManifest))
    throw DataError(fmt::format("'{}' is not a dataset directory (no {})", data.string(),
                                synth::DataLayout::kManifest));
  const ClassSchema schema = synth::read_dataset_schema(data);

  const auto t0 = Clock::now();
  model::Checkpoint ckpt;
  std::string metrics;
  if (stage == 0) {
    const auto source = synth::read_labeled_split(data, synth::DataLayout::kSource, schema);
    auto result = pipeline::train_stage0(source, schema, cfg, {});
    ckpt = {result.final_model, schema, cfg.stage0_epochs, cfg.hash()};
    const auto eval = pipeline::evaluate(result.final_model, source, schema, cfg.features,
                                         cfg.absent_classes);
    pipeline::EvalRecord rec{0, cfg.stage0_epochs, eval.miou_all, eval.miou_base, eval.miou_novel,
                             true, eval.miou_all.value_or(0.0), false};
    metrics = pipeline::format_record(rec) + "\n";
    fmt::print(out, "{}", metrics);
  } else {
    const fs::path p0 = or_default(o.stage0, dir, WorkLayout::checkpoint(0));
    const auto phi0 = load_prerequisite(p0, 0, stage, err).checkpoint;
    m.inputs["stage0"] = p0.string();
    const auto shots = synth::read_labeled_split(data, synth::DataLayout::kTargetLabeled, schema);
    const auto unlabeled = synth::read_unlabeled_split(data, synth::DataLayout::kTargetUnlabeled);
    pipeline::StageResult result;
    if (stage == 1) {
      if (o.ablate_fss_only) cfg.gamma = kUnreachableGamma;
      m.flags["ablate_fss_only"] = o.ablate_fss_only ? "true" : "false";
      result = pipeline::train_stage1(phi0.model, shots, unlabeled, schema, cfg, progress_hooks(out));
    } else {
      const fs::path p1 = or_default(o.stage1, dir, WorkLayout::checkpoint(1));
      const auto phi1 = load_prerequisite(p1, 1, stage, err).checkpoint;
      m.inputs["stage1"] = p1.string();
      const auto source = synth::read_labeled_split(data, synth::DataLayout::kSource, schema);
      result = pipeline::train_stage2(phi0.model, phi1.model, shots, unlabeled, source, schema, cfg,
                                      progress_hooks(out));
    }
    ckpt = {*result.best.model, schema, result.best.epoch, cfg.hash()};
    metrics = pipeline::format_log(result.log);
  }
  m.timings.emplace_back(fmt::format("stage{}", stage), seconds_since(t0));
  write_run_outputs(dir, stage, cfg, ckpt, metrics, std::move(m));
  fmt::print(out, "{}\n", (dir / WorkLayout::manifest(stage)).string());
  return kExitOk;
}

// ---- eval / pseudo-label / mix ---------------------------------------------

struct EvalOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string data;
  std::string split = synth::DataLayout::kTestAdverse;
};

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(o.common);
  const auto loaded = model::load_checkpoint(o.checkpoint);
  for (const auto& w : loaded.warnings) fmt::print(err, "warning: {}\n", w);
  const ClassSchema& schema = loaded.checkpoint.schema;
  const auto scans = synth::read_labeled_split(o.data, o.split, schema);
  if (scans.empty())
    throw DataError(fmt::format("split '{}' under '{}' has no scans", o.split, o.data));
  const auto r = pipeline::evaluate(loaded.checkpoint.model, scans, schema, cfg.features,
                                    cfg.absent_classes);
  const std::string line = format_eval_line(r, schema, o.split, scans.size());
  fmt::print(out, "{}{}\n", format_eval_table(r, schema), line);
  if (!o.common.out.empty()) {
    const fs::path dir = o.common.out;
    write_text_file(dir / "eval.txt", line + "\n");
    RunManifest m;
    m.command = "eval";
    m.seed = cfg.seed;
    m.inputs = {{"checkpoint", o.checkpoint}, {"data", o.data}, {"split", o.split}};
    m.outputs["metrics"] = (dir / "eval.txt").string();
    write_text_file(dir / "eval_manifest.txt", m.serialize());
  }
  return kExitOk;
}

struct PseudoLabelOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string scan;
  std::string output;
};

int cmd_pseudo_label(const PseudoLabelOptions& o, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(o.common);
  const auto loaded = model::load_checkpoint(o.checkpoint);
  for (const auto& w : loaded.warnings) fmt::print(err, "warning: {}\n", w);
  const ClassSchema& schema = loaded.checkpoint.schema;
  if (loaded.checkpoint.model.output_dim() != schema.num_classes())
    throw ArgumentError("pseudo-labeling needs a model covering every schema class (stage 1 or 2)");
  const PointCloud cloud = pcio::read_scan(o.scan);
  LabelVec labels = pipeline::generate_pseudo_labels(loaded.checkpoint.model, cloud, cfg.features);
  for (auto& l : labels) l = schema.to_raw(l);
  fs::path dest = o.output;
  if (dest.empty()) {
    if (o.common.out.empty()) throw ArgumentError("pseudo-label needs --output or --out");
    dest = fs::path(o.common.out) / fs::path(o.scan).filename().replace_extension(".label");
  }
  pcio::write_labels(labels, dest);
  fmt::print(out, "{} points={}\n", dest.string(), labels.size());
  return kExitOk;
}

struct MixOptions {
  CommonOptions common;
  std::string scan_a, labels_a, scan_b, labels_b;
  std::string data;
  double theta = 0.0;
  double start = 0.0;
};

int cmd_mix(const MixOptions& o, std::ostream& out) {
  const ClassSchema schema =
      o.data.empty() ? ClassSchema::default_schema() : synth::read_dataset_schema(o.data);
  if (!(o.theta > 0.0 && o.theta < geom::kTwoPi))
    throw ArgumentError(fmt::format("--theta {} outside the open interval (0, 2*pi)", o.theta));
  const auto a = pcio::read_labeled_scan(o.scan_a, o.labels_a, schema);
  const auto b = pcio::read_labeled_scan(o.scan_b, o.labels_b, schema);
  const auto mixed = augment::polar_mix_tracked(a, b, o.theta, o.start);
  const fs::path dir = o.common.out;
  LabelVec raw = mixed.scan.labels;
  for (auto& l : raw) l = schema.to_raw(l);
  pcio::write_scan(mixed.scan.cloud, dir / "mixed.bin");
  pcio::write_labels(raw, dir / "mixed.label");
  const auto from_a = static_cast<std::size_t>(std::count(mixed.origin.begin(), mixed.origin.end(), 0));
  fmt::print(out, "{} points={} from_a={} from_b={}\n", (dir / "mixed.bin").string(),
             mixed.scan.labels.size(), from_a, mixed.scan.labels.size() - from_a);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"awseg: label-efficient LiDAR segmentation in adverse weather", "awseg"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic dataset tree");
  add_common(gen_cmd, gen.common, true);
  gen_cmd->add_option("--k", gen.k, "labeled adverse scans (shots)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--n-source", gen.n_source, "good-weather labeled scans");
  gen_cmd->add_option("--n-unlabeled", gen.n_unlabeled, "unlabeled adverse scans");
  gen_cmd->add_option("--n-test", gen.n_test, "scans per held-out test split");
  gen_cmd->add_option("--points", gen.points, "points per scan")->check(CLI::PositiveNumber);

  TrainOptions train[3];
  CLI::App* train_cmd[3];
  for (int s = 0; s < 3; ++s) {
    train_cmd[s] = app.add_subcommand(fmt::format("train-stage{}", s), fmt::format("train stage {}", s));
    add_common(train_cmd[s], train[s].common, true);
    train_cmd[s]->add_option("--data", train[s].data, "dataset directory from gen-data")->required();
    if (s >= 1)
      train_cmd[s]->add_option("--stage0", train[s].stage0, "stage 0 checkpoint (default: <out>/stage0.ckpt)");
    if (s == 2)
      train_cmd[s]->add_option("--stage1", train[s].stage1, "stage 1 best checkpoint (default: <out>/stage1_best.ckpt)");
  }
  train_cmd[1]->add_flag("--ablate-fss-only", train[1].ablate_fss_only,
                         "disable the SSL term (gamma set unreachable)");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a labeled split");
  add_common(eval_cmd, ev.common, false);
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "split name (default test_adverse)");

  PseudoLabelOptions pl;
  auto* pl_cmd = app.add_subcommand("pseudo-label", "write argmax labels for one scan");
  add_common(pl_cmd, pl.common, false);
  pl_cmd->add_option("--checkpoint", pl.checkpoint)->required();
  pl_cmd->add_option("--scan", pl.scan, "scan file (.bin)")->required();
  pl_cmd->add_option("--output", pl.output, "label file to write");

  MixOptions mx;
  auto* mix_cmd = app.add_subcommand("mix", "polar-mix two labeled scans");
  add_common(mix_cmd, mx.common, true);
  mix_cmd->add_option("--scan-a", mx.scan_a)->required();
  mix_cmd->add_option("--labels-a", mx.labels_a)->required();
  mix_cmd->add_option("--scan-b", mx.scan_b)->required();
  mix_cmd->add_option("--labels-b", mx.labels_b)->required();
  mix_cmd->add_option("--theta", mx.theta, "sector width in radians, 0 < theta < 2*pi")->required();
  mix_cmd->add_option("--start", mx.start, "sector start angle in radians");
  mix_cmd->add_option("--data", mx.data, "dataset directory supplying the class schema");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    for (int s = 0; s < 3; ++s)
      if (train_cmd[s]->parsed()) return cmd_train(s, train[s], out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, out, err);
    if (pl_cmd->parsed()) return cmd_pseudo_label(pl, out, err);
    if (mix_cmd->parsed()) return cmd_mix(mx, out);
  } catch (const ArgumentError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const PrerequisiteError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitPrerequisite;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace awseg::cli
