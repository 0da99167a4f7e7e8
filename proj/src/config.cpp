#include "awseg/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "awseg/errors.hpp"

namespace awseg {

std::string to_string(FssMethod m) {
  switch (m) {
    case FssMethod::kLwf: return "lwf";
    case FssMethod::kFssad: return "fssad";
    case FssMethod::kGfss: return "gfss";
  }
  return "?";
}

FssMethod parse_fss_method(const std::string& s) {
  if (s == "lwf") return FssMethod::kLwf;
  if (s == "fssad") return FssMethod::kFssad;
  if (s == "gfss") return FssMethod::kGfss;
  throw FormatError(fmt::format("unknown fss_method '{}' (lwf, fssad, gfss)", s));
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ArgumentError(fmt::format("invalid config: {}", what));
  };
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(omega0 >= 0.0 && omega1 >= 0.0 && omega2 >= 0.0, "loss weights must be >= 0");
  require(gamma >= 0.0, "gamma must be >= 0");
  require(selection_interval >= 1, "selection_interval must be >= 1");
  require(pseudoval_size >= 1, "pseudoval_size must be >= 1");
  require(stage0_batch_scans >= 1, "stage0_batch_scans must be >= 1");
  require(ssl_batch >= 1 && mix_batch >= 1, "ssl_batch and mix_batch must be >= 1");
  require(kd_temperature > 0.0, "kd_temperature must be > 0");
  require(sce.alpha >= 0.0 && sce.beta >= 0.0 && sce.clip_log < 0.0, "bad SCE constants");
  require(triplet.margin > 0.0 && triplet.max_anchors >= 1, "bad triplet constants");
  require(head_init_scale >= 0.0, "head_init_scale must be >= 0");
  require(features.radius > 0.0 && features.k >= 1, "bad feature parameters");
  for (auto h : hidden_dims) require(h >= 1, "hidden widths must be >= 1");
  augmentation.validate();
}

namespace {

// One entry per serialized key, in output order.
struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) { return fmt::format("{}", v); }

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError(fmt::format("config key '{}': '{}' is not a number", key, s));
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError(fmt::format("config key '{}': '{}' is not an unsigned integer", key, s));
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw FormatError(fmt::format("config key '{}': '{}' is not a boolean", key, s));
}

#define AWSEG_DOUBLE(name, member)                                             \
  Field{name, [](const TrainConfig& c) { return fmt_double(c.member); },       \
        [](TrainConfig& c, const std::string& v) { c.member = parse_double(name, v); }}
#define AWSEG_SIZE(name, member)                                                        \
  Field{name, [](const TrainConfig& c) { return fmt::format("{}", c.member); },          \
        [](TrainConfig& c, const std::string& v) {                                      \
          c.member = static_cast<decltype(c.member)>(parse_u64(name, v));               \
        }}
#define AWSEG_BOOL(name, member)                                                             \
  Field{name, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& v) { c.member = parse_bool(name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      AWSEG_DOUBLE("learning_rate", learning_rate),
      AWSEG_DOUBLE("momentum", momentum),
      AWSEG_DOUBLE("weight_decay", weight_decay),
      AWSEG_DOUBLE("omega0", omega0),
      AWSEG_DOUBLE("omega1", omega1),
      AWSEG_DOUBLE("omega2", omega2),
      AWSEG_DOUBLE("gamma", gamma),
      AWSEG_BOOL("ssl_hysteresis", ssl_hysteresis),
      AWSEG_SIZE("selection_interval", selection_interval),
      AWSEG_SIZE("pseudoval_size", pseudoval_size),
      AWSEG_SIZE("stage0_epochs", stage0_epochs),
      AWSEG_SIZE("stage0_batch_scans", stage0_batch_scans),
      AWSEG_SIZE("stage1_epochs", stage1_epochs),
      AWSEG_SIZE("stage2_epochs", stage2_epochs),
      AWSEG_SIZE("seed", seed),
      Field{"fss_method", [](const TrainConfig& c) { return to_string(c.fss_method); },
            [](TrainConfig& c, const std::string& v) { c.fss_method = parse_fss_method(v); }},
      AWSEG_DOUBLE("sce_alpha", sce.alpha),
      AWSEG_DOUBLE("sce_beta", sce.beta),
      AWSEG_DOUBLE("sce_clip_log", sce.clip_log),
      AWSEG_DOUBLE("kd_temperature", kd_temperature),
      AWSEG_DOUBLE("triplet_margin", triplet.margin),
      AWSEG_SIZE("triplet_max_anchors", triplet.max_anchors),
      AWSEG_SIZE("ssl_batch", ssl_batch),
      AWSEG_SIZE("mix_batch", mix_batch),
      Field{"hidden_dims",
            [](const TrainConfig& c) { return fmt::format("{}", fmt::join(c.hidden_dims, ",")); },
            [](TrainConfig& c, const std::string& v) {
              c.hidden_dims.clear();
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ','))
                if (!item.empty()) c.hidden_dims.push_back(parse_u64("hidden_dims", item));
            }},
      AWSEG_DOUBLE("head_init_scale", head_init_scale),
      AWSEG_DOUBLE("feature_radius", features.radius),
      AWSEG_SIZE("feature_k", features.k),
      Field{"absent_classes",
            [](const TrainConfig& c) {
              return std::string(c.absent_classes == metrics::AbsentClassPolicy::kExclude ? "exclude" : "zero");
            },
            [](TrainConfig& c, const std::string& v) {
              if (v == "exclude") c.absent_classes = metrics::AbsentClassPolicy::kExclude;
              else if (v == "zero") c.absent_classes = metrics::AbsentClassPolicy::kScoreZero;
              else throw FormatError(fmt::format("absent_classes must be exclude or zero, got '{}'", v));
            }},
      AWSEG_BOOL("aug_flip_x", augmentation.flip_x),
      AWSEG_BOOL("aug_flip_y", augmentation.flip_y),
      AWSEG_DOUBLE("aug_rotation_min", augmentation.rotation_min),
      AWSEG_DOUBLE("aug_rotation_max", augmentation.rotation_max),
      AWSEG_DOUBLE("aug_scale_min", augmentation.scale_min),
      AWSEG_DOUBLE("aug_scale_max", augmentation.scale_max),
      AWSEG_DOUBLE("aug_intensity_min", augmentation.intensity_min),
      AWSEG_DOUBLE("aug_intensity_max", augmentation.intensity_max),
      AWSEG_DOUBLE("aug_novel_jitter_std", augmentation.novel_jitter_std),
  };
  return f;
}

#undef AWSEG_DOUBLE
#undef AWSEG_SIZE
#undef AWSEG_BOOL

}  // namespace

std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(*this));
  return out;
}

TrainConfig TrainConfig::parse(const KeyValues& kv, const TrainConfig& base) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  TrainConfig c = base;
  for (const auto& [key, value] : kv) {
    auto it = by_key.find(key);
    if (it == by_key.end()) throw FormatError(fmt::format("unknown config key '{}'", key));
    it->second->set(c, value);
  }
  c.augmentation.seed = c.seed;
  c.validate();
  return c;
}

TrainConfig TrainConfig::parse(const KeyValues& kv) { return parse(kv, TrainConfig{}); }

std::uint64_t TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : serialize()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace awseg
