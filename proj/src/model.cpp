#include "awseg/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "awseg/errors.hpp"
#include "awseg/keyvalue.hpp"
#include "awseg/pcio.hpp"
#include "awseg/rng.hpp"

namespace awseg::model {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void hash_doubles(std::uint64_t& h, std::span<const double> values) {
  for (double v : values) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= kFnvPrime;
  }
}

}  // namespace

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.data().size() + l.bias.size();
  return n;
}

bool Model::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.all_finite()) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

std::uint64_t Model::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& l : layers) {
    h ^= l.weight.rows() * 131 + l.weight.cols();
    h *= kFnvPrime;
    hash_doubles(h, l.weight.data());
    hash_doubles(h, l.bias);
  }
  hash_doubles(h, norm.mean);
  hash_doubles(h, norm.stddev);
  return h;
}

Model init_model(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t out_classes,
                 std::uint64_t seed) {
  if (input_dim == 0 || out_classes == 0) throw ArgumentError("model dimensions must be positive");
  Rng rng(derive_seed(seed, kStreamInit));
  Model m;
  std::size_t in = input_dim;
  std::vector<std::size_t> widths(hidden.begin(), hidden.end());
  widths.push_back(out_classes);
  for (std::size_t out : widths) {
    if (out == 0) throw ArgumentError("hidden layer width must be positive");
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : layer.weight.data()) w = uniform(rng, -bound, bound);
    m.layers.push_back(std::move(layer));
    in = out;
  }
  m.norm.mean.assign(input_dim, 0.0);
  m.norm.stddev.assign(input_dim, 1.0);
  return m;
}

NormStats compute_norm_stats(std::span<const Matrix> feature_sets) {
  std::size_t dim = 0, count = 0;
  for (const auto& f : feature_sets) {
    if (f.rows() == 0) continue;
    if (dim == 0) dim = f.cols();
    if (f.cols() != dim) throw ArgumentError("feature sets disagree on dimension");
    count += f.rows();
  }
  if (count == 0) throw ArgumentError("cannot compute normalization from zero rows");
  NormStats s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& f : feature_sets)
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t d = 0; d < dim; ++d) s.mean[d] += f(i, d);
  for (auto& v : s.mean) v /= static_cast<double>(count);
  for (const auto& f : feature_sets)
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = f(i, d) - s.mean[d];
        s.stddev[d] += c * c;
      }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(count));
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

namespace {

// out = in * W^T + b, optionally followed by ReLU.
Matrix dense(const Matrix& in, const DenseLayer& layer, bool relu) {
  const std::size_t n = in.rows(), din = in.cols(), dout = layer.weight.rows();
  Matrix out(n, dout);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = in.row(r).data();
    double* y = out.row(r).data();
    for (std::size_t o = 0; o < dout; ++o) {
      const double* w = layer.weight.row(o).data();
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < din; ++i) acc += w[i] * x[i];
      y[o] = relu && acc < 0.0 ? 0.0 : acc;
    }
  }
  return out;
}

}  // namespace

Matrix forward(const Model& model, const Matrix& features, ForwardCache* cache) {
  if (model.layers.empty()) throw ArgumentError("model has no layers");
  if (features.cols() != model.input_dim())
    throw ArgumentError(fmt::format("model expects {} features, got {}", model.input_dim(), features.cols()));
  Matrix x(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (std::size_t d = 0; d < features.cols(); ++d)
      x(r, d) = (features(r, d) - model.norm.mean[d]) / model.norm.stddev[d];

  if (cache) {
    cache->inputs.clear();
    cache->model_fingerprint = model.fingerprint();
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const bool last = l + 1 == model.layers.size();
    Matrix y = dense(x, model.layers[l], !last);
    if (cache) cache->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  for (const auto& l : model.layers)
    g.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
  return g;
}

void accumulate(Gradients& acc, const Gradients& g, double scale) {
  if (acc.size() != g.size()) throw ArgumentError("gradient layer counts differ");
  for (std::size_t l = 0; l < g.size(); ++l) {
    auto& aw = acc[l].weight.data();
    const auto& gw = g[l].weight.data();
    if (aw.size() != gw.size() || acc[l].bias.size() != g[l].bias.size())
      throw ArgumentError("gradient shapes differ");
    for (std::size_t i = 0; i < aw.size(); ++i) aw[i] += scale * gw[i];
    for (std::size_t i = 0; i < g[l].bias.size(); ++i) acc[l].bias[i] += scale * g[l].bias[i];
  }
}

Gradients backward(const Model& model, const ForwardCache& cache, const Matrix& grad_logits,
                   const Matrix* grad_embedding) {
  if (cache.inputs.size() != model.layers.size() || cache.model_fingerprint != model.fingerprint())
    throw ArgumentError("forward cache does not belong to this model state");
  const std::size_t n = cache.inputs.front().rows();
  if (grad_logits.rows() != n || grad_logits.cols() != model.output_dim())
    throw ArgumentError("grad_logits shape does not match the forward pass");
  if (grad_embedding &&
      (grad_embedding->rows() != n || grad_embedding->cols() != cache.embedding().cols()))
    throw ArgumentError("grad_embedding shape does not match the embedding");

  Gradients grads = zero_gradients(model);
  Matrix g_out = grad_logits;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const DenseLayer& layer = model.layers[l];
    const Matrix& in = cache.inputs[l];
    const std::size_t din = in.cols(), dout = layer.weight.rows();
    const bool need_input_grad = l > 0;
    Matrix g_in(need_input_grad ? n : 0, din);
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = in.row(r).data();
      for (std::size_t o = 0; o < dout; ++o) {
        const double g = g_out(r, o);
        if (g == 0.0) continue;
        grads[l].bias[o] += g;
        double* dw = grads[l].weight.row(o).data();
        for (std::size_t i = 0; i < din; ++i) dw[i] += g * x[i];
        if (need_input_grad) {
          const double* w = layer.weight.row(o).data();
          double* gi = g_in.row(r).data();
          for (std::size_t i = 0; i < din; ++i) gi[i] += g * w[i];
        }
      }
    }
    if (!need_input_grad) break;
    if (grad_embedding && l + 1 == model.layers.size())
      for (std::size_t i = 0; i < g_in.data().size(); ++i) g_in.data()[i] += grad_embedding->data()[i];
    // in = relu(pre): pass gradient only where the unit was active.
    for (std::size_t i = 0; i < g_in.data().size(); ++i)
      if (!(in.data()[i] > 0.0)) g_in.data()[i] = 0.0;
    g_out = std::move(g_in);
  }
  return grads;
}

void sgd_step(Model& model, const Gradients& grads, OptimizerState& opt) {
  if (grads.size() != model.layers.size()) throw ArgumentError("gradient layer count mismatch");
  if (opt.velocity.empty()) opt.velocity = zero_gradients(model);
  if (opt.velocity.size() != model.layers.size()) throw ArgumentError("optimizer state shape mismatch");
  auto step = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& v) {
    if (w.size() != g.size() || w.size() != v.size()) throw ArgumentError("parameter shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = opt.momentum * v[i] + (g[i] + opt.weight_decay * w[i]);
      w[i] -= opt.learning_rate * v[i];
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    step(model.layers[l].weight.data(), grads[l].weight.data(), opt.velocity[l].weight.data());
    step(model.layers[l].bias, grads[l].bias, opt.velocity[l].bias);
  }
}

Model extend_classifier(const Model& model, std::size_t extra, std::uint64_t seed, double init_scale) {
  if (extra < 1) throw ArgumentError("extend_classifier needs extra >= 1");
  if (model.layers.empty()) throw ArgumentError("model has no layers");
  Model out = model;
  DenseLayer& head = out.layers.back();
  const std::size_t rows = head.weight.rows(), cols = head.weight.cols();
  Matrix w(rows + extra, cols);
  std::copy(head.weight.data().begin(), head.weight.data().end(), w.data().begin());
  Rng rng(derive_seed(seed, kStreamHeadExtension));
  for (std::size_t r = rows; r < rows + extra; ++r)
    for (auto& v : w.row(r)) v = uniform(rng, -init_scale, init_scale);
  head.weight = std::move(w);
  head.bias.resize(rows + extra, 0.0);
  return out;
}

namespace {

constexpr char kMagic[8] = {'A', 'W', 'S', 'E', 'G', 'C', 'K', 'P'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size() * 8); }
  std::vector<std::byte>& out() { return out_; }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    if (in_.size() - pos_ < n)
      throw FormatError(fmt::format("checkpoint truncated at byte offset {}", pos_));
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  std::vector<double> f64s(std::size_t n) {
    if ((in_.size() - pos_) / 8 < n)
      throw FormatError(fmt::format("checkpoint truncated at byte offset {}", pos_));
    std::vector<double> v(n);
    bytes(v.data(), n * 8);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

std::uint64_t checksum(std::span<const std::byte> bytes) {
  std::uint64_t h = kFnvOffset;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  const std::string schema = ckpt.schema.serialize();
  w.u32(static_cast<std::uint32_t>(schema.size()));
  w.bytes(schema.data(), schema.size());
  w.u64(ckpt.epoch);
  w.u64(ckpt.config_hash);
  const auto& norm = ckpt.model.norm;
  w.u32(static_cast<std::uint32_t>(norm.mean.size()));
  w.f64s(norm.mean);
  w.f64s(norm.stddev);
  w.u32(static_cast<std::uint32_t>(ckpt.model.layers.size()));
  for (const auto& l : ckpt.model.layers) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
    w.f64s(l.weight.data());
    w.f64s(l.bias);
  }
  w.u64(checksum(w.out()));
  return std::move(w.out());
}

LoadedCheckpoint deserialize_checkpoint(std::span<const std::byte> bytes,
                                        std::optional<std::uint64_t> expected_config_hash) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(fmt::format("checkpoint version {} unsupported (expected {})", version,
                                  kCheckpointVersion));
  if (bytes.size() < 8) throw FormatError("checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 8);

  LoadedCheckpoint out;
  Checkpoint& c = out.checkpoint;
  const std::uint32_t schema_len = r.u32();
  if (schema_len > bytes.size()) throw FormatError("checkpoint schema block length is corrupt");
  std::string schema(schema_len, '\0');
  r.bytes(schema.data(), schema_len);
  c.epoch = r.u64();
  c.config_hash = r.u64();
  const std::uint32_t dim = r.u32();
  c.model.norm.mean = r.f64s(dim);
  c.model.norm.stddev = r.f64s(dim);
  const std::uint32_t n_layers = r.u32();
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t rows = r.u32(), cols = r.u32();
    DenseLayer layer{Matrix(0, 0), {}};
    auto w = r.f64s(static_cast<std::size_t>(rows) * cols);
    layer.weight = Matrix(rows, cols);
    layer.weight.data() = std::move(w);
    layer.bias = r.f64s(rows);
    c.model.layers.push_back(std::move(layer));
  }
  if (r.pos() != body.size()) throw FormatError("checkpoint has trailing or missing bytes");
  if (checksum(body) != stored) throw FormatError("checkpoint checksum mismatch");
  try {
    c.schema = ClassSchema::parse(parse_key_values(schema));
  } catch (const std::exception& e) {
    throw FormatError(fmt::format("checkpoint schema block: {}", e.what()));
  }
  for (std::size_t l = 1; l < c.model.layers.size(); ++l)
    if (c.model.layers[l].weight.cols() != c.model.layers[l - 1].weight.rows())
      throw FormatError("checkpoint layer shapes do not compose");
  if (!c.model.layers.empty() && c.model.input_dim() != dim)
    throw FormatError("checkpoint normalization does not match the input layer");
  if (expected_config_hash && *expected_config_hash != c.config_hash)
    out.warnings.push_back(fmt::format("checkpoint config hash {:016x} differs from current config {:016x}",
                                       c.config_hash, *expected_config_hash));
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  pcio::write_file(path, serialize_checkpoint(ckpt));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> expected_config_hash) {
  try {
    return deserialize_checkpoint(pcio::read_file(path), expected_config_hash);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace awseg::model
