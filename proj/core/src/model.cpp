#include "pctlab/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "pctlab/errors.hpp"
#include "pctlab/rng.hpp"
#include "pctlab/text_io.hpp"

namespace pctlab {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void MlpArch::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("MlpArch: dims must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("MlpArch: hidden widths must be >= 1");
}

std::string MlpArch::tag() const {
  std::string t = to_string(activation) + "-" + std::to_string(input_dim) + "-";
  if (hidden.empty()) t += "linear";
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) t += "x";
    t += std::to_string(hidden[i]);
  }
  return t + "-" + std::to_string(output_dim);
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.data().size() + l.bias.size();
  return n;
}

ParamBuffers ParamBuffers::zeros_like(const MlpModel& model) {
  ParamBuffers p;
  for (const auto& l : model.layers)
    p.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vec(l.bias.size(), 0.0)});
  return p;
}

namespace {

std::vector<int> layer_widths(const MlpArch& arch) {
  std::vector<int> w{arch.input_dim};
  w.insert(w.end(), arch.hidden.begin(), arch.hidden.end());
  w.push_back(arch.output_dim);
  return w;
}

double activate(Activation a, double z) { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

// Derivative expressed through the pre-activation z and activation y.
double activate_grad(Activation a, double z, double y) {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

Matrix affine(const DenseLayer& layer, const Matrix& in) {
  const std::size_t out_dim = layer.weight.rows();
  const std::size_t in_dim = layer.weight.cols();
  Matrix out(in.rows(), out_dim);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const auto w = layer.weight.row(o);
      double s = 0.0;
      for (std::size_t k = 0; k < in_dim; ++k) s += w[k] * x[k];
      out(r, o) = s + layer.bias[o];
    }
  }
  return out;
}

void append_u64(std::string& bytes, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  bytes.append(buf, 8);
}

}  // namespace

MlpModel init_mlp(const MlpArch& arch, std::uint64_t seed) {
  arch.validate();
  MlpModel model;
  model.arch = arch;
  model.init_seed = seed;
  const auto widths = layer_widths(arch);
  Rng rng(seed, 0);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<std::size_t>(widths[l]);
    const auto fan_out = static_cast<std::size_t>(widths[l + 1]);
    const double std = arch.activation == Activation::relu
                           ? std::sqrt(2.0 / static_cast<double>(fan_in))
                           : std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Matrix(fan_out, fan_in), Vec(fan_out, 0.0)};
    Rng layer_rng = rng.split(l);
    for (double& w : layer.weight.data()) w = std * layer_rng.normal();
    model.layers.push_back(std::move(layer));
  }
  return model;
}

ForwardResult forward(const MlpModel& model, const Matrix& batch) {
  if (batch.cols() != static_cast<std::size_t>(model.arch.input_dim))
    throw ConfigError("forward: batch has " + std::to_string(batch.cols()) +
                      " features, model expects " + std::to_string(model.arch.input_dim));
  ForwardResult result;
  auto& cache = result.cache;
  cache.activations.push_back(batch);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Matrix z = affine(model.layers[l], cache.activations.back());
    const bool last = l + 1 == model.layers.size();
    if (last) {
      result.logits = z;
      cache.pre_activations.push_back(std::move(z));
      break;
    }
    Matrix a = z;
    for (double& v : a.data()) v = activate(model.arch.activation, v);
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  return result;
}

Matrix forward_logits(const MlpModel& model, const Matrix& batch) {
  if (batch.cols() != static_cast<std::size_t>(model.arch.input_dim))
    throw ConfigError("forward: batch dimension mismatch");
  Matrix a = batch;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Matrix z = affine(model.layers[l], a);
    if (l + 1 < model.layers.size())
      for (double& v : z.data()) v = activate(model.arch.activation, v);
    a = std::move(z);
  }
  return a;
}

ParamBuffers backward(const MlpModel& model, const ForwardCache& cache, const Matrix& dlogits) {
  const std::size_t n_layers = model.layers.size();
  if (cache.activations.size() != n_layers || cache.pre_activations.size() != n_layers)
    throw ConfigError("backward: cache does not match model depth");
  const std::size_t batch = cache.activations.front().rows();
  if (dlogits.rows() != batch || dlogits.cols() != static_cast<std::size_t>(model.arch.output_dim))
    throw ConfigError("backward: dlogits shape mismatch");

  ParamBuffers grads = ParamBuffers::zeros_like(model);
  Matrix delta = dlogits;
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& layer = model.layers[li];
    const Matrix& input = cache.activations[li];
    auto& g = grads.layers[li];
    const std::size_t out_dim = layer.weight.rows();
    const std::size_t in_dim = layer.weight.cols();
    for (std::size_t r = 0; r < batch; ++r) {
      const auto d = delta.row(r);
      const auto x = input.row(r);
      for (std::size_t o = 0; o < out_dim; ++o) {
        if (d[o] == 0.0) continue;
        auto gw = g.weight.row(o);
        for (std::size_t k = 0; k < in_dim; ++k) gw[k] += d[o] * x[k];
        g.bias[o] += d[o];
      }
    }
    if (li == 0) break;
    Matrix prev(batch, in_dim);
    const Matrix& z_prev = cache.pre_activations[li - 1];
    for (std::size_t r = 0; r < batch; ++r) {
      const auto d = delta.row(r);
      auto p = prev.row(r);
      for (std::size_t o = 0; o < out_dim; ++o) {
        if (d[o] == 0.0) continue;
        const auto w = layer.weight.row(o);
        for (std::size_t k = 0; k < in_dim; ++k) p[k] += d[o] * w[k];
      }
      for (std::size_t k = 0; k < in_dim; ++k)
        p[k] *= activate_grad(model.arch.activation, z_prev(r, k), input(r, k));
    }
    delta = std::move(prev);
  }
  return grads;
}

void sgd_momentum_step(MlpModel& model, const ParamBuffers& grads, ParamBuffers& velocity,
                       double lr, double momentum, double weight_decay) {
  if (grads.layers.size() != model.layers.size() || velocity.layers.size() != model.layers.size())
    throw ConfigError("sgd_momentum_step: buffer layout mismatch");
  auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> v) {
    if (theta.size() != g.size() || theta.size() != v.size())
      throw ConfigError("sgd_momentum_step: buffer shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double step = weight_decay == 0.0 ? g[i] : g[i] + weight_decay * theta[i];
      v[i] = momentum * v[i] + step;
      theta[i] -= lr * v[i];
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].weight.data(), grads.layers[l].weight.data(),
           velocity.layers[l].weight.data());
    update(model.layers[l].bias, grads.layers[l].bias, velocity.layers[l].bias);
  }
}

Predictions predict_logits(const MlpModel& model, const Matrix& features) {
  Predictions p;
  p.logits = forward_logits(model, features);
  p.labels.resize(p.logits.rows());
  for (std::size_t r = 0; r < p.logits.rows(); ++r)
    p.labels[r] = static_cast<int>(argmax(p.logits.row(r)));
  return p;
}

std::uint64_t parameter_hash(const MlpModel& model) {
  std::string bytes;
  for (const auto& l : model.layers) {
    for (double v : l.weight.data()) append_u64(bytes, std::bit_cast<std::uint64_t>(v));
    for (double v : l.bias) append_u64(bytes, std::bit_cast<std::uint64_t>(v));
  }
  return fnv1a64(bytes);
}

Matrix ModelSource::logits(const Matrix& batch, std::span<const std::int64_t>) const {
  return forward_logits(*model_, batch);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr const char* kCheckpointMagic = "pctlab-checkpoint 1";
}

std::string serialize_checkpoint(const MlpModel& model, const std::string& config_hash) {
  std::ostringstream out;
  out << kCheckpointMagic << '\n';
  out << "config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n';
  out << "arch.input_dim " << model.arch.input_dim << '\n';
  out << "arch.hidden ";
  if (model.arch.hidden.empty()) out << '-';
  for (std::size_t i = 0; i < model.arch.hidden.size(); ++i)
    out << (i ? "," : "") << model.arch.hidden[i];
  out << '\n';
  out << "arch.output_dim " << model.arch.output_dim << '\n';
  out << "arch.activation " << to_string(model.arch.activation) << '\n';
  out << "init_seed " << model.init_seed << '\n';
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    out << "layer " << l << " weight " << layer.weight.rows() << ' ' << layer.weight.cols() << '\n';
    for (std::size_t r = 0; r < layer.weight.rows(); ++r)
      out << join_doubles(layer.weight.row(r)) << '\n';
    out << "layer " << l << " bias " << layer.bias.size() << '\n';
    out << join_doubles(layer.bias) << '\n';
  }
  std::string body = out.str();
  body += "checksum " + hex64(fnv1a64(body)) + '\n';
  return body;
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& source) {
  auto fail = [&](const std::string& why) -> IntegrityError {
    return IntegrityError("checkpoint " + source + ": " + why);
  };
  const auto pos = text.rfind("checksum ");
  if (pos == std::string::npos || (pos > 0 && text[pos - 1] != '\n'))
    throw fail("missing checksum line");
  const std::string body = text.substr(0, pos);
  if (trim(text.substr(pos + 9)) != hex64(fnv1a64(body))) throw fail("checksum mismatch");

  std::istringstream in(body);
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw fail("truncated");
    return line;
  };
  auto field = [&](const std::string& key) -> std::string {
    const std::string l = next();
    if (l.rfind(key + " ", 0) != 0) throw fail("expected '" + key + "'");
    return l.substr(key.size() + 1);
  };
  try {
    if (next() != kCheckpointMagic) throw fail("bad header");
    Checkpoint ck;
    ck.config_hash = field("config_hash");
    auto& arch = ck.model.arch;
    arch.input_dim = static_cast<int>(parse_int(field("arch.input_dim")));
    const std::string hidden = field("arch.hidden");
    if (hidden != "-")
      for (const auto& h : split_string(hidden, ',')) arch.hidden.push_back(static_cast<int>(parse_int(h)));
    arch.output_dim = static_cast<int>(parse_int(field("arch.output_dim")));
    arch.activation = parse_activation(field("arch.activation"));
    ck.model.init_seed = static_cast<std::uint64_t>(std::stoull(field("init_seed")));
    arch.validate();

    const std::size_t n_layers = arch.hidden.size() + 1;
    std::vector<int> widths{arch.input_dim};
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(arch.output_dim);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto rows = static_cast<std::size_t>(widths[l + 1]);
      const auto cols = static_cast<std::size_t>(widths[l]);
      const std::string expect_w = "layer " + std::to_string(l) + " weight " +
                                   std::to_string(rows) + " " + std::to_string(cols);
      if (next() != expect_w) throw fail("expected '" + expect_w + "'");
      DenseLayer layer{Matrix(rows, cols), Vec(rows)};
      for (std::size_t r = 0; r < rows; ++r) {
        const auto cells = split_string(next(), ',');
        if (cells.size() != cols) throw fail("weight row has wrong length");
        for (std::size_t c = 0; c < cols; ++c) layer.weight(r, c) = parse_double(cells[c]);
      }
      const std::string expect_b = "layer " + std::to_string(l) + " bias " + std::to_string(rows);
      if (next() != expect_b) throw fail("expected '" + expect_b + "'");
      const auto cells = split_string(next(), ',');
      if (cells.size() != rows) throw fail("bias has wrong length");
      for (std::size_t r = 0; r < rows; ++r) layer.bias[r] = parse_double(cells[r]);
      ck.model.layers.push_back(std::move(layer));
    }
    if (std::getline(in, line) && !trim(line).empty()) throw fail("trailing content");
    return ck;
  } catch (const IntegrityError&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model,
                     const std::string& config_hash) {
  write_file(path, serialize_checkpoint(model, config_hash));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

}  // namespace pctlab
