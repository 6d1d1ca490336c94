#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pctlab/numerics.hpp"

namespace pctlab {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct MlpArch {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
  Activation activation = Activation::relu;

  void validate() const;
  /// Compact tag such as "relu-2-32x32-3".
  [[nodiscard]] std::string tag() const;

  friend bool operator==(const MlpArch&, const MlpArch&) = default;
};

/// One affine layer: out = W * in + b, with W stored (out x in).
struct DenseLayer {
  Matrix weight;
  Vec bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpModel {
  MlpArch arch;
  std::vector<DenseLayer> layers;
  std::uint64_t init_seed = 0;

  [[nodiscard]] std::size_t parameter_count() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Gradients and momentum buffers share the parameter layout.
struct ParamBuffers {
  std::vector<DenseLayer> layers;

  static ParamBuffers zeros_like(const MlpModel& model);
};

/// Per-layer inputs (activations[0] is the batch) and pre-activations.
struct ForwardCache {
  std::vector<Matrix> activations;
  std::vector<Matrix> pre_activations;
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

/// He-scaled Gaussian weights for relu, Xavier-scaled for tanh; zero biases.
MlpModel init_mlp(const MlpArch& arch, std::uint64_t seed);

ForwardResult forward(const MlpModel& model, const Matrix& batch);
/// Forward pass without keeping the cache.
Matrix forward_logits(const MlpModel& model, const Matrix& batch);

/// Gradients of a loss whose logit gradient is `dlogits`, summed over the batch.
ParamBuffers backward(const MlpModel& model, const ForwardCache& cache, const Matrix& dlogits);

/// Classical momentum: v = momentum * v + (g + weight_decay * theta); theta -= lr * v.
void sgd_momentum_step(MlpModel& model, const ParamBuffers& grads, ParamBuffers& velocity,
                       double lr, double momentum, double weight_decay = 0.0);

struct Predictions {
  Matrix logits;
  std::vector<int> labels;
};

/// Logits and argmax predictions; ties go to the lowest class index.
Predictions predict_logits(const MlpModel& model, const Matrix& features);

/// FNV-1a over the raw bit patterns of every parameter, in layer order.
std::uint64_t parameter_hash(const MlpModel& model);

/// Anything that can produce reference logits for a batch of samples.
class LogitSource {
 public:
  virtual ~LogitSource() = default;
  [[nodiscard]] virtual int num_classes() const = 0;
  /// `ids` identifies the rows of `batch` for sources backed by a cache.
  [[nodiscard]] virtual Matrix logits(const Matrix& batch,
                                      std::span<const std::int64_t> ids) const = 0;
};

/// Serves a single frozen model as a logit source.
class ModelSource final : public LogitSource {
 public:
  explicit ModelSource(const MlpModel& model) : model_(&model) {}
  [[nodiscard]] int num_classes() const override { return model_->arch.output_dim; }
  [[nodiscard]] Matrix logits(const Matrix& batch,
                              std::span<const std::int64_t> ids) const override;

 private:
  const MlpModel* model_;
};

struct Checkpoint {
  MlpModel model;
  std::string config_hash;
};

/// Structured text: header, arch, seed, per-layer arrays at 17 significant
/// digits, and a trailing checksum line over everything above it.
std::string serialize_checkpoint(const MlpModel& model, const std::string& config_hash = "-");
/// Throws IntegrityError (mentioning `source`) on checksum or format problems.
Checkpoint parse_checkpoint(const std::string& text, const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model,
                     const std::string& config_hash = "-");
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pctlab
