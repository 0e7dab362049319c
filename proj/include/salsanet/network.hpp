#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "salsanet/layers.hpp"

namespace salsanet::nn {

struct Parameter {
  Tensor value;
  Tensor grad;

  explicit Parameter(Shape shape = {}) : value(shape), grad(shape) {}
};

struct ArchSpec {
  std::size_t in_channels = 4;
  std::size_t num_classes = 3;
  std::array<std::size_t, 5> encoder_channels = {32, 64, 128, 256, 256};
  float leaky_slope = kLeakySlope;
  float bn_momentum = kBatchNormMomentum;
  float bn_eps = kBatchNormEps;
  float dropout = 0.5f;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Total spatial downsampling of the encoder (four 2x2 pools).
inline constexpr std::size_t kDownsampleFactor = 16;

// conv -> batch norm -> optional leaky ReLU
class ConvBnAct {
 public:
  ConvBnAct(std::size_t in, std::size_t out, std::size_t kernel, bool activate);

  struct Cache {
    Tensor input;
    BatchNormCache bn;
    Tensor pre_activation;
  };

  Tensor infer(const Tensor& x, const ArchSpec& arch) const;
  Tensor train(const Tensor& x, const ArchSpec& arch, Cache& cache);
  Tensor backward(const Tensor& grad_out, const ArchSpec& arch, const Cache& cache);

  Parameter weight;
  Parameter bias;
  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;

 private:
  BatchNormParams bn_view() const;
  void store_running(const BatchNormParams& bn);

  int pad_;
  bool activate_;
};

// Residual unit: two 3x3 conv-bn stages, identity or 1x1 conv-bn shortcut, activation after the sum.
class ResNetBlock {
 public:
  ResNetBlock(std::size_t in, std::size_t out);

  struct Cache {
    ConvBnAct::Cache first;
    ConvBnAct::Cache second;
    ConvBnAct::Cache shortcut;
    Tensor sum;
  };

  Tensor infer(const Tensor& x, const ArchSpec& arch) const;
  Tensor train(const Tensor& x, const ArchSpec& arch, Cache& cache);
  Tensor backward(const Tensor& grad_out, const ArchSpec& arch, const Cache& cache);

  bool has_projection() const { return !shortcut_.empty(); }

  ConvBnAct first;
  ConvBnAct second;
  std::vector<ConvBnAct> shortcut_;  // empty or one projection
};

// Transposed conv upsampling, skip addition, then two 3x3 conv-bn-act layers.
class DecoderStage {
 public:
  DecoderStage(std::size_t in, std::size_t out);

  struct Cache {
    Tensor input;
    ConvBnAct::Cache first;
    ConvBnAct::Cache second;
  };

  Tensor infer(const Tensor& x, const Tensor& skip, const ArchSpec& arch) const;
  Tensor train(const Tensor& x, const Tensor& skip, const ArchSpec& arch, Cache& cache);
  // Returns the gradient for the upsampled input; the skip gradient is written to `grad_skip`.
  Tensor backward(const Tensor& grad_out, const ArchSpec& arch, const Cache& cache, Tensor& grad_skip);

  Parameter up_weight;  // [in, out, 2, 2]
  Parameter up_bias;
  ConvBnAct first;
  ConvBnAct second;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ActivationTrace {
  std::vector<Shape> encoder;  // pre-pool block outputs
  Shape bottleneck;
  std::vector<Shape> decoder;  // per stage outputs
  Shape logits;
};

class SalsaNet {
 public:
  SalsaNet(const ArchSpec& arch, std::uint64_t seed);

  struct Cache {
    std::array<ResNetBlock::Cache, 5> encoder;
    std::array<Tensor, 4> dropout_masks;
    std::array<std::vector<std::uint32_t>, 4> pool_argmax;
    std::array<Shape, 4> pool_input_shapes;
    std::array<DecoderStage::Cache, 4> decoder;
    Tensor head_input;
  };

  const ArchSpec& arch() const { return arch_; }
  void set_dropout(float p);

  // Throws kShape unless input is [N, in_channels, H, W] with H, W divisible by 16.
  void check_input(const Tensor& batch) const;

  // Deterministic forward with running batch-norm statistics.
  Tensor infer(const Tensor& batch, ActivationTrace* trace = nullptr) const;
  // Forward with batch statistics and dropout; updates running statistics.
  Tensor train_forward(const Tensor& batch, Rng& rng, Cache& cache, ActivationTrace* trace = nullptr);
  // Accumulates parameter gradients for `grad_logits`.
  void backward(const Tensor& grad_logits, const Cache& cache);
  Tensor forward(const Tensor& batch, Mode mode, Rng& rng);

  void zero_grad();
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  // Every tensor that makes up the model state (parameters and running statistics), in a fixed order.
  std::vector<NamedTensor> state();

  std::array<ResNetBlock, 5> encoder;
  std::array<DecoderStage, 4> decoder;
  Parameter head_weight;  // [classes, 32, 1, 1]
  Parameter head_bias;

 private:
  ArchSpec arch_;
};

// Checkpoint container: magic "SNCK", u32 version, u32 header length, UTF-8 JSON header,
// u64 record count, then per record u32 name length, name, u64 blob length, TNSR blob.
struct Checkpoint {
  ArchSpec arch;
  std::uint64_t iteration = 0;
  std::string input_spec;  // JSON describing the grid the model was trained on
  std::vector<std::pair<std::string, Tensor>> tensors;
};

Checkpoint make_checkpoint(SalsaNet& net, std::uint64_t iteration, std::string input_spec);
// Copies checkpoint tensors into a network built from the checkpoint's arch.
SalsaNet restore_network(const Checkpoint& checkpoint);

std::vector<std::byte> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace salsanet::nn
