#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "salsanet/tensor.hpp"

// Stateless forward/backward kernels on NCHW tensors.
namespace salsanet::nn {

enum class Mode { kTrain, kInfer };

using Rng = std::mt19937_64;

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

// input [N,C,H,W], weight [K,C,kh,kw], bias [K] -> [N,K,H',W'] (cross-correlation).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad);
Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight, int stride,
                            int pad);

// Kernel 2, stride 2 upsampling. input [N,C,H,W], weight [C,K,2,2], bias [K] -> [N,K,2H,2W].
Tensor transposed_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);
Conv2dGrads transposed_conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight);

inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.99f;

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  static BatchNormParams identity(std::size_t channels);
};

struct BatchNormCache {
  Tensor normalized;           // x-hat
  std::vector<float> inv_std;  // per channel
};

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

// Train: batch statistics, running stats updated as r = momentum * r + (1 - momentum) * batch.
// Infer: running statistics. `cache` may be null.
Tensor batch_norm(const Tensor& input, BatchNormParams& params, Mode mode,
                  float momentum = kBatchNormMomentum, float eps = kBatchNormEps,
                  BatchNormCache* cache = nullptr);
Tensor batch_norm_infer(const Tensor& input, const BatchNormParams& params, float eps = kBatchNormEps);
BatchNormGrads batch_norm_backward(const Tensor& grad_out, const BatchNormCache& cache, const Tensor& gamma);

inline constexpr float kLeakySlope = 0.1f;

Tensor leaky_relu(const Tensor& input, float slope = kLeakySlope);
Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& input, float slope = kLeakySlope);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// 2x2 max pooling, stride 2. Ties route to the first element in row-major block order.
PoolResult max_pool2(const Tensor& input);
Tensor max_pool2_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                          const Shape& input_shape);

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 0 or 1/(1-p); empty in Infer mode
};

// Inverted dropout. Throws kInvalidArgument unless 0 <= p < 1.
DropoutResult dropout(const Tensor& input, float p, Rng& rng, Mode mode);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

// Per-pixel softmax over the channel axis of [N,K,H,W].
Tensor softmax_channels(const Tensor& logits);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& acc, const Tensor& b);

}  // namespace salsanet::nn
