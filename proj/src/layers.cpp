#include "salsanet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gemm.hpp"
#include "salsanet/error.hpp"

namespace salsanet::nn {

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t k, kh, kw;
  std::size_t oh, ow;
  std::size_t stride, pad;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return oh * ow; }
};

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShape,
              op + ": incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
}

void require_rank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    throw Error(ErrorCode::kShape, std::string(op) + ": expected a rank-4 tensor, got " + to_string(t.shape()));
  }
}

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, int stride, int pad) {
  require_rank4(input, "conv2d");
  if (weight.rank() != 4 || weight.dim(1) != input.dim(1)) shape_error("conv2d", input, weight);
  if (stride < 1 || pad < 0) throw Error(ErrorCode::kInvalidArgument, "conv2d: stride >= 1 and pad >= 0 required");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.k = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = static_cast<std::size_t>(stride);
  g.pad = static_cast<std::size_t>(pad);
  const std::size_t span_h = g.h + 2 * g.pad;
  const std::size_t span_w = g.w + 2 * g.pad;
  if (span_h < g.kh || span_w < g.kw || (span_h - g.kh) % g.stride != 0 || (span_w - g.kw) % g.stride != 0) {
    shape_error("conv2d", input, weight);
  }
  g.oh = (span_h - g.kh) / g.stride + 1;
  g.ow = (span_w - g.kw) / g.stride + 1;
  return g;
}

bool is_pointwise(const ConvGeometry& g) { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0; }

// col[(c*kh + i)*kw + j][oy*ow + ox] = x[c][oy*s + i - pad][ox*s + j - pad]
void im2col(const ConvGeometry& g, const float* x, float* col) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        float* dst = col + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          float* row = dst + oy * g.ow;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(row, row + g.ow, 0.0f);
            continue;
          }
          const float* src = x + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          if (g.stride == 1) {
            // contiguous run [lo, hi) of valid columns
            const auto shift = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(g.pad);
            const auto ow = static_cast<std::ptrdiff_t>(g.ow);
            const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, ow);
            const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.w) - shift, lo, ow);
            std::fill(row, row + lo, 0.0f);
            std::copy(src + lo + shift, src + hi + shift, row + lo);
            std::fill(row + hi, row + ow, 0.0f);
            continue;
          }
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto xx = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            row[ox] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0f : src[xx];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const float* col, float* x) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const float* src = col + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          float* row = x + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          const float* s = src + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto xx = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(g.w)) row[xx] += s[ox];
          }
        }
      }
    }
  }
}

void check_bias(const Tensor& bias, std::size_t k, const Tensor& weight, const char* op) {
  if (bias.rank() != 1 || bias.dim(0) != k) shape_error(op, weight, bias);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
  const ConvGeometry g = conv_geometry(input, weight, stride, pad);
  check_bias(bias, g.k, weight, "conv2d");
  Tensor out({g.n, g.k, g.oh, g.ow});
  std::vector<float> col(is_pointwise(g) ? 0 : g.patch() * g.pixels());
  for (std::size_t n = 0; n < g.n; ++n) {
    const float* x = input.data() + n * g.c * g.h * g.w;
    float* y = out.data() + n * g.k * g.pixels();
    for (std::size_t k = 0; k < g.k; ++k) std::fill(y + k * g.pixels(), y + (k + 1) * g.pixels(), bias[k]);
    const float* b = x;
    if (!is_pointwise(g)) {
      im2col(g, x, col.data());
      b = col.data();
    }
    detail::gemm_accumulate(g.k, g.pixels(), g.patch(), weight.data(), b, y);
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight, int stride,
                            int pad) {
  const ConvGeometry g = conv_geometry(input, weight, stride, pad);
  if (grad_out.shape() != Shape{g.n, g.k, g.oh, g.ow}) shape_error("conv2d_backward", grad_out, input);

  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor({g.k})};
  for (std::size_t k = 0; k < g.k; ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) {
      const float* gy = grad_out.data() + (n * g.k + k) * g.pixels();
      for (std::size_t p = 0; p < g.pixels(); ++p) s += gy[p];
    }
    grads.bias[k] = static_cast<float>(s);
  }

  std::vector<float> weight_t(weight.size());
  detail::transpose(g.k, g.patch(), weight.data(), weight_t.data());
  std::vector<float> col(g.patch() * g.pixels());
  std::vector<float> col_t(g.patch() * g.pixels());
  std::vector<float> grad_col(g.patch() * g.pixels());
  for (std::size_t n = 0; n < g.n; ++n) {
    const float* x = input.data() + n * g.c * g.h * g.w;
    const float* gy = grad_out.data() + n * g.k * g.pixels();
    const float* cols = x;
    if (!is_pointwise(g)) {
      im2col(g, x, col.data());
      cols = col.data();
    }
    detail::transpose(g.patch(), g.pixels(), cols, col_t.data());
    detail::gemm_accumulate(g.k, g.patch(), g.pixels(), gy, col_t.data(), grads.weight.data());

    float* gx = grads.input.data() + n * g.c * g.h * g.w;
    if (is_pointwise(g)) {
      detail::gemm_accumulate(g.patch(), g.pixels(), g.k, weight_t.data(), gy, gx);
    } else {
      std::fill(grad_col.begin(), grad_col.end(), 0.0f);
      detail::gemm_accumulate(g.patch(), g.pixels(), g.k, weight_t.data(), gy, grad_col.data());
      col2im_add(g, grad_col.data(), gx);
    }
  }
  return grads;
}

namespace {

struct UpGeometry {
  std::size_t n, c, h, w, k;
};

UpGeometry up_geometry(const Tensor& input, const Tensor& weight) {
  require_rank4(input, "transposed_conv2d");
  if (weight.rank() != 4 || weight.dim(0) != input.dim(1) || weight.dim(2) != 2 || weight.dim(3) != 2) {
    shape_error("transposed_conv2d", input, weight);
  }
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(1)};
}

// Per kernel offset (a,b): matrix [K x C] with entries weight[c][k][a][b].
std::vector<float> tap_matrix(const Tensor& weight, std::size_t c_in, std::size_t k_out, std::size_t tap) {
  std::vector<float> m(k_out * c_in);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t k = 0; k < k_out; ++k) m[k * c_in + c] = weight[(c * k_out + k) * 4 + tap];
  }
  return m;
}

}  // namespace

Tensor transposed_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const UpGeometry g = up_geometry(input, weight);
  check_bias(bias, g.k, weight, "transposed_conv2d");
  const std::size_t oh = 2 * g.h;
  const std::size_t ow = 2 * g.w;
  const std::size_t pixels = g.h * g.w;
  Tensor out({g.n, g.k, oh, ow});
  std::vector<float> tap_out(g.k * pixels);
  for (std::size_t tap = 0; tap < 4; ++tap) {
    const auto wt = tap_matrix(weight, g.c, g.k, tap);
    const std::size_t a = tap / 2;
    const std::size_t b = tap % 2;
    for (std::size_t n = 0; n < g.n; ++n) {
      std::fill(tap_out.begin(), tap_out.end(), 0.0f);
      detail::gemm_accumulate(g.k, pixels, g.c, wt.data(), input.data() + n * g.c * pixels, tap_out.data());
      for (std::size_t k = 0; k < g.k; ++k) {
        for (std::size_t i = 0; i < g.h; ++i) {
          for (std::size_t j = 0; j < g.w; ++j) {
            out.at(n, k, 2 * i + a, 2 * j + b) = tap_out[k * pixels + i * g.w + j] + bias[k];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads transposed_conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight) {
  const UpGeometry g = up_geometry(input, weight);
  if (grad_out.shape() != Shape{g.n, g.k, 2 * g.h, 2 * g.w}) shape_error("transposed_conv2d_backward", grad_out, input);
  const std::size_t pixels = g.h * g.w;
  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor({g.k})};
  for (std::size_t k = 0; k < g.k; ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) {
      const float* gy = grad_out.data() + (n * g.k + k) * 4 * pixels;
      for (std::size_t p = 0; p < 4 * pixels; ++p) s += gy[p];
    }
    grads.bias[k] = static_cast<float>(s);
  }

  std::vector<float> tap_grad(g.k * pixels);
  std::vector<float> tap_grad_t(pixels * g.k);
  std::vector<float> input_t(pixels * g.c);
  std::vector<float> dw(g.c * g.k);
  for (std::size_t tap = 0; tap < 4; ++tap) {
    const std::size_t a = tap / 2;
    const std::size_t b = tap % 2;
    // [C x K] with entries weight[c][k][a][b]
    std::vector<float> wk(g.c * g.k);
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t k = 0; k < g.k; ++k) wk[c * g.k + k] = weight[(c * g.k + k) * 4 + tap];
    }
    std::fill(dw.begin(), dw.end(), 0.0f);
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t k = 0; k < g.k; ++k) {
        for (std::size_t i = 0; i < g.h; ++i) {
          for (std::size_t j = 0; j < g.w; ++j) {
            tap_grad[k * pixels + i * g.w + j] = grad_out.at(n, k, 2 * i + a, 2 * j + b);
          }
        }
      }
      const float* x = input.data() + n * g.c * pixels;
      detail::gemm_accumulate(g.c, pixels, g.k, wk.data(), tap_grad.data(), grads.input.data() + n * g.c * pixels);
      detail::transpose(g.k, pixels, tap_grad.data(), tap_grad_t.data());
      detail::gemm_accumulate(g.c, g.k, pixels, x, tap_grad_t.data(), dw.data());
    }
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t k = 0; k < g.k; ++k) grads.weight[(c * g.k + k) * 4 + tap] = dw[c * g.k + k];
    }
  }
  return grads;
}

BatchNormParams BatchNormParams::identity(std::size_t channels) {
  return {Tensor({channels}, 1.0f), Tensor({channels}, 0.0f), Tensor({channels}, 0.0f), Tensor({channels}, 1.0f)};
}

namespace {

void check_bn(const Tensor& input, const BatchNormParams& params) {
  require_rank4(input, "batch_norm");
  const Shape channel{input.dim(1)};
  if (params.gamma.shape() != channel || params.beta.shape() != channel || params.running_mean.shape() != channel ||
      params.running_var.shape() != channel) {
    shape_error("batch_norm", input, params.gamma);
  }
}

}  // namespace

Tensor batch_norm_infer(const Tensor& input, const BatchNormParams& params, float eps) {
  check_bn(input, params);
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor out(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float scale = params.gamma[ch] / std::sqrt(params.running_var[ch] + eps);
    const float shift = params.beta[ch] - params.running_mean[ch] * scale;
    for (std::size_t b = 0; b < n; ++b) {
      const float* x = input.data() + (b * c + ch) * hw;
      float* y = out.data() + (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) y[p] = x[p] * scale + shift;
    }
  }
  return out;
}

Tensor batch_norm(const Tensor& input, BatchNormParams& params, Mode mode, float momentum, float eps,
                  BatchNormCache* cache) {
  if (mode == Mode::kInfer) return batch_norm_infer(input, params, eps);
  check_bn(input, params);
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  const std::size_t count = n * hw;
  if (count < 2) {
    throw Error(ErrorCode::kDegenerateBatch,
                "batch_norm: training needs at least two values per channel, got shape " + to_string(input.shape()));
  }
  Tensor out(input.shape());
  Tensor normalized(input.shape());
  std::vector<float> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const float* x = input.data() + (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) sum += x[p];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const float* x = input.data() + (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const double d = x[p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[ch] = static_cast<float>(istd);
    const float gamma = params.gamma[ch];
    const float beta = params.beta[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const float* x = input.data() + (b * c + ch) * hw;
      float* xh = normalized.data() + (b * c + ch) * hw;
      float* y = out.data() + (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        xh[p] = static_cast<float>((x[p] - mean) * istd);
        y[p] = gamma * xh[p] + beta;
      }
    }
    const double unbiased = sq / static_cast<double>(count - 1);
    params.running_mean[ch] = static_cast<float>(momentum * params.running_mean[ch] + (1.0 - momentum) * mean);
    params.running_var[ch] = static_cast<float>(momentum * params.running_var[ch] + (1.0 - momentum) * unbiased);
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batch_norm_backward(const Tensor& grad_out, const BatchNormCache& cache, const Tensor& gamma) {
  require_same_shape(grad_out, cache.normalized, "batch_norm_backward");
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), hw = grad_out.dim(2) * grad_out.dim(3);
  if (gamma.shape() != Shape{c} || cache.inv_std.size() != c) shape_error("batch_norm_backward", grad_out, gamma);
  const double count = static_cast<double>(n * hw);
  BatchNormGrads grads{Tensor(grad_out.shape()), Tensor({c}), Tensor({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const float* dy = grad_out.data() + (b * c + ch) * hw;
      const float* xh = cache.normalized.data() + (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        sum_dy += dy[p];
        sum_dy_xh += static_cast<double>(dy[p]) * xh[p];
      }
    }
    grads.beta[ch] = static_cast<float>(sum_dy);
    grads.gamma[ch] = static_cast<float>(sum_dy_xh);
    const double k = gamma[ch] * static_cast<double>(cache.inv_std[ch]);
    const double mean_dy = sum_dy / count;
    const double mean_dy_xh = sum_dy_xh / count;
    for (std::size_t b = 0; b < n; ++b) {
      const float* dy = grad_out.data() + (b * c + ch) * hw;
      const float* xh = cache.normalized.data() + (b * c + ch) * hw;
      float* dx = grads.input.data() + (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        dx[p] = static_cast<float>(k * (dy[p] - mean_dy - xh[p] * mean_dy_xh));
      }
    }
  }
  return grads;
}

Tensor leaky_relu(const Tensor& input, float slope) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0f ? input[i] : slope * input[i];
  return out;
}

Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& input, float slope) {
  require_same_shape(grad_out, input, "leaky_relu_backward");
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0f ? grad_out[i] : slope * grad_out[i];
  return out;
}

PoolResult max_pool2(const Tensor& input) {
  require_rank4(input, "max_pool2");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(ErrorCode::kShape, "max_pool2: spatial extents must be even, got " + to_string(input.shape()));
  }
  PoolResult result{Tensor({n, c, h / 2, w / 2}), {}};
  result.argmax.resize(result.output.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t i = 0; i < h / 2; ++i) {
      for (std::size_t j = 0; j < w / 2; ++j, ++o) {
        std::size_t best = base + (2 * i) * w + 2 * j;
        for (std::size_t idx : {base + (2 * i) * w + 2 * j + 1, base + (2 * i + 1) * w + 2 * j,
                                base + (2 * i + 1) * w + 2 * j + 1}) {
          if (input[idx] > input[best]) best = idx;
        }
        result.output[o] = input[best];
        result.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return result;
}

Tensor max_pool2_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax, const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw Error(ErrorCode::kShape, "max_pool2_backward: gradient " + to_string(grad_out.shape()) +
                                       " does not match the saved argmax");
  }
  Tensor grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) grad[argmax[o]] += grad_out[o];
  return grad;
}

DropoutResult dropout(const Tensor& input, float p, Rng& rng, Mode mode) {
  if (!(p >= 0.0f && p < 1.0f)) {
    throw Error(ErrorCode::kInvalidArgument, "dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::kInfer || p == 0.0f) return {input, Tensor()};
  const float keep_scale = 1.0f / (1.0f - p);
  Tensor mask(input.shape());
  Tensor out(input.shape());
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  for (std::size_t i = 0; i < input.size(); ++i) {
    mask[i] = uniform(rng) < p ? 0.0f : keep_scale;
    out[i] = input[i] * mask[i];
  }
  return {std::move(out), std::move(mask)};
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
  if (mask.size() == 0) return grad_out;
  require_same_shape(grad_out, mask, "dropout_backward");
  Tensor out(grad_out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_out[i] * mask[i];
  return out;
}

Tensor softmax_channels(const Tensor& logits) {
  require_rank4(logits, "softmax_channels");
  const std::size_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  Tensor out(logits.shape());
  for (std::size_t b = 0; b < n; ++b) {
    const float* x = logits.data() + b * k * hw;
    float* y = out.data() + b * k * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      float peak = x[p];
      for (std::size_t ch = 1; ch < k; ++ch) peak = std::max(peak, x[ch * hw + p]);
      double total = 0.0;
      for (std::size_t ch = 0; ch < k; ++ch) total += std::exp(static_cast<double>(x[ch * hw + p] - peak));
      for (std::size_t ch = 0; ch < k; ++ch) {
        y[ch * hw + p] = static_cast<float>(std::exp(static_cast<double>(x[ch * hw + p] - peak)) / total);
      }
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& acc, const Tensor& b) {
  require_same_shape(acc, b, "add");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
}

}  // namespace salsanet::nn
