#pragma once
// Naive double-precision layers used as oracles and for finite differences.
// `Sig` collects the discrete choices a forward pass makes (leaky ReLU signs, pool winners)
// so a caller can tell when a perturbation crossed a kink.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "salsanet/layers.hpp"
#include "salsanet/network.hpp"

namespace ref {

using Sig = std::vector<std::uint32_t>;

struct DT {
  std::vector<std::size_t> s;
  std::vector<double> v;

  DT() = default;
  explicit DT(std::vector<std::size_t> shape, double fill = 0.0) : s(std::move(shape)) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    v.assign(n, fill);
  }
  std::size_t size() const { return v.size(); }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return v[((n * s[1] + c) * s[2] + h) * s[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return v[((n * s[1] + c) * s[2] + h) * s[3] + w];
  }
};

inline DT from(const salsanet::nn::Tensor& t) {
  DT d(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) d.v[i] = t[i];
  return d;
}

inline salsanet::nn::Tensor to_tensor(const DT& d) {
  salsanet::nn::Tensor t(d.s);
  for (std::size_t i = 0; i < d.size(); ++i) t[i] = static_cast<float>(d.v[i]);
  return t;
}

inline DT conv(const DT& x, const DT& w, const DT& b, int stride, int pad) {
  const std::size_t N = x.s[0], C = x.s[1], H = x.s[2], W = x.s[3];
  const std::size_t K = w.s[0], kh = w.s[2], kw = w.s[3];
  const std::size_t OH = (H + 2 * pad - kh) / stride + 1, OW = (W + 2 * pad - kw) / stride + 1;
  DT y({N, K, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double acc = b.v[k];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long ih = static_cast<long>(oh * stride + i) - pad;
                const long iw = static_cast<long>(ow * stride + j) - pad;
                if (ih < 0 || iw < 0 || ih >= static_cast<long>(H) || iw >= static_cast<long>(W)) continue;
                acc += w.at(k, c, i, j) * x.at(n, c, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw));
              }
          y.at(n, k, oh, ow) = acc;
        }
  return y;
}

// weight [C, K, 2, 2]
inline DT deconv(const DT& x, const DT& w, const DT& b) {
  const std::size_t N = x.s[0], C = x.s[1], H = x.s[2], W = x.s[3], K = w.s[1];
  DT y({N, K, 2 * H, 2 * W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t oh = 0; oh < 2 * H; ++oh)
        for (std::size_t ow = 0; ow < 2 * W; ++ow) {
          double acc = b.v[k];
          for (std::size_t c = 0; c < C; ++c) acc += x.at(n, c, oh / 2, ow / 2) * w.at(c, k, oh % 2, ow % 2);
          y.at(n, k, oh, ow) = acc;
        }
  return y;
}

inline DT batch_norm(const DT& x, const DT& gamma, const DT& beta, double eps) {
  const std::size_t N = x.s[0], C = x.s[1], H = x.s[2], W = x.s[3];
  const double m = static_cast<double>(N * H * W);
  DT y(x.s);
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) mean += x.at(n, c, h, w);
    mean /= m;
    double var = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) var += (x.at(n, c, h, w) - mean) * (x.at(n, c, h, w) - mean);
    var /= m;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) y.at(n, c, h, w) = gamma.v[c] * (x.at(n, c, h, w) - mean) * inv + beta.v[c];
  }
  return y;
}

inline DT lrelu(const DT& x, double slope, Sig* sig) {
  DT y(x.s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool pos = x.v[i] > 0.0;
    y.v[i] = pos ? x.v[i] : slope * x.v[i];
    if (sig) sig->push_back(pos);
  }
  return y;
}

inline DT maxpool(const DT& x, Sig* sig) {
  const std::size_t N = x.s[0], C = x.s[1], H = x.s[2] / 2, W = x.s[3] / 2;
  DT y({N, C, H, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
          double best = x.at(n, c, 2 * h, 2 * w);
          std::uint32_t arg = 0;
          for (std::uint32_t k = 1; k < 4; ++k) {
            const double v = x.at(n, c, 2 * h + k / 2, 2 * w + k % 2);
            if (v > best) {
              best = v;
              arg = k;
            }
          }
          y.at(n, c, h, w) = best;
          if (sig) sig->push_back(arg);
        }
  return y;
}

inline DT add(DT a, const DT& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.v[i] += b.v[i];
  return a;
}

inline DT mul(DT a, const DT& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.v[i] *= b.v[i];
  return a;
}

// Mean over pixels of -alpha[c] * log softmax(logits)[c].
inline double weighted_ce(const DT& logits, const std::vector<int>& labels, const std::vector<double>& alpha) {
  const std::size_t N = logits.s[0], K = logits.s[1], H = logits.s[2], W = logits.s[3];
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        double mx = -1e300;
        for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, logits.at(n, k, h, w));
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(logits.at(n, k, h, w) - mx);
        const int c = labels[(n * H + h) * W + w];
        total += alpha[static_cast<std::size_t>(c)] * -(logits.at(n, static_cast<std::size_t>(c), h, w) - mx - std::log(z));
      }
  return total / static_cast<double>(N * H * W);
}

inline double dot(const DT& a, const DT& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

// Double mirrors of the network modules. Parameters are listed in the same order as
// SalsaNet::parameters() so a flat index addresses both.
struct ConvBnAct {
  DT w, b, g, beta;
  int pad = 1;
  bool act = true;

  ConvBnAct() = default;
  ConvBnAct(const salsanet::nn::ConvBnAct& l, bool activate)
      : w(from(l.weight.value)),
        b(from(l.bias.value)),
        g(from(l.gamma.value)),
        beta(from(l.beta.value)),
        pad(static_cast<int>(l.weight.value.dim(2) / 2)),
        act(activate) {}

  DT operator()(const DT& x, const salsanet::nn::ArchSpec& a, Sig* sig) const {
    DT y = batch_norm(conv(x, w, b, 1, pad), g, beta, static_cast<double>(a.bn_eps));
    return act ? lrelu(y, static_cast<double>(a.leaky_slope), sig) : y;
  }
  void params(std::vector<DT*>& out) { out.insert(out.end(), {&w, &b, &g, &beta}); }
};

struct ResNetBlock {
  ConvBnAct first, second;
  std::vector<ConvBnAct> shortcut;

  ResNetBlock() = default;
  explicit ResNetBlock(const salsanet::nn::ResNetBlock& b) : first(b.first, true), second(b.second, false) {
    for (const auto& p : b.shortcut_) shortcut.emplace_back(p, false);
  }
  DT operator()(const DT& x, const salsanet::nn::ArchSpec& a, Sig* sig) const {
    DT s = second(first(x, a, sig), a, sig);
    s = add(std::move(s), shortcut.empty() ? x : shortcut[0](x, a, sig));
    return lrelu(s, static_cast<double>(a.leaky_slope), sig);
  }
  void params(std::vector<DT*>& out) {
    first.params(out);
    second.params(out);
    for (auto& p : shortcut) p.params(out);
  }
};

struct DecoderStage {
  DT up_w, up_b;
  ConvBnAct first, second;

  DecoderStage() = default;
  explicit DecoderStage(const salsanet::nn::DecoderStage& d)
      : up_w(from(d.up_weight.value)), up_b(from(d.up_bias.value)), first(d.first, true), second(d.second, true) {}
  DT operator()(const DT& x, const DT& skip, const salsanet::nn::ArchSpec& a, Sig* sig) const {
    return second(first(add(deconv(x, up_w, up_b), skip), a, sig), a, sig);
  }
  void params(std::vector<DT*>& out) {
    out.insert(out.end(), {&up_w, &up_b});
    first.params(out);
    second.params(out);
  }
};

// Train-mode forward without dropout.
struct SalsaNet {
  salsanet::nn::ArchSpec arch;
  std::vector<ResNetBlock> enc;
  std::vector<DecoderStage> dec;
  DT head_w, head_b;

  explicit SalsaNet(const salsanet::nn::SalsaNet& net)
      : arch(net.arch()), head_w(from(net.head_weight.value)), head_b(from(net.head_bias.value)) {
    for (const auto& b : net.encoder) enc.emplace_back(b);
    for (const auto& d : net.decoder) dec.emplace_back(d);
  }
  DT operator()(const DT& input, Sig* sig) const {
    std::vector<DT> skips;
    DT x = input;
    for (std::size_t i = 0; i < 4; ++i) {
      skips.push_back(enc[i](x, arch, sig));
      x = maxpool(skips.back(), sig);
    }
    x = enc[4](x, arch, sig);
    for (std::size_t j = 0; j < 4; ++j) x = dec[j](x, skips[3 - j], arch, sig);
    return conv(x, head_w, head_b, 1, 0);
  }
  std::vector<DT*> params() {
    std::vector<DT*> out;
    for (auto& b : enc) b.params(out);
    for (auto& d : dec) d.params(out);
    out.insert(out.end(), {&head_w, &head_b});
    return out;
  }
};

inline DT random_dt(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  DT d(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : d.v) x = static_cast<double>(static_cast<float>(u(rng)));
  return d;
}

// Relative error with a floor on the scale so near-zero gradients compare absolutely.
inline constexpr double kGradFloor = 1e-2;
inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradFloor});
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a kink
  double max_forward = 0.0;  // library forward vs reference, absolute
};

inline void check_forward(const salsanet::nn::Tensor& lib, const DT& expected, GradCheck& out) {
  for (std::size_t i = 0; i < expected.size(); ++i) {
    out.max_forward = std::max(out.max_forward, std::abs(static_cast<double>(lib[i]) - expected.v[i]));
  }
}

// Central differences of f at the coordinates of `x` listed in `indices` (all when empty),
// compared with `analytic`. f may record discrete choices into its Sig argument.
inline void check_coordinates(DT& x, const salsanet::nn::Tensor& analytic,
                              const std::function<double(Sig*)>& f, GradCheck& out, double h = 1e-3,
                              std::vector<std::size_t> indices = {}) {
  if (indices.empty()) {
    indices.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) indices[i] = i;
  }
  for (std::size_t i : indices) {
    const double orig = x.v[i];
    Sig sp, sm;
    x.v[i] = orig + h;
    const double fp = f(&sp);
    x.v[i] = orig - h;
    const double fm = f(&sm);
    x.v[i] = orig;
    if (sp != sm) {
      ++out.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    out.max_rel = std::max(out.max_rel, rel_error(static_cast<double>(analytic[i]), numeric));
    ++out.checked;
  }
}

}  // namespace ref
