#include "salsanet/network.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include <json.hpp>

#include "salsanet/endian.hpp"
#include "salsanet/error.hpp"
#include "salsanet/io.hpp"

namespace salsanet::nn {

namespace {

void accumulate(Tensor& acc, const Tensor& delta) { add_inplace(acc, delta); }

void fill_gaussian(Tensor& t, double fan_in, Rng& rng) {
  std::normal_distribution<float> normal(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
  for (float& v : t.values()) v = normal(rng);
}

}  // namespace

ConvBnAct::ConvBnAct(std::size_t in, std::size_t out, std::size_t kernel, bool activate)
    : weight({out, in, kernel, kernel}),
      bias({out}),
      gamma({out}),
      beta({out}),
      running_mean({out}, 0.0f),
      running_var({out}, 1.0f),
      pad_(static_cast<int>(kernel / 2)),
      activate_(activate) {
  gamma.value.fill(1.0f);
}

BatchNormParams ConvBnAct::bn_view() const { return {gamma.value, beta.value, running_mean, running_var}; }

void ConvBnAct::store_running(const BatchNormParams& bn) {
  running_mean = bn.running_mean;
  running_var = bn.running_var;
}

Tensor ConvBnAct::infer(const Tensor& x, const ArchSpec& arch) const {
  Tensor y = batch_norm_infer(conv2d(x, weight.value, bias.value, 1, pad_), bn_view(), arch.bn_eps);
  return activate_ ? leaky_relu(y, arch.leaky_slope) : y;
}

Tensor ConvBnAct::train(const Tensor& x, const ArchSpec& arch, Cache& cache) {
  cache.input = x;
  BatchNormParams bn = bn_view();
  Tensor y = batch_norm(conv2d(x, weight.value, bias.value, 1, pad_), bn, Mode::kTrain, arch.bn_momentum,
                        arch.bn_eps, &cache.bn);
  store_running(bn);
  if (!activate_) return y;
  cache.pre_activation = y;
  return leaky_relu(y, arch.leaky_slope);
}

Tensor ConvBnAct::backward(const Tensor& grad_out, const ArchSpec& arch, const Cache& cache) {
  const Tensor g = activate_ ? leaky_relu_backward(grad_out, cache.pre_activation, arch.leaky_slope) : grad_out;
  BatchNormGrads bn = batch_norm_backward(g, cache.bn, gamma.value);
  accumulate(gamma.grad, bn.gamma);
  accumulate(beta.grad, bn.beta);
  Conv2dGrads conv = conv2d_backward(bn.input, cache.input, weight.value, 1, pad_);
  accumulate(weight.grad, conv.weight);
  accumulate(bias.grad, conv.bias);
  return std::move(conv.input);
}

ResNetBlock::ResNetBlock(std::size_t in, std::size_t out) : first(in, out, 3, true), second(out, out, 3, false) {
  if (in != out) shortcut_.emplace_back(in, out, 1, false);
}

Tensor ResNetBlock::infer(const Tensor& x, const ArchSpec& arch) const {
  Tensor sum = second.infer(first.infer(x, arch), arch);
  add_inplace(sum, has_projection() ? shortcut_[0].infer(x, arch) : x);
  return leaky_relu(sum, arch.leaky_slope);
}

Tensor ResNetBlock::train(const Tensor& x, const ArchSpec& arch, Cache& cache) {
  Tensor sum = second.train(first.train(x, arch, cache.first), arch, cache.second);
  add_inplace(sum, has_projection() ? shortcut_[0].train(x, arch, cache.shortcut) : x);
  cache.sum = sum;
  return leaky_relu(sum, arch.leaky_slope);
}

Tensor ResNetBlock::backward(const Tensor& grad_out, const ArchSpec& arch, const Cache& cache) {
  const Tensor g = leaky_relu_backward(grad_out, cache.sum, arch.leaky_slope);
  Tensor grad_in = first.backward(second.backward(g, arch, cache.second), arch, cache.first);
  add_inplace(grad_in, has_projection() ? shortcut_[0].backward(g, arch, cache.shortcut) : g);
  return grad_in;
}

DecoderStage::DecoderStage(std::size_t in, std::size_t out)
    : up_weight({in, out, 2, 2}), up_bias({out}), first(out, out, 3, true), second(out, out, 3, true) {}

Tensor DecoderStage::infer(const Tensor& x, const Tensor& skip, const ArchSpec& arch) const {
  Tensor up = transposed_conv2d(x, up_weight.value, up_bias.value);
  add_inplace(up, skip);
  return second.infer(first.infer(up, arch), arch);
}

Tensor DecoderStage::train(const Tensor& x, const Tensor& skip, const ArchSpec& arch, Cache& cache) {
  cache.input = x;
  Tensor up = transposed_conv2d(x, up_weight.value, up_bias.value);
  add_inplace(up, skip);
  return second.train(first.train(up, arch, cache.first), arch, cache.second);
}

Tensor DecoderStage::backward(const Tensor& grad_out, const ArchSpec& arch, const Cache& cache, Tensor& grad_skip) {
  grad_skip = first.backward(second.backward(grad_out, arch, cache.second), arch, cache.first);
  Conv2dGrads up = transposed_conv2d_backward(grad_skip, cache.input, up_weight.value);
  accumulate(up_weight.grad, up.weight);
  accumulate(up_bias.grad, up.bias);
  return std::move(up.input);
}

SalsaNet::SalsaNet(const ArchSpec& arch, std::uint64_t seed)
    : encoder{ResNetBlock(arch.in_channels, arch.encoder_channels[0]),
              ResNetBlock(arch.encoder_channels[0], arch.encoder_channels[1]),
              ResNetBlock(arch.encoder_channels[1], arch.encoder_channels[2]),
              ResNetBlock(arch.encoder_channels[2], arch.encoder_channels[3]),
              ResNetBlock(arch.encoder_channels[3], arch.encoder_channels[4])},
      decoder{DecoderStage(arch.encoder_channels[4], arch.encoder_channels[3]),
              DecoderStage(arch.encoder_channels[3], arch.encoder_channels[2]),
              DecoderStage(arch.encoder_channels[2], arch.encoder_channels[1]),
              DecoderStage(arch.encoder_channels[1], arch.encoder_channels[0])},
      head_weight({arch.num_classes, arch.encoder_channels[0], 1, 1}),
      head_bias({arch.num_classes}),
      arch_(arch) {
  if (!(arch.dropout >= 0.0f && arch.dropout < 1.0f)) {
    throw Error(ErrorCode::kInvalidArgument, "dropout probability must lie in [0, 1)");
  }
  Rng rng(seed);
  auto init_conv = [&rng](ConvBnAct& layer) {
    const Shape& s = layer.weight.value.shape();
    fill_gaussian(layer.weight.value, static_cast<double>(s[1] * s[2] * s[3]), rng);
  };
  for (ResNetBlock& block : encoder) {
    init_conv(block.first);
    init_conv(block.second);
    for (ConvBnAct& proj : block.shortcut_) init_conv(proj);
  }
  for (DecoderStage& stage : decoder) {
    // Each upsampled pixel receives exactly one tap from every input channel.
    fill_gaussian(stage.up_weight.value, static_cast<double>(stage.up_weight.value.dim(0)), rng);
    init_conv(stage.first);
    init_conv(stage.second);
  }
  fill_gaussian(head_weight.value, static_cast<double>(head_weight.value.dim(1)), rng);
}

void SalsaNet::set_dropout(float p) {
  if (!(p >= 0.0f && p < 1.0f)) throw Error(ErrorCode::kInvalidArgument, "dropout probability must lie in [0, 1)");
  arch_.dropout = p;
}

void SalsaNet::check_input(const Tensor& batch) const {
  if (batch.rank() != 4 || batch.dim(0) == 0 || batch.dim(1) != arch_.in_channels ||
      batch.dim(2) == 0 || batch.dim(3) == 0 || batch.dim(2) % kDownsampleFactor != 0 ||
      batch.dim(3) % kDownsampleFactor != 0) {
    throw Error(ErrorCode::kShape, "network input must be [N," + std::to_string(arch_.in_channels) +
                                       ",H,W] with H and W divisible by 16, got " + to_string(batch.shape()));
  }
}

Tensor SalsaNet::infer(const Tensor& batch, ActivationTrace* trace) const {
  check_input(batch);
  std::array<Tensor, 4> skips;
  Tensor x = batch;
  for (std::size_t i = 0; i < 4; ++i) {
    skips[i] = encoder[i].infer(x, arch_);
    if (trace) trace->encoder.push_back(skips[i].shape());
    x = max_pool2(skips[i]).output;
  }
  x = encoder[4].infer(x, arch_);
  if (trace) {
    trace->encoder.push_back(x.shape());
    trace->bottleneck = x.shape();
  }
  for (std::size_t j = 0; j < 4; ++j) {
    x = decoder[j].infer(x, skips[3 - j], arch_);
    if (trace) trace->decoder.push_back(x.shape());
  }
  Tensor logits = conv2d(x, head_weight.value, head_bias.value, 1, 0);
  if (trace) trace->logits = logits.shape();
  return logits;
}

Tensor SalsaNet::train_forward(const Tensor& batch, Rng& rng, Cache& cache, ActivationTrace* trace) {
  check_input(batch);
  std::array<Tensor, 4> skips;
  Tensor x = batch;
  for (std::size_t i = 0; i < 4; ++i) {
    skips[i] = encoder[i].train(x, arch_, cache.encoder[i]);
    if (trace) trace->encoder.push_back(skips[i].shape());
    DropoutResult dropped = dropout(skips[i], arch_.dropout, rng, Mode::kTrain);
    cache.dropout_masks[i] = std::move(dropped.mask);
    cache.pool_input_shapes[i] = dropped.output.shape();
    PoolResult pooled = max_pool2(dropped.output);
    cache.pool_argmax[i] = std::move(pooled.argmax);
    x = std::move(pooled.output);
  }
  x = encoder[4].train(x, arch_, cache.encoder[4]);
  if (trace) {
    trace->encoder.push_back(x.shape());
    trace->bottleneck = x.shape();
  }
  for (std::size_t j = 0; j < 4; ++j) {
    x = decoder[j].train(x, skips[3 - j], arch_, cache.decoder[j]);
    if (trace) trace->decoder.push_back(x.shape());
  }
  cache.head_input = x;
  Tensor logits = conv2d(x, head_weight.value, head_bias.value, 1, 0);
  if (trace) trace->logits = logits.shape();
  return logits;
}

void SalsaNet::backward(const Tensor& grad_logits, const Cache& cache) {
  Conv2dGrads head = conv2d_backward(grad_logits, cache.head_input, head_weight.value, 1, 0);
  accumulate(head_weight.grad, head.weight);
  accumulate(head_bias.grad, head.bias);
  Tensor g = std::move(head.input);
  std::array<Tensor, 4> skip_grads;
  for (std::size_t j = 4; j-- > 0;) {
    g = decoder[j].backward(g, arch_, cache.decoder[j], skip_grads[3 - j]);
  }
  g = encoder[4].backward(g, arch_, cache.encoder[4]);
  for (std::size_t i = 4; i-- > 0;) {
    Tensor pooled = max_pool2_backward(g, cache.pool_argmax[i], cache.pool_input_shapes[i]);
    Tensor block_grad = dropout_backward(pooled, cache.dropout_masks[i]);
    add_inplace(block_grad, skip_grads[i]);
    g = encoder[i].backward(block_grad, arch_, cache.encoder[i]);
  }
}

Tensor SalsaNet::forward(const Tensor& batch, Mode mode, Rng& rng) {
  if (mode == Mode::kInfer) return infer(batch);
  Cache cache;
  return train_forward(batch, rng, cache);
}

void SalsaNet::zero_grad() {
  for (Parameter* p : parameters()) p->grad.fill(0.0f);
}

std::vector<Parameter*> SalsaNet::parameters() {
  std::vector<Parameter*> out;
  auto conv = [&out](ConvBnAct& l) {
    out.insert(out.end(), {&l.weight, &l.bias, &l.gamma, &l.beta});
  };
  for (ResNetBlock& b : encoder) {
    conv(b.first);
    conv(b.second);
    for (ConvBnAct& p : b.shortcut_) conv(p);
  }
  for (DecoderStage& s : decoder) {
    out.insert(out.end(), {&s.up_weight, &s.up_bias});
    conv(s.first);
    conv(s.second);
  }
  out.insert(out.end(), {&head_weight, &head_bias});
  return out;
}

std::size_t SalsaNet::parameter_count() const {
  std::size_t total = 0;
  for (Parameter* p : const_cast<SalsaNet*>(this)->parameters()) total += p->value.size();
  return total;
}

std::vector<NamedTensor> SalsaNet::state() {
  std::vector<NamedTensor> out;
  auto conv = [&out](const std::string& prefix, ConvBnAct& l) {
    out.push_back({prefix + ".weight", &l.weight.value});
    out.push_back({prefix + ".bias", &l.bias.value});
    out.push_back({prefix + ".bn.gamma", &l.gamma.value});
    out.push_back({prefix + ".bn.beta", &l.beta.value});
    out.push_back({prefix + ".bn.running_mean", &l.running_mean});
    out.push_back({prefix + ".bn.running_var", &l.running_var});
  };
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i);
    conv(prefix + ".conv1", encoder[i].first);
    conv(prefix + ".conv2", encoder[i].second);
    for (ConvBnAct& p : encoder[i].shortcut_) conv(prefix + ".shortcut", p);
  }
  for (std::size_t j = 0; j < decoder.size(); ++j) {
    const std::string prefix = "decoder." + std::to_string(j);
    out.push_back({prefix + ".up.weight", &decoder[j].up_weight.value});
    out.push_back({prefix + ".up.bias", &decoder[j].up_bias.value});
    conv(prefix + ".conv1", decoder[j].first);
    conv(prefix + ".conv2", decoder[j].second);
  }
  out.push_back({"head.weight", &head_weight.value});
  out.push_back({"head.bias", &head_bias.value});
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json arch_to_json(const ArchSpec& a) {
  return {{"in_channels", a.in_channels},
          {"num_classes", a.num_classes},
          {"encoder_channels", a.encoder_channels},
          {"leaky_slope", a.leaky_slope},
          {"bn_momentum", a.bn_momentum},
          {"bn_eps", a.bn_eps},
          {"dropout", a.dropout}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  a.in_channels = j.at("in_channels").get<std::size_t>();
  a.num_classes = j.at("num_classes").get<std::size_t>();
  a.encoder_channels = j.at("encoder_channels").get<std::array<std::size_t, 5>>();
  a.leaky_slope = j.at("leaky_slope").get<float>();
  a.bn_momentum = j.at("bn_momentum").get<float>();
  a.bn_eps = j.at("bn_eps").get<float>();
  a.dropout = j.at("dropout").get<float>();
  return a;
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::kCorruptData, "checkpoint: " + what); }

}  // namespace

Checkpoint make_checkpoint(SalsaNet& net, std::uint64_t iteration, std::string input_spec) {
  Checkpoint ckpt{net.arch(), iteration, std::move(input_spec), {}};
  for (const NamedTensor& t : net.state()) ckpt.tensors.emplace_back(t.name, *t.tensor);
  return ckpt;
}

SalsaNet restore_network(const Checkpoint& checkpoint) {
  SalsaNet net(checkpoint.arch, 0);
  auto state = net.state();
  if (state.size() != checkpoint.tensors.size()) {
    corrupt("expected " + std::to_string(state.size()) + " tensors, found " + std::to_string(checkpoint.tensors.size()));
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& [name, tensor] = checkpoint.tensors[i];
    if (name != state[i].name) corrupt("tensor " + std::to_string(i) + " is '" + name + "', expected '" + state[i].name + "'");
    if (tensor.shape() != state[i].tensor->shape()) {
      corrupt(name + " has shape " + to_string(tensor.shape()) + ", expected " + to_string(state[i].tensor->shape()));
    }
    *state[i].tensor = tensor;
  }
  return net;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::json header = {{"format", "salsanet-checkpoint"},
                           {"arch", arch_to_json(checkpoint.arch)},
                           {"iteration", checkpoint.iteration},
                           {"input", checkpoint.input_spec.empty() ? nlohmann::json::object()
                                                                   : nlohmann::json::parse(checkpoint.input_spec)}};
  const std::string text = header.dump();
  std::vector<std::byte> out;
  for (char c : kCheckpointMagic) out.push_back(static_cast<std::byte>(c));
  le::append_uint<std::uint32_t>(out, kCheckpointVersion);
  le::append_uint<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  le::append_uint<std::uint64_t>(out, checkpoint.tensors.size());
  for (const auto& [name, tensor] : checkpoint.tensors) {
    le::append_uint<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    for (char c : name) out.push_back(static_cast<std::byte>(c));
    const auto blob = encode_tnsr(tensor);
    le::append_uint<std::uint64_t>(out, blob.size());
    out.insert(out.end(), blob.begin(), blob.end());
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  std::size_t off = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - off < n) corrupt(std::string("truncated ") + what);
  };
  need(12, "header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) corrupt("bad magic");
  const auto version = le::load_uint<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) corrupt("unsupported version " + std::to_string(version));
  const auto header_len = le::load_uint<std::uint32_t>(bytes, 8);
  off = 12;
  need(header_len, "header");
  const std::string text(reinterpret_cast<const char*>(bytes.data()) + off, header_len);
  off += header_len;

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("format") != "salsanet-checkpoint") corrupt("unknown format tag");
    ckpt.arch = arch_from_json(header.at("arch"));
    ckpt.iteration = header.at("iteration").get<std::uint64_t>();
    const auto& input = header.at("input");
    ckpt.input_spec = input.empty() ? std::string() : input.dump();
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("bad header: ") + e.what());
  }

  need(8, "record count");
  const auto records = le::load_uint<std::uint64_t>(bytes, off);
  off += 8;
  for (std::uint64_t r = 0; r < records; ++r) {
    need(4, "record");
    const auto name_len = le::load_uint<std::uint32_t>(bytes, off);
    off += 4;
    need(name_len, "record name");
    std::string name(reinterpret_cast<const char*>(bytes.data()) + off, name_len);
    off += name_len;
    need(8, "record");
    const auto blob_len = le::load_uint<std::uint64_t>(bytes, off);
    off += 8;
    need(blob_len, "tensor blob");
    ckpt.tensors.emplace_back(std::move(name), decode_tnsr(bytes.subspan(off, blob_len)));
    off += blob_len;
  }
  if (off != bytes.size()) corrupt("trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(io::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptData) throw Error(e.code(), path.string() + ": " + e.what());
    throw;
  }
}

}  // namespace salsanet::nn
