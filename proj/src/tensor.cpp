#include "salsanet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "salsanet/endian.hpp"
#include "salsanet/error.hpp"
#include "salsanet/io.hpp"

namespace salsanet::nn {

namespace {
constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw Error(ErrorCode::kShape, "tensor data length " + std::to_string(data_.size()) +
                                       " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw Error(ErrorCode::kShape, "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShape,
                std::string(what) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                    " differ");
  }
}

std::vector<std::byte> encode_tnsr(const Tensor& t) {
  std::vector<std::byte> out;
  out.reserve(8 + 8 * t.rank() + 4 * t.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  le::append_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) le::append_uint<std::uint64_t>(out, d);
  for (float v : t.values()) le::append_f32(out, v);
  return out;
}

Tensor decode_tnsr_prefix(std::span<const std::byte> bytes, std::size_t& consumed) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kCorruptData, "TNSR: bad magic");
  }
  const auto rank = le::load_uint<std::uint32_t>(bytes, 4);
  if (rank > 16) throw Error(ErrorCode::kCorruptData, "TNSR: implausible rank " + std::to_string(rank));
  std::size_t off = 8;
  if (bytes.size() < off + 8ull * rank) throw Error(ErrorCode::kCorruptData, "TNSR: truncated extents");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(le::load_uint<std::uint64_t>(bytes, off));
    off += 8;
    if (d != 0 && count > std::numeric_limits<std::size_t>::max() / 4 / d) {
      throw Error(ErrorCode::kCorruptData, "TNSR: extents overflow");
    }
    count *= d;
  }
  if ((bytes.size() - off) / 4 < count) throw Error(ErrorCode::kCorruptData, "TNSR: truncated data");
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i, off += 4) data[i] = le::load_f32(bytes, off);
  consumed = off;
  return Tensor(std::move(shape), std::move(data));
}

Tensor decode_tnsr(std::span<const std::byte> bytes) {
  std::size_t consumed = 0;
  Tensor t = decode_tnsr_prefix(bytes, consumed);
  if (consumed != bytes.size()) throw Error(ErrorCode::kCorruptData, "TNSR: trailing bytes");
  return t;
}

void save_tnsr(const Tensor& t, const std::filesystem::path& path) { io::write_file(path, encode_tnsr(t)); }

Tensor load_tnsr(const std::filesystem::path& path) {
  try {
    return decode_tnsr(io::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptData) throw Error(e.code(), path.string() + ": " + e.what());
    throw;
  }
}

}  // namespace salsanet::nn
