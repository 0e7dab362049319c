#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace salsanet::nn {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Dense row-major float32 array.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors; rank must be 4.
  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  Tensor reshaped(Shape shape) const;
  void fill(float value);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Throws kShape naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// TNSR: "TNSR", u32 rank, rank x u64 extents, row-major f32 data; all little-endian.
std::vector<std::byte> encode_tnsr(const Tensor& t);
Tensor decode_tnsr(std::span<const std::byte> bytes);
// Decodes one blob from the front of `bytes` and reports how many bytes it used.
Tensor decode_tnsr_prefix(std::span<const std::byte> bytes, std::size_t& consumed);
void save_tnsr(const Tensor& t, const std::filesystem::path& path);
Tensor load_tnsr(const std::filesystem::path& path);

}  // namespace salsanet::nn
