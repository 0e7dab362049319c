#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Little-endian scalar packing used by the binary formats (scan, TNSR, checkpoint).
namespace salsanet::le {

template <typename U>
U load_uint(std::span<const std::byte> bytes, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(std::to_integer<std::uint8_t>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

inline float load_f32(std::span<const std::byte> bytes, std::size_t offset) {
  return std::bit_cast<float>(load_uint<std::uint32_t>(bytes, offset));
}

template <typename U>
void append_uint(std::vector<std::byte>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFFu));
  }
}

inline void append_f32(std::vector<std::byte>& out, float value) {
  append_uint(out, std::bit_cast<std::uint32_t>(value));
}

}  // namespace salsanet::le
