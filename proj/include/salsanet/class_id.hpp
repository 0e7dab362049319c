#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace salsanet {

enum class ClassId : std::uint8_t {
  kBackground = 0,
  kRoad = 1,
  kVehicle = 2,
};

inline constexpr std::size_t kNumClasses = 3;

inline constexpr std::array<ClassId, kNumClasses> kAllClasses = {
    ClassId::kBackground, ClassId::kRoad, ClassId::kVehicle};

constexpr bool is_valid_class(std::uint8_t raw) { return raw < kNumClasses; }

constexpr std::size_t index_of(ClassId c) { return static_cast<std::size_t>(c); }

const char* class_name(ClassId c) noexcept;

}  // namespace salsanet
