#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "salsanet/geometry.hpp"
#include "salsanet/pointcloud.hpp"

namespace salsanet {

// Camera-space class mask, e.g. a road segmentation rendered to an image.
class SegMask {
 public:
  SegMask(int width, int height, std::vector<ClassId> data);

  int width() const { return width_; }
  int height() const { return height_; }
  ClassId at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(col)];
  }

 private:
  int width_;
  int height_;
  std::vector<ClassId> data_;
};

inline constexpr std::uint8_t kDefaultRoadThreshold = 128;

// 8-bit binary PGM (P5); pixels >= threshold become `positive`, others background.
SegMask read_pgm_mask(std::span<const std::byte> bytes, std::uint8_t threshold = kDefaultRoadThreshold,
                      ClassId positive = ClassId::kRoad);
SegMask read_pgm_mask_file(const std::filesystem::path& path,
                           std::uint8_t threshold = kDefaultRoadThreshold,
                           ClassId positive = ClassId::kRoad);

// Nearest-pixel lookup of each projected point; points off-image or behind the camera are background.
std::vector<ClassId> label_from_mask(const PointCloud& cloud, const CalibrationSet& calib,
                                     const SegMask& mask);

std::vector<ClassId> label_from_boxes(const PointCloud& cloud, std::span<const Box3D> boxes);

// Vehicle wins over road; road wins over background.
std::vector<ClassId> merge_labels(std::span<const ClassId> road, std::span<const ClassId> vehicle);

}  // namespace salsanet
