#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "salsanet/pointcloud.hpp"

namespace salsanet {

// Top-down grid. Rows follow +x from roi.x_min, columns follow +y from roi.y_min.
struct BevSpec {
  RoiSpec roi{};
  double cell_x = 0.2;
  double cell_y = 0.3;
  int rows = 256;
  int cols = 64;

  void validate() const;
};

// Elevation/azimuth panorama. Row 0 is the top of the image (zenith_max).
struct SfvSpec {
  double azimuth_fov_deg = 90.0;
  double zenith_min_deg = -24.9;
  double zenith_max_deg = 2.0;
  int rows = 64;
  int cols = 512;

  void validate() const;
  double zenith_step_rad() const;   // delta theta
  double azimuth_step_rad() const;  // delta phi
};

enum class GridKind { kBev, kSfv };

inline constexpr int kBevChannels = 4;  // mean z, max z, mean intensity, count
inline constexpr int kSfvChannels = 6;  // x, y, z, intensity, range, mask

// H x W x C raster, channel-interleaved.
class GridImage {
 public:
  GridImage() = default;
  GridImage(GridKind kind, int height, int width);
  GridImage(GridKind kind, int height, int width, std::vector<float> data);

  GridKind kind() const { return kind_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }

  float& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  float at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  friend bool operator==(const GridImage&, const GridImage&) = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(ch);
  }

  GridKind kind_ = GridKind::kBev;
  int height_ = 0;
  int width_ = 0;
  int channels_ = kBevChannels;
  std::vector<float> data_;
};

class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(int height, int width, ClassId fill = ClassId::kBackground);
  LabelGrid(int height, int width, std::vector<ClassId> data);

  int height() const { return height_; }
  int width() const { return width_; }
  ClassId& at(int row, int col) { return data_[index(row, col)]; }
  ClassId at(int row, int col) const { return data_[index(row, col)]; }
  const std::vector<ClassId>& data() const { return data_; }

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<ClassId> data_;
};

struct CellIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

// Fixed normalization ranges for BEV channels.
inline constexpr float kBevZLow = -3.0f;
inline constexpr float kBevZHigh = 3.0f;
inline constexpr float kBevCountCap = 64.0f;

// nullopt when the point falls outside the grid.
std::optional<CellIndex> bev_bin(const Point& p, const BevSpec& spec);

// Raw per-cell statistics; empty cells are all zero.
GridImage project_bev_raw(const PointCloud& cloud, const BevSpec& spec);
GridImage normalize_bev(const GridImage& raw);
GridImage project_bev(const PointCloud& cloud, const BevSpec& spec);

struct SfvAngles {
  double theta = 0.0;  // elevation, asin(z / r)
  double phi = 0.0;    // horizontal angle, asin(y / sqrt(x^2 + y^2))
};

// Throws kUndefinedAngle when x = y = 0.
SfvAngles sfv_angles(const Point& p);

// nullopt for points behind the sensor, on the z axis, or outside the field of view.
std::optional<CellIndex> sfv_bin(const Point& p, const SfvSpec& spec);

GridImage project_sfv(const PointCloud& cloud, const SfvSpec& spec);

// Majority vote per cell, ties go to the rarer class (vehicle > road > background).
LabelGrid rasterize_labels(const PointCloud& cloud, const BevSpec& spec);
LabelGrid rasterize_labels(const PointCloud& cloud, const SfvSpec& spec);

// Grayscale render of one channel. BEV channels are already in [0,1]; other
// channels are min-max scaled over occupied values.
void write_channel_pgm(const GridImage& image, int channel, const std::filesystem::path& path);
// Class-colored render: road green, vehicle red, background gray.
void write_label_ppm(const LabelGrid& labels, const std::filesystem::path& path);

}  // namespace salsanet
