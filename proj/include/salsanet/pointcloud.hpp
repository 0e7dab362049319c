#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "salsanet/class_id.hpp"

namespace salsanet {

// One LiDAR return in the sensor frame: x forward, y left, z up (meters).
struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;

  friend bool operator==(const Point&, const Point&) = default;
};

// Ordered points with optional per-point labels. Immutable once built.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point> points);
  // Throws kLengthMismatch when the label count differs from the point count.
  PointCloud(std::vector<Point> points, std::vector<ClassId> labels);

  std::span<const Point> points() const { return points_; }
  std::span<const ClassId> labels() const { return labels_; }
  bool has_labels() const { return labeled_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  PointCloud with_labels(std::vector<ClassId> labels) const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point> points_;
  std::vector<ClassId> labels_;
  bool labeled_ = false;
};

// Axis-aligned crop window in the x-y plane; intervals are [min, max).
struct RoiSpec {
  double x_min = 0.0;
  double x_max = 50.0;
  double y_min = -6.0;
  double y_max = 12.0;

  void validate() const;
  bool contains(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
};

struct ScanReadResult {
  PointCloud cloud;
  std::size_t dropped_non_finite = 0;
  std::size_t clamped_intensity = 0;
};

// KITTI Velodyne layout: little-endian float32 records (x, y, z, intensity).
ScanReadResult read_kitti_scan(std::span<const std::byte> bytes);
ScanReadResult read_kitti_scan_file(const std::filesystem::path& path);
std::vector<std::byte> write_kitti_scan(const PointCloud& cloud);
void write_kitti_scan_file(const PointCloud& cloud, const std::filesystem::path& path);

// Sidecar label file: one uint8 ClassId per point, same order as the scan.
std::vector<ClassId> read_label_sidecar(std::span<const std::byte> bytes);
std::vector<std::byte> write_label_sidecar(std::span<const ClassId> labels);

// Loads scan + sidecar and checks that their lengths agree.
PointCloud read_labeled_cloud(const std::filesystem::path& scan_path,
                              const std::filesystem::path& label_path);
void write_labeled_cloud(const PointCloud& cloud, const std::filesystem::path& scan_path,
                         const std::filesystem::path& label_path);

PointCloud crop_roi(const PointCloud& cloud, const RoiSpec& roi);
PointCloud rotate_z(const PointCloud& cloud, double angle_rad);
PointCloud flip_y(const PointCloud& cloud);

}  // namespace salsanet
