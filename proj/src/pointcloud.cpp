#include "salsanet/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salsanet/endian.hpp"
#include "salsanet/error.hpp"
#include "salsanet/io.hpp"

namespace salsanet {

namespace {
constexpr std::size_t kRecordBytes = 16;
}

PointCloud::PointCloud(std::vector<Point> points) : points_(std::move(points)) {}

PointCloud::PointCloud(std::vector<Point> points, std::vector<ClassId> labels)
    : points_(std::move(points)), labels_(std::move(labels)), labeled_(true) {
  if (labels_.size() != points_.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "label count " + std::to_string(labels_.size()) + " != point count " +
                    std::to_string(points_.size()));
  }
}

PointCloud PointCloud::with_labels(std::vector<ClassId> labels) const {
  return PointCloud(points_, std::move(labels));
}

void RoiSpec::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw Error(ErrorCode::kInvalidArgument, "ROI requires x_min < x_max and y_min < y_max");
  }
}

ScanReadResult read_kitti_scan(std::span<const std::byte> bytes) {
  if (bytes.size() % kRecordBytes != 0) {
    throw Error(ErrorCode::kMalformedScan,
                "scan length " + std::to_string(bytes.size()) + " is not a multiple of 16");
  }
  ScanReadResult result;
  std::vector<Point> points;
  points.reserve(bytes.size() / kRecordBytes);
  for (std::size_t off = 0; off < bytes.size(); off += kRecordBytes) {
    Point p{le::load_f32(bytes, off), le::load_f32(bytes, off + 4), le::load_f32(bytes, off + 8),
            le::load_f32(bytes, off + 12)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        std::isnan(p.intensity)) {
      ++result.dropped_non_finite;
      continue;
    }
    if (p.intensity < 0.0f || p.intensity > 1.0f) {
      p.intensity = std::clamp(p.intensity, 0.0f, 1.0f);
      ++result.clamped_intensity;
    }
    points.push_back(p);
  }
  result.cloud = PointCloud(std::move(points));
  return result;
}

ScanReadResult read_kitti_scan_file(const std::filesystem::path& path) {
  try {
    return read_kitti_scan(io::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedScan) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
    throw;
  }
}

std::vector<std::byte> write_kitti_scan(const PointCloud& cloud) {
  std::vector<std::byte> out;
  out.reserve(cloud.size() * kRecordBytes);
  for (const Point& p : cloud.points()) {
    le::append_f32(out, p.x);
    le::append_f32(out, p.y);
    le::append_f32(out, p.z);
    le::append_f32(out, p.intensity);
  }
  return out;
}

void write_kitti_scan_file(const PointCloud& cloud, const std::filesystem::path& path) {
  io::write_file(path, write_kitti_scan(cloud));
}

std::vector<ClassId> read_label_sidecar(std::span<const std::byte> bytes) {
  std::vector<ClassId> labels;
  labels.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto raw = std::to_integer<std::uint8_t>(bytes[i]);
    if (!is_valid_class(raw)) {
      throw Error(ErrorCode::kCorruptData,
                  "label " + std::to_string(raw) + " at index " + std::to_string(i) +
                      " is not a class id");
    }
    labels.push_back(static_cast<ClassId>(raw));
  }
  return labels;
}

std::vector<std::byte> write_label_sidecar(std::span<const ClassId> labels) {
  std::vector<std::byte> out;
  out.reserve(labels.size());
  for (ClassId c : labels) out.push_back(static_cast<std::byte>(c));
  return out;
}

PointCloud read_labeled_cloud(const std::filesystem::path& scan_path,
                              const std::filesystem::path& label_path) {
  auto scan = read_kitti_scan_file(scan_path);
  if (scan.dropped_non_finite > 0) {
    // Dropping points would desynchronize the sidecar.
    throw Error(ErrorCode::kMalformedScan,
                scan_path.string() + ": labeled scans must not contain non-finite points");
  }
  auto labels = read_label_sidecar(io::read_file(label_path));
  if (labels.size() != scan.cloud.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                label_path.string() + ": " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(scan.cloud.size()) + " points");
  }
  return scan.cloud.with_labels(std::move(labels));
}

void write_labeled_cloud(const PointCloud& cloud, const std::filesystem::path& scan_path,
                         const std::filesystem::path& label_path) {
  if (!cloud.has_labels()) {
    throw Error(ErrorCode::kInvalidArgument, "cloud has no labels");
  }
  write_kitti_scan_file(cloud, scan_path);
  io::write_file(label_path, write_label_sidecar(cloud.labels()));
}

PointCloud crop_roi(const PointCloud& cloud, const RoiSpec& roi) {
  roi.validate();
  std::vector<Point> points;
  std::vector<ClassId> labels;
  const auto src = cloud.points();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!roi.contains(src[i].x, src[i].y)) continue;
    points.push_back(src[i]);
    if (cloud.has_labels()) labels.push_back(cloud.labels()[i]);
  }
  if (cloud.has_labels()) return PointCloud(std::move(points), std::move(labels));
  return PointCloud(std::move(points));
}

PointCloud rotate_z(const PointCloud& cloud, double angle_rad) {
  const double c = std::cos(angle_rad);
  const double s = std::sin(angle_rad);
  std::vector<Point> points(cloud.points().begin(), cloud.points().end());
  for (Point& p : points) {
    const double x = p.x;
    const double y = p.y;
    p.x = static_cast<float>(c * x - s * y);
    p.y = static_cast<float>(s * x + c * y);
  }
  if (cloud.has_labels()) {
    return PointCloud(std::move(points), {cloud.labels().begin(), cloud.labels().end()});
  }
  return PointCloud(std::move(points));
}

PointCloud flip_y(const PointCloud& cloud) {
  std::vector<Point> points(cloud.points().begin(), cloud.points().end());
  for (Point& p : points) p.y = -p.y;
  if (cloud.has_labels()) {
    return PointCloud(std::move(points), {cloud.labels().begin(), cloud.labels().end()});
  }
  return PointCloud(std::move(points));
}

}  // namespace salsanet
