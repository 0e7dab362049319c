#include "salsanet/geometry.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/LU>

#include "salsanet/error.hpp"

namespace salsanet {

namespace {

bool is_orthonormal(const Eigen::Matrix3d& m, double tol) {
  return (m * m.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> parse_double(std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    std::string_view line = text.substr(start, stop - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

std::vector<double> calib_values(std::string_view text, std::string_view key, std::size_t count) {
  for (std::string_view line : lines_of(text)) {
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0] != std::string(key) + ":") continue;
    std::vector<double> values;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      auto v = parse_double(tokens[i]);
      if (!v) {
        throw Error(ErrorCode::kCalibParse,
                    std::string(key) + ": bad number '" + std::string(tokens[i]) + "'");
      }
      values.push_back(*v);
    }
    if (values.size() != count) {
      throw Error(ErrorCode::kCalibParse, std::string(key) + ": expected " + std::to_string(count) +
                                              " values, got " + std::to_string(values.size()));
    }
    return values;
  }
  throw Error(ErrorCode::kCalibParse, std::string(key) + ": key missing");
}

void append_row_major(std::ostringstream& out, const char* key, const double* values,
                      std::size_t count) {
  out << key << ':';
  char buf[40];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof(buf), " %.17g", values[i]);
    out << buf;
  }
  out << '\n';
}

}  // namespace

void CalibrationSet::validate() const {
  if (!is_orthonormal(rectification, 1e-3)) {
    throw Error(ErrorCode::kCalibParse, "R0_rect: matrix is not orthonormal");
  }
  if (!is_orthonormal(lidar_to_cam.leftCols<3>(), 1e-3)) {
    throw Error(ErrorCode::kCalibParse, "Tr_velo_to_cam: rotation is not orthonormal");
  }
}

Eigen::Vector3d CalibrationSet::to_rectified(const Eigen::Vector3d& lidar) const {
  const Eigen::Vector3d cam = lidar_to_cam.leftCols<3>() * lidar + lidar_to_cam.col(3);
  return rectification * cam;
}

Eigen::Vector3d CalibrationSet::from_rectified(const Eigen::Vector3d& rect) const {
  const Eigen::Vector3d cam = rectification.inverse() * rect;
  const Eigen::Matrix3d rot = lidar_to_cam.leftCols<3>();
  return rot.inverse() * (cam - lidar_to_cam.col(3));
}

CalibrationSet parse_kitti_calib(std::string_view text) {
  CalibrationSet calib;
  const auto p2 = calib_values(text, "P2", 12);
  const auto r0 = calib_values(text, "R0_rect", 9);
  const auto tr = calib_values(text, "Tr_velo_to_cam", 12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      calib.cam_projection(r, c) = p2[static_cast<std::size_t>(r * 4 + c)];
      calib.lidar_to_cam(r, c) = tr[static_cast<std::size_t>(r * 4 + c)];
    }
    for (int c = 0; c < 3; ++c) calib.rectification(r, c) = r0[static_cast<std::size_t>(r * 3 + c)];
  }
  calib.validate();
  return calib;
}

std::string format_kitti_calib(const CalibrationSet& calib) {
  std::ostringstream out;
  double p2[12];
  double r0[9];
  double tr[12];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      p2[r * 4 + c] = calib.cam_projection(r, c);
      tr[r * 4 + c] = calib.lidar_to_cam(r, c);
    }
    for (int c = 0; c < 3; ++c) r0[r * 3 + c] = calib.rectification(r, c);
  }
  append_row_major(out, "P2", p2, 12);
  append_row_major(out, "R0_rect", r0, 9);
  append_row_major(out, "Tr_velo_to_cam", tr, 12);
  return out.str();
}

std::optional<PixelProjection> lidar_to_pixel(const CalibrationSet& calib, const Point& p) {
  const Eigen::Vector3d rect = calib.to_rectified(Eigen::Vector3d(p.x, p.y, p.z));
  if (rect.z() <= 0.0) return std::nullopt;
  const Eigen::Vector3d img = calib.cam_projection.leftCols<3>() * rect + calib.cam_projection.col(3);
  if (img.z() <= 0.0) return std::nullopt;
  return PixelProjection{img.x() / img.z(), img.y() / img.z(), rect.z()};
}

void Box3D::validate() const {
  if (!(length > 0.0 && width > 0.0 && height > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "box dimensions must be positive");
  }
}

bool point_in_box(const Point& p, const Box3D& box) {
  const double dx = static_cast<double>(p.x) - box.center.x();
  const double dy = static_cast<double>(p.y) - box.center.y();
  const double dz = static_cast<double>(p.z) - box.center.z();
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= box.length / 2.0 && std::abs(ly) <= box.width / 2.0 &&
         std::abs(dz) <= box.height / 2.0;
}

std::vector<KittiObject> parse_kitti_objects(std::string_view text) {
  std::vector<KittiObject> objects;
  std::size_t line_no = 0;
  for (std::string_view line : lines_of(text)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 15) {
      throw Error(ErrorCode::kCorruptData,
                  "object label line " + std::to_string(line_no) + ": expected 15 fields");
    }
    std::vector<double> v;
    for (std::size_t i = 1; i < 15; ++i) {
      auto d = parse_double(tokens[i]);
      if (!d) {
        throw Error(ErrorCode::kCorruptData,
                    "object label line " + std::to_string(line_no) + ": bad number '" +
                        std::string(tokens[i]) + "'");
      }
      v.push_back(*d);
    }
    KittiObject o;
    o.type = std::string(tokens[0]);
    o.truncation = v[0];
    o.occlusion = static_cast<int>(v[1]);
    o.alpha = v[2];
    for (int i = 0; i < 4; ++i) o.bbox[i] = v[static_cast<std::size_t>(3 + i)];
    o.height = v[7];
    o.width = v[8];
    o.length = v[9];
    o.x = v[10];
    o.y = v[11];
    o.z = v[12];
    o.rotation_y = v[13];
    objects.push_back(std::move(o));
  }
  return objects;
}

bool is_vehicle_type(std::string_view type) {
  return type == "Car" || type == "Van" || type == "Truck";
}

Box3D to_lidar_box(const KittiObject& object, const CalibrationSet& calib) {
  // Camera y points down, so the geometric center sits half a height above the location.
  const Eigen::Vector3d bottom(object.x, object.y, object.z);
  const Eigen::Vector3d center_rect = bottom - Eigen::Vector3d(0.0, object.height / 2.0, 0.0);
  const Eigen::Vector3d heading_rect(std::cos(object.rotation_y), 0.0, -std::sin(object.rotation_y));

  Box3D box;
  box.center = calib.from_rectified(center_rect);
  const Eigen::Vector3d heading = calib.from_rectified(center_rect + heading_rect) - box.center;
  box.yaw = std::atan2(heading.y(), heading.x());
  box.length = object.length;
  box.width = object.width;
  box.height = object.height;
  return box;
}

std::vector<Box3D> vehicle_boxes(std::string_view label_text, const CalibrationSet& calib) {
  std::vector<Box3D> boxes;
  for (const KittiObject& o : parse_kitti_objects(label_text)) {
    if (is_vehicle_type(o.type)) boxes.push_back(to_lidar_box(o, calib));
  }
  return boxes;
}

}  // namespace salsanet
