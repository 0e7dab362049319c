#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "salsanet/pointcloud.hpp"

namespace salsanet {

// KITTI camera-2 calibration. All matrices are stored row-major as read.
struct CalibrationSet {
  Eigen::Matrix<double, 3, 4> cam_projection = Eigen::Matrix<double, 3, 4>::Zero();  // P2
  Eigen::Matrix3d rectification = Eigen::Matrix3d::Identity();                       // R0_rect
  Eigen::Matrix<double, 3, 4> lidar_to_cam = Eigen::Matrix<double, 3, 4>::Zero();    // Tr_velo_to_cam

  // Checks that R0_rect and the rotation of Tr_velo_to_cam are orthonormal within 1e-3.
  void validate() const;

  // Rectified-camera coordinates of a LiDAR-frame point.
  Eigen::Vector3d to_rectified(const Eigen::Vector3d& lidar) const;
  Eigen::Vector3d from_rectified(const Eigen::Vector3d& rect) const;
};

// Parses the P2, R0_rect and Tr_velo_to_cam lines; other keys are ignored.
CalibrationSet parse_kitti_calib(std::string_view text);
// Emits the three keys with 17 significant digits so parsing round-trips exactly.
std::string format_kitti_calib(const CalibrationSet& calib);

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // rectified-camera z, meters
};

// nullopt marks a point at or behind the image plane (depth <= 0).
std::optional<PixelProjection> lidar_to_pixel(const CalibrationSet& calib, const Point& p);

// Oriented box in the LiDAR frame; center is the geometric center.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double length = 1.0;  // along the heading (box x)
  double width = 1.0;   // box y
  double height = 1.0;  // box z
  double yaw = 0.0;     // radians about +z

  void validate() const;
};

// Boundary-inclusive membership test in the box frame.
bool point_in_box(const Point& p, const Box3D& box);

// One line of a KITTI object label file. Dimensions/location are in the rectified camera frame,
// location is the bottom-center of the box.
struct KittiObject {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  double bbox[4] = {0.0, 0.0, 0.0, 0.0};
  double height = 0.0;
  double width = 0.0;
  double length = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double rotation_y = 0.0;
};

std::vector<KittiObject> parse_kitti_objects(std::string_view text);

// Car, Van and Truck count as vehicles.
bool is_vehicle_type(std::string_view type);

// Camera-frame bottom-center box to LiDAR-frame geometric-center box.
Box3D to_lidar_box(const KittiObject& object, const CalibrationSet& calib);

// Vehicle boxes of a label file, already in the LiDAR frame.
std::vector<Box3D> vehicle_boxes(std::string_view label_text, const CalibrationSet& calib);

}  // namespace salsanet
