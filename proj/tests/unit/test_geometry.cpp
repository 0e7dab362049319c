#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "salsanet/autolabel.hpp"
#include "salsanet/error.hpp"
#include "salsanet/geometry.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace salsanet;
using fixtures::code_of;
using fixtures::message_of;

namespace {

// Homogeneous chain P2 * R0 * Tr with R0 and Tr padded to 4x4.
Eigen::Vector3d homogeneous_pixel(const CalibrationSet& c, const Point& p) {
  Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
  r0.topLeftCorner<3, 3>() = c.rectification;
  Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
  tr.topRows<3>() = c.lidar_to_cam;
  const Eigen::Vector4d x(p.x, p.y, p.z, 1.0);
  const Eigen::Vector3d img = c.cam_projection * (r0 * (tr * x));
  const Eigen::Vector4d rect = r0 * (tr * x);
  return {img.x() / img.z(), img.y() / img.z(), rect.z()};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  if (pos != std::string::npos) s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

TEST(Calib, ParsesKittiFileAndIgnoresOtherKeys) {
  const CalibrationSet c = parse_kitti_calib(fixtures::kKittiCalib);
  EXPECT_DOUBLE_EQ(c.cam_projection(0, 0), 721.5377);
  EXPECT_DOUBLE_EQ(c.cam_projection(1, 3), 0.2163791);
  EXPECT_DOUBLE_EQ(c.rectification(2, 1), 4.351614e-03);
  EXPECT_DOUBLE_EQ(c.lidar_to_cam(2, 3), -0.2717806);
}

TEST(Calib, FormatParseRoundTripIsExact) {
  const CalibrationSet c = parse_kitti_calib(fixtures::kKittiCalib);
  const std::string text = format_kitti_calib(c);
  const CalibrationSet d = parse_kitti_calib(text);
  EXPECT_EQ(c.cam_projection, d.cam_projection);
  EXPECT_EQ(c.rectification, d.rectification);
  EXPECT_EQ(c.lidar_to_cam, d.lidar_to_cam);
  EXPECT_EQ(format_kitti_calib(d), text);
}

TEST(Calib, MissingKeyIsNamed) {
  const std::string text = replace(fixtures::kKittiCalib, "R0_rect:", "R9_rect:");
  EXPECT_EQ(code_of([&] { parse_kitti_calib(text); }), ErrorCode::kCalibParse);
  EXPECT_NE(message_of([&] { parse_kitti_calib(text); }).find("R0_rect"), std::string::npos);
}

TEST(Calib, WrongValueCountIsNamed) {
  const std::string text = replace(fixtures::kKittiCalib, "-2.717806000000e-01", "");
  const std::string msg = message_of([&] { parse_kitti_calib(text); });
  EXPECT_NE(msg.find("Tr_velo_to_cam"), std::string::npos);
  EXPECT_NE(msg.find("11"), std::string::npos);
}

TEST(Calib, BadNumberIsNamed) {
  const std::string text = replace(fixtures::kKittiCalib, "P2: 7.215377000000e+02", "P2: seven");
  EXPECT_EQ(code_of([&] { parse_kitti_calib(text); }), ErrorCode::kCalibParse);
  EXPECT_NE(message_of([&] { parse_kitti_calib(text); }).find("P2"), std::string::npos);
}

TEST(Calib, NonOrthonormalRotationRejected) {
  const std::string text = replace(fixtures::kKittiCalib, "R0_rect: 9.999239000000e-01", "R0_rect: 1.5");
  EXPECT_EQ(code_of([&] { parse_kitti_calib(text); }), ErrorCode::kCalibParse);
}

TEST(Calib, RectifiedInverseRecoversPoint) {
  const CalibrationSet c = parse_kitti_calib(fixtures::kKittiCalib);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(d(rng), d(rng), d(rng));
    EXPECT_LT((c.from_rectified(c.to_rectified(p)) - p).norm(), 1e-9);
  }
}

TEST(Projection, PixelMatchesHomogeneousChain) {
  const CalibrationSet c = parse_kitti_calib(fixtures::kKittiCalib);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> fwd(2.0f, 60.0f);
  std::uniform_real_distribution<float> side(-20.0f, 20.0f);
  for (int i = 0; i < 500; ++i) {
    const Point p{fwd(rng), side(rng), side(rng) / 8.0f, 0.5f};
    const auto px = lidar_to_pixel(c, p);
    ASSERT_TRUE(px.has_value());
    const Eigen::Vector3d want = homogeneous_pixel(c, p);
    EXPECT_NEAR(px->u, want.x(), 1e-9 * std::max(1.0, std::abs(want.x())));
    EXPECT_NEAR(px->v, want.y(), 1e-9 * std::max(1.0, std::abs(want.y())));
    EXPECT_NEAR(px->depth, want.z(), 1e-12 * std::max(1.0, want.z()));
  }
}

TEST(Projection, PointsBehindCameraHaveNoPixel) {
  const CalibrationSet c = parse_kitti_calib(fixtures::axis_calib());
  EXPECT_FALSE(lidar_to_pixel(c, {-5.0f, 0.0f, 0.0f, 0.0f}).has_value());
  EXPECT_FALSE(lidar_to_pixel(c, {0.0f, 3.0f, 0.0f, 0.0f}).has_value());
  const auto px = lidar_to_pixel(c, {10.0f, 0.0f, 0.0f, 0.0f});
  ASSERT_TRUE(px.has_value());
  EXPECT_DOUBLE_EQ(px->u, 50.0);
  EXPECT_DOUBLE_EQ(px->v, 20.0);
  EXPECT_DOUBLE_EQ(px->depth, 10.0);
}

TEST(Box, BoundaryIsInclusive) {
  Box3D b;
  b.length = 4.0;
  b.width = 2.0;
  b.height = 1.0;
  EXPECT_TRUE(point_in_box({2.0f, 1.0f, 0.5f, 0}, b));
  EXPECT_TRUE(point_in_box({-2.0f, -1.0f, -0.5f, 0}, b));
  EXPECT_FALSE(point_in_box({2.0f + 1e-5f, 0.0f, 0.0f, 0}, b));
  EXPECT_FALSE(point_in_box({0.0f, 0.0f, 0.51f, 0}, b));
}

TEST(Box, YawRotatesFootprint) {
  Box3D b;
  b.length = 4.0;
  b.width = 1.0;
  b.height = 2.0;
  b.yaw = std::numbers::pi / 2;
  EXPECT_TRUE(point_in_box({0.0f, 1.9f, 0.0f, 0}, b));
  EXPECT_FALSE(point_in_box({1.9f, 0.0f, 0.0f, 0}, b));
  b.yaw = std::numbers::pi / 4;
  EXPECT_TRUE(point_in_box({1.3f, 1.3f, 0.0f, 0}, b));
  EXPECT_FALSE(point_in_box({1.3f, -1.3f, 0.0f, 0}, b));
}

TEST(Box, MatchesBoxFrameOracleUnderTranslation) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Box3D b;
    b.center = {10 * u(rng), 10 * u(rng), u(rng)};
    b.length = 3.0 + u(rng);
    b.width = 1.5 + 0.5 * u(rng);
    b.height = 1.5;
    b.yaw = 3.0 * u(rng);
    const Eigen::Matrix3d to_box = Eigen::AngleAxisd(-b.yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    for (int i = 0; i < 200; ++i) {
      const Point p{static_cast<float>(b.center.x() + 3 * u(rng)), static_cast<float>(b.center.y() + 3 * u(rng)),
                    static_cast<float>(b.center.z() + u(rng)), 0};
      const Eigen::Vector3d local = to_box * (Eigen::Vector3d(p.x, p.y, p.z) - b.center);
      const bool want = std::abs(local.x()) <= b.length / 2 && std::abs(local.y()) <= b.width / 2 &&
                        std::abs(local.z()) <= b.height / 2;
      EXPECT_EQ(point_in_box(p, b), want);
    }
  }
}

TEST(Box, NonPositiveDimensionsRejected) {
  Box3D b;
  b.width = 0.0;
  EXPECT_EQ(code_of([&] { b.validate(); }), ErrorCode::kInvalidArgument);
}

TEST(KittiObjects, VehicleTypes) {
  EXPECT_TRUE(is_vehicle_type("Car"));
  EXPECT_TRUE(is_vehicle_type("Van"));
  EXPECT_TRUE(is_vehicle_type("Truck"));
  EXPECT_FALSE(is_vehicle_type("Pedestrian"));
  EXPECT_FALSE(is_vehicle_type("DontCare"));
  EXPECT_FALSE(is_vehicle_type("car"));
}

TEST(KittiObjects, BoxMovesToLidarFrameCenter) {
  const CalibrationSet c = parse_kitti_calib(fixtures::axis_calib());
  const std::string text =
      "Car 0.00 0 -1.57 100 100 200 200 1.50 1.80 4.00 1.00 1.50 10.00 0.00\n"
      "Pedestrian 0.00 0 0.0 1 1 2 2 1.7 0.5 0.5 2.0 1.5 8.0 0.0\n"
      "\n";
  const auto boxes = vehicle_boxes(text, c);
  ASSERT_EQ(boxes.size(), 1u);
  const Box3D& b = boxes[0];
  // camera (x right, y down, z forward) -> lidar (x forward, y left, z up)
  EXPECT_NEAR(b.center.x(), 10.0, 1e-12);
  EXPECT_NEAR(b.center.y(), -1.0, 1e-12);
  EXPECT_NEAR(b.center.z(), -0.75, 1e-12);
  EXPECT_NEAR(b.yaw, -std::numbers::pi / 2, 1e-12);
  EXPECT_DOUBLE_EQ(b.length, 4.0);
  EXPECT_DOUBLE_EQ(b.width, 1.8);
  EXPECT_DOUBLE_EQ(b.height, 1.5);
}

TEST(KittiObjects, ShortLineIsCorrupt) {
  EXPECT_EQ(code_of([] { parse_kitti_objects("Car 0 0 0\n"); }), ErrorCode::kCorruptData);
}

TEST(Mask, ParsesPgmWithCommentsAndThreshold) {
  std::string pgm = "P5\n# road\n3 2\n255\n";
  pgm += std::string{char(0), char(127), char(128), char(255), char(10), char(200)};
  const SegMask m = read_pgm_mask(fixtures::bytes_of(pgm));
  EXPECT_EQ(m.width(), 3);
  EXPECT_EQ(m.height(), 2);
  EXPECT_EQ(m.at(0, 0), ClassId::kBackground);
  EXPECT_EQ(m.at(0, 1), ClassId::kBackground);
  EXPECT_EQ(m.at(0, 2), ClassId::kRoad);
  EXPECT_EQ(m.at(1, 0), ClassId::kRoad);
  EXPECT_EQ(m.at(1, 1), ClassId::kBackground);
  const SegMask low = read_pgm_mask(fixtures::bytes_of(pgm), 5);
  EXPECT_EQ(low.at(1, 1), ClassId::kRoad);
}

TEST(Mask, RejectsAsciiAndTruncated) {
  EXPECT_EQ(code_of([] { read_pgm_mask(fixtures::bytes_of("P2\n1 1\n255\n0\n")); }), ErrorCode::kCorruptData);
  EXPECT_EQ(code_of([] { read_pgm_mask(fixtures::bytes_of("P5\n4 4\n255\n\x01\x02")); }),
            ErrorCode::kCorruptData);
  EXPECT_EQ(code_of([] { read_pgm_mask(fixtures::bytes_of("P5\n1 1\n65535\n\x01\x02")); }),
            ErrorCode::kCorruptData);
}

TEST(Autolabel, MaskLookupUsesNearestPixel) {
  const CalibrationSet c = parse_kitti_calib(fixtures::axis_calib(100.0, 2.0, 1.0));
  // 5 x 3 mask, road only at (row 1, col 3)
  std::vector<ClassId> data(15, ClassId::kBackground);
  data[1 * 5 + 3] = ClassId::kRoad;
  const SegMask mask(5, 3, data);
  // u = 2 - 100 y / x, v = 1 - 100 z / x
  const PointCloud cloud({{10.0f, -0.1f, 0.0f, 0}, {10.0f, -0.13f, 0.0f, 0}, {10.0f, -0.16f, 0.0f, 0},
                          {10.0f, 0.0f, 0.0f, 0}, {-10.0f, 0.1f, 0.0f, 0}, {10.0f, -1.0f, 0.0f, 0}});
  const auto labels = label_from_mask(cloud, c, mask);
  const std::vector<ClassId> want = {ClassId::kRoad, ClassId::kRoad, ClassId::kBackground,
                                     ClassId::kBackground, ClassId::kBackground, ClassId::kBackground};
  EXPECT_EQ(labels, want);
}

TEST(Autolabel, BoxesMarkVehicles) {
  Box3D b;
  b.center = {5.0, 0.0, 0.0};
  b.length = 2.0;
  const PointCloud cloud({{5.0f, 0.0f, 0.0f, 0}, {7.0f, 0.0f, 0.0f, 0}, {5.9f, 0.4f, 0.4f, 0}});
  const std::vector<Box3D> boxes = {b};
  EXPECT_EQ(label_from_boxes(cloud, boxes),
            (std::vector<ClassId>{ClassId::kVehicle, ClassId::kBackground, ClassId::kVehicle}));
  EXPECT_EQ(label_from_boxes(cloud, {}), std::vector<ClassId>(3, ClassId::kBackground));
}

TEST(Autolabel, MergePrefersVehicleThenRoad) {
  const std::vector<ClassId> road = {ClassId::kRoad, ClassId::kRoad, ClassId::kBackground, ClassId::kBackground};
  const std::vector<ClassId> veh = {ClassId::kVehicle, ClassId::kBackground, ClassId::kVehicle,
                                    ClassId::kBackground};
  EXPECT_EQ(merge_labels(road, veh), (std::vector<ClassId>{ClassId::kVehicle, ClassId::kRoad, ClassId::kVehicle,
                                                           ClassId::kBackground}));
}

TEST(Autolabel, MergeLengthMismatch) {
  const std::vector<ClassId> a(3), b(4);
  EXPECT_EQ(code_of([&] { merge_labels(a, b); }), ErrorCode::kLengthMismatch);
}

TEST(Autolabel, OutputLengthEqualsInputLength) {
  const CalibrationSet c = parse_kitti_calib(fixtures::kKittiCalib);
  const SegMask mask(1242, 375, std::vector<ClassId>(1242 * 375, ClassId::kRoad));
  const PointCloud cloud = synth::make_scene(1, synth::small_bev().bev);
  EXPECT_EQ(label_from_mask(cloud, c, mask).size(), cloud.size());
  EXPECT_EQ(label_from_boxes(cloud, {}).size(), cloud.size());
}
