#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "salsanet/endian.hpp"
#include "salsanet/error.hpp"
#include "salsanet/pointcloud.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace salsanet;
using fixtures::code_of;

namespace {

std::vector<std::byte> records(std::initializer_list<Point> pts) {
  std::vector<std::byte> out;
  for (const Point& p : pts) {
    le::append_f32(out, p.x);
    le::append_f32(out, p.y);
    le::append_f32(out, p.z);
    le::append_f32(out, p.intensity);
  }
  return out;
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, bool labeled) {
  std::uniform_real_distribution<float> pos(-40.0f, 40.0f);
  std::uniform_real_distribution<float> inten(0.0f, 1.0f);
  std::vector<Point> pts;
  std::vector<ClassId> labels;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({pos(rng), pos(rng), pos(rng) / 10.0f, inten(rng)});
    labels.push_back(static_cast<ClassId>(rng() % 3));
  }
  return labeled ? PointCloud(pts, labels) : PointCloud(pts);
}

}  // namespace

TEST(Scan, RecordLayoutIsLittleEndianXyzi) {
  const auto bytes = records({{1.0f, -2.0f, 0.5f, 0.25f}});
  ASSERT_EQ(bytes.size(), 16u);
  // 1.0f = 0x3F800000
  EXPECT_EQ(std::to_integer<int>(bytes[3]), 0x3F);
  EXPECT_EQ(std::to_integer<int>(bytes[2]), 0x80);
  const auto r = read_kitti_scan(bytes);
  ASSERT_EQ(r.cloud.size(), 1u);
  EXPECT_EQ(r.cloud.points()[0], (Point{1.0f, -2.0f, 0.5f, 0.25f}));
}

TEST(Scan, LengthNotMultipleOf16IsMalformed) {
  auto bytes = records({{1, 2, 3, 0.5f}});
  bytes.pop_back();
  EXPECT_EQ(code_of([&] { read_kitti_scan(bytes); }), ErrorCode::kMalformedScan);
}

TEST(Scan, EmptyFileIsAnEmptyCloud) {
  const auto r = read_kitti_scan({});
  EXPECT_TRUE(r.cloud.empty());
  EXPECT_EQ(r.dropped_non_finite, 0u);
}

TEST(Scan, NonFinitePointsAreDroppedAndCounted) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  const auto bytes = records({{1, 1, 1, 0.1f}, {nan, 0, 0, 0}, {0, inf, 0, 0}, {0, 0, -inf, 0},
                              {0, 0, 0, nan}, {2, 2, 2, 0.2f}});
  const auto r = read_kitti_scan(bytes);
  EXPECT_EQ(r.dropped_non_finite, 4u);
  ASSERT_EQ(r.cloud.size(), 2u);
  EXPECT_EQ(r.cloud.points()[1].x, 2.0f);
}

TEST(Scan, IntensityIsClampedToUnitInterval) {
  const auto r = read_kitti_scan(records({{1, 1, 1, -0.5f}, {1, 1, 1, 3.0f}, {1, 1, 1, 1.0f}}));
  EXPECT_EQ(r.clamped_intensity, 2u);
  EXPECT_EQ(r.cloud.points()[0].intensity, 0.0f);
  EXPECT_EQ(r.cloud.points()[1].intensity, 1.0f);
  EXPECT_EQ(r.cloud.points()[2].intensity, 1.0f);
}

TEST(Scan, RoundTripIsByteExact) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud c = random_cloud(rng, 100 + trial * 37, false);
    const auto bytes = write_kitti_scan(c);
    EXPECT_EQ(bytes.size(), c.size() * 16);
    const auto back = read_kitti_scan(bytes);
    EXPECT_EQ(back.cloud, c);
    EXPECT_EQ(write_kitti_scan(back.cloud), bytes);
  }
}

TEST(Scan, MissingFileIsIoErrorNamingPath) {
  const auto path = synth::scratch("scan_missing") / "nope.bin";
  try {
    read_kitti_scan_file(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("nope.bin"), std::string::npos);
  }
}

TEST(Labels, SidecarRejectsUnknownClassId) {
  std::vector<std::byte> b = {std::byte{0}, std::byte{2}, std::byte{3}};
  EXPECT_EQ(code_of([&] { read_label_sidecar(b); }), ErrorCode::kCorruptData);
}

TEST(Labels, CloudLengthMismatchThrows) {
  EXPECT_EQ(code_of([] { PointCloud({Point{}, Point{}}, {ClassId::kRoad}); }), ErrorCode::kLengthMismatch);
}

TEST(Labels, LabeledCloudFileRoundTrip) {
  std::mt19937_64 rng(9);
  const PointCloud c = random_cloud(rng, 321, true);
  const auto dir = synth::scratch("labeled_rt");
  write_labeled_cloud(c, dir / "a.bin", dir / "a.label");
  EXPECT_EQ(std::filesystem::file_size(dir / "a.label"), c.size());
  EXPECT_EQ(read_labeled_cloud(dir / "a.bin", dir / "a.label"), c);
}

TEST(Labels, SidecarShorterThanScanIsLengthMismatch) {
  std::mt19937_64 rng(10);
  const PointCloud c = random_cloud(rng, 50, true);
  const auto dir = synth::scratch("labeled_short");
  write_labeled_cloud(c, dir / "a.bin", dir / "a.label");
  std::filesystem::resize_file(dir / "a.label", 49);
  EXPECT_EQ(code_of([&] { read_labeled_cloud(dir / "a.bin", dir / "a.label"); }), ErrorCode::kLengthMismatch);
}

TEST(Labels, UnlabeledCloudCannotBeWrittenWithSidecar) {
  const auto dir = synth::scratch("labeled_none");
  EXPECT_EQ(code_of([&] { write_labeled_cloud(PointCloud({Point{}}), dir / "a.bin", dir / "a.label"); }),
            ErrorCode::kInvalidArgument);
}

TEST(Roi, IntervalsAreHalfOpen) {
  const RoiSpec roi{0.0, 10.0, -2.0, 2.0};
  EXPECT_TRUE(roi.contains(0.0, -2.0));
  EXPECT_FALSE(roi.contains(10.0, 0.0));
  EXPECT_FALSE(roi.contains(5.0, 2.0));
  EXPECT_FALSE(roi.contains(-1e-9, 0.0));
}

TEST(Roi, InvalidRoiRejected) {
  EXPECT_EQ(code_of([] { (RoiSpec{1.0, 1.0, 0.0, 1.0}).validate(); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { (RoiSpec{0.0, 1.0, 2.0, 1.0}).validate(); }), ErrorCode::kInvalidArgument);
}

TEST(Roi, CropKeepsOrderAndLabelsOfContainedPoints) {
  std::mt19937_64 rng(11);
  const PointCloud c = random_cloud(rng, 500, true);
  const RoiSpec roi{0.0, 20.0, -6.0, 12.0};
  const PointCloud out = crop_roi(c, roi);
  std::size_t j = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point& p = c.points()[i];
    if (!roi.contains(p.x, p.y)) continue;
    ASSERT_LT(j, out.size());
    EXPECT_EQ(out.points()[j], p);
    EXPECT_EQ(out.labels()[j], c.labels()[i]);
    ++j;
  }
  EXPECT_EQ(j, out.size());
}

TEST(Transform, RotationPreservesRadiusAndHeight) {
  std::mt19937_64 rng(12);
  const PointCloud c = random_cloud(rng, 200, true);
  const PointCloud r = rotate_z(c, 0.37);
  ASSERT_EQ(r.size(), c.size());
  EXPECT_EQ(std::vector<ClassId>(r.labels().begin(), r.labels().end()),
            std::vector<ClassId>(c.labels().begin(), c.labels().end()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point& a = c.points()[i];
    const Point& b = r.points()[i];
    EXPECT_NEAR(std::hypot(a.x, a.y), std::hypot(b.x, b.y), 1e-4);
    EXPECT_EQ(a.z, b.z);
    EXPECT_EQ(a.intensity, b.intensity);
    const double turned = std::remainder(std::atan2(b.y, b.x) - std::atan2(a.y, a.x) - 0.37, 2 * M_PI);
    EXPECT_NEAR(turned, 0.0, 1e-5);
  }
}

TEST(Transform, FlipNegatesYAndIsAnInvolution) {
  std::mt19937_64 rng(13);
  const PointCloud c = random_cloud(rng, 100, true);
  const PointCloud f = flip_y(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(f.points()[i].y, -c.points()[i].y);
    EXPECT_EQ(f.points()[i].x, c.points()[i].x);
  }
  EXPECT_EQ(flip_y(f), c);
}

TEST(Roi, CropIsIdempotent) {
  std::mt19937_64 rng(14);
  const PointCloud c = random_cloud(rng, 800, true);
  const RoiSpec roi{0.0, 50.0, -6.0, 12.0};
  const PointCloud once = crop_roi(c, roi);
  EXPECT_EQ(crop_roi(once, roi), once);
  EXPECT_EQ(crop_roi(PointCloud({{25, 0, 0, 0}}), roi).size(), 1u);
  EXPECT_EQ(crop_roi(PointCloud({{-1, 0, 0, 0}}), roi).size(), 0u);
}
