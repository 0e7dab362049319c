#include "salsanet/autolabel.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "salsanet/error.hpp"
#include "salsanet/io.hpp"

namespace salsanet {

namespace {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(ch(pos_))) {
      value = value * 10 + (ch(pos_) - '0');
      if (value > 1'000'000) throw Error(ErrorCode::kCorruptData, "PGM header value too large");
      ++pos_;
    }
    if (pos_ == start) throw Error(ErrorCode::kCorruptData, "PGM header: expected a number");
    return static_cast<int>(value);
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }
  int ch(std::size_t i) const { return std::to_integer<unsigned char>(bytes_[i]); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (ch(pos_) == '#') {
        while (pos_ < bytes_.size() && ch(pos_) != '\n') ++pos_;
      } else if (std::isspace(ch(pos_))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

SegMask::SegMask(int width, int height, std::vector<ClassId> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "mask dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kShape, "mask data length does not match its dimensions");
  }
}

SegMask read_pgm_mask(std::span<const std::byte> bytes, std::uint8_t threshold, ClassId positive) {
  if (bytes.size() < 2 || std::to_integer<char>(bytes[0]) != 'P' ||
      std::to_integer<char>(bytes[1]) != '5') {
    throw Error(ErrorCode::kCorruptData, "mask is not a binary PGM (P5)");
  }
  PgmHeaderReader header(bytes.subspan(2));
  const int width = header.next_int();
  const int height = header.next_int();
  const int maxval = header.next_int();
  if (maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::kCorruptData, "only 8-bit PGM masks are supported");
  }
  // Exactly one whitespace byte separates the header from the raster.
  const std::size_t raster = 2 + header.pos() + 1;
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < raster + expected) throw Error(ErrorCode::kCorruptData, "PGM raster truncated");
  std::vector<ClassId> data(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    data[i] = std::to_integer<std::uint8_t>(bytes[raster + i]) >= threshold ? positive
                                                                            : ClassId::kBackground;
  }
  return SegMask(width, height, std::move(data));
}

SegMask read_pgm_mask_file(const std::filesystem::path& path, std::uint8_t threshold,
                           ClassId positive) {
  return read_pgm_mask(io::read_file(path), threshold, positive);
}

std::vector<ClassId> label_from_mask(const PointCloud& cloud, const CalibrationSet& calib,
                                     const SegMask& mask) {
  std::vector<ClassId> labels;
  labels.reserve(cloud.size());
  for (const Point& p : cloud.points()) {
    const auto px = lidar_to_pixel(calib, p);
    ClassId label = ClassId::kBackground;
    if (px) {
      const double col = std::round(px->u);
      const double row = std::round(px->v);
      if (col >= 0.0 && col < mask.width() && row >= 0.0 && row < mask.height()) {
        label = mask.at(static_cast<int>(row), static_cast<int>(col));
      }
    }
    labels.push_back(label);
  }
  return labels;
}

std::vector<ClassId> label_from_boxes(const PointCloud& cloud, std::span<const Box3D> boxes) {
  std::vector<ClassId> labels(cloud.size(), ClassId::kBackground);
  const auto points = cloud.points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const Box3D& box : boxes) {
      if (point_in_box(points[i], box)) {
        labels[i] = ClassId::kVehicle;
        break;
      }
    }
  }
  return labels;
}

std::vector<ClassId> merge_labels(std::span<const ClassId> road, std::span<const ClassId> vehicle) {
  if (road.size() != vehicle.size()) {
    throw Error(ErrorCode::kLengthMismatch, "merge_labels: " + std::to_string(road.size()) +
                                                " road labels vs " + std::to_string(vehicle.size()) +
                                                " vehicle labels");
  }
  std::vector<ClassId> merged(road.size());
  for (std::size_t i = 0; i < road.size(); ++i) {
    if (vehicle[i] == ClassId::kVehicle) {
      merged[i] = ClassId::kVehicle;
    } else if (road[i] == ClassId::kRoad) {
      merged[i] = ClassId::kRoad;
    } else {
      merged[i] = ClassId::kBackground;
    }
  }
  return merged;
}

}  // namespace salsanet
