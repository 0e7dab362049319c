#include "salsanet/projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "salsanet/error.hpp"

namespace salsanet {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

int channels_for(GridKind kind) { return kind == GridKind::kBev ? kBevChannels : kSfvChannels; }

template <typename Spec>
LabelGrid rasterize_with(const PointCloud& cloud, const Spec& spec, int rows, int cols) {
  if (!cloud.has_labels()) {
    throw Error(ErrorCode::kInvalidArgument, "rasterize_labels needs a labeled cloud");
  }
  std::vector<std::array<std::uint32_t, kNumClasses>> votes(
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), {0, 0, 0});
  const auto points = cloud.points();
  const auto labels = cloud.labels();
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::optional<CellIndex> cell;
    if constexpr (std::is_same_v<Spec, BevSpec>) {
      cell = bev_bin(points[i], spec);
    } else {
      cell = sfv_bin(points[i], spec);
    }
    if (!cell) continue;
    ++votes[static_cast<std::size_t>(cell->row) * static_cast<std::size_t>(cols) +
            static_cast<std::size_t>(cell->col)][index_of(labels[i])];
  }
  LabelGrid grid(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto& v = votes[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                            static_cast<std::size_t>(c)];
      // Scan from the highest-priority class so it wins ties.
      ClassId best = ClassId::kBackground;
      std::uint32_t best_count = 0;
      for (std::size_t k = kNumClasses; k-- > 0;) {
        if (v[k] > best_count) {
          best_count = v[k];
          best = static_cast<ClassId>(k);
        }
      }
      grid.at(r, c) = best;
    }
  }
  return grid;
}

}  // namespace

void BevSpec::validate() const {
  roi.validate();
  if (!(cell_x > 0.0 && cell_y > 0.0) || rows <= 0 || cols <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "BEV cell sizes and grid extents must be positive");
  }
}

void SfvSpec::validate() const {
  if (!(zenith_min_deg < zenith_max_deg) || !(azimuth_fov_deg > 0.0) || rows <= 0 || cols <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "SFV needs zenith_min < zenith_max, a positive field of view and positive extents");
  }
}

double SfvSpec::zenith_step_rad() const {
  return (zenith_max_deg - zenith_min_deg) * kDegToRad / rows;
}

double SfvSpec::azimuth_step_rad() const { return azimuth_fov_deg * kDegToRad / cols; }

GridImage::GridImage(GridKind kind, int height, int width)
    : kind_(kind),
      height_(height),
      width_(width),
      channels_(channels_for(kind)),
      data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                static_cast<std::size_t>(channels_for(kind)),
            0.0f) {}

GridImage::GridImage(GridKind kind, int height, int width, std::vector<float> data)
    : kind_(kind), height_(height), width_(width), channels_(channels_for(kind)), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                          static_cast<std::size_t>(channels_)) {
    throw Error(ErrorCode::kShape, "grid data length does not match its extents");
  }
}

LabelGrid::LabelGrid(int height, int width, ClassId fill)
    : height_(height),
      width_(width),
      data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

LabelGrid::LabelGrid(int height, int width, std::vector<ClassId> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(ErrorCode::kShape, "label grid data length does not match its extents");
  }
}

std::optional<CellIndex> bev_bin(const Point& p, const BevSpec& spec) {
  const double row = std::floor((static_cast<double>(p.x) - spec.roi.x_min) / spec.cell_x);
  const double col = std::floor((static_cast<double>(p.y) - spec.roi.y_min) / spec.cell_y);
  if (!(row >= 0.0 && row < spec.rows && col >= 0.0 && col < spec.cols)) return std::nullopt;
  return CellIndex{static_cast<int>(row), static_cast<int>(col)};
}

GridImage project_bev_raw(const PointCloud& cloud, const BevSpec& spec) {
  spec.validate();
  const auto cells = static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols);
  std::vector<double> sum_z(cells, 0.0);
  std::vector<double> sum_i(cells, 0.0);
  std::vector<float> max_z(cells, -std::numeric_limits<float>::infinity());
  std::vector<std::uint32_t> count(cells, 0);
  for (const Point& p : cloud.points()) {
    const auto cell = bev_bin(p, spec);
    if (!cell) continue;
    const auto k = static_cast<std::size_t>(cell->row) * static_cast<std::size_t>(spec.cols) +
                   static_cast<std::size_t>(cell->col);
    sum_z[k] += p.z;
    sum_i[k] += p.intensity;
    max_z[k] = std::max(max_z[k], p.z);
    ++count[k];
  }
  GridImage image(GridKind::kBev, spec.rows, spec.cols);
  auto& data = image.data();
  for (std::size_t k = 0; k < cells; ++k) {
    if (count[k] == 0) continue;
    const double n = count[k];
    data[k * 4 + 0] = static_cast<float>(sum_z[k] / n);
    data[k * 4 + 1] = max_z[k];
    data[k * 4 + 2] = static_cast<float>(sum_i[k] / n);
    data[k * 4 + 3] = static_cast<float>(count[k]);
  }
  return image;
}

GridImage normalize_bev(const GridImage& raw) {
  if (raw.kind() != GridKind::kBev) {
    throw Error(ErrorCode::kInvalidArgument, "normalize_bev expects a BEV image");
  }
  GridImage out(GridKind::kBev, raw.height(), raw.width());
  const auto elevation = [](float z) {
    return std::clamp((z - kBevZLow) / (kBevZHigh - kBevZLow), 0.0f, 1.0f);
  };
  const auto& in = raw.data();
  auto& data = out.data();
  for (std::size_t k = 0; k * 4 < in.size(); ++k) {
    const float count = in[k * 4 + 3];
    if (count <= 0.0f) continue;
    data[k * 4 + 0] = elevation(in[k * 4 + 0]);
    data[k * 4 + 1] = elevation(in[k * 4 + 1]);
    data[k * 4 + 2] = std::clamp(in[k * 4 + 2], 0.0f, 1.0f);
    data[k * 4 + 3] = std::min(count, kBevCountCap) / kBevCountCap;
  }
  return out;
}

GridImage project_bev(const PointCloud& cloud, const BevSpec& spec) {
  return normalize_bev(project_bev_raw(cloud, spec));
}

SfvAngles sfv_angles(const Point& p) {
  const double x = p.x;
  const double y = p.y;
  const double z = p.z;
  const double planar = std::sqrt(x * x + y * y);
  if (planar == 0.0) {
    throw Error(ErrorCode::kUndefinedAngle, "angles undefined for a point on the z axis");
  }
  const double range = std::sqrt(x * x + y * y + z * z);
  return {std::asin(z / range), std::asin(y / planar)};
}

std::optional<CellIndex> sfv_bin(const Point& p, const SfvSpec& spec) {
  if (!(p.x > 0.0f)) return std::nullopt;
  const SfvAngles a = sfv_angles(p);
  const double half_fov = spec.azimuth_fov_deg * kDegToRad / 2.0;
  const double zmin = spec.zenith_min_deg * kDegToRad;
  const double u = std::floor((a.theta - zmin) / spec.zenith_step_rad());
  const double v = std::floor((a.phi + half_fov) / spec.azimuth_step_rad());
  if (!(u >= 0.0 && u < spec.rows && v >= 0.0 && v < spec.cols)) return std::nullopt;
  return CellIndex{spec.rows - 1 - static_cast<int>(u), static_cast<int>(v)};
}

GridImage project_sfv(const PointCloud& cloud, const SfvSpec& spec) {
  spec.validate();
  GridImage image(GridKind::kSfv, spec.rows, spec.cols);
  for (const Point& p : cloud.points()) {
    const auto cell = sfv_bin(p, spec);
    if (!cell) continue;
    const double x = p.x;
    const double y = p.y;
    const double z = p.z;
    const auto range = static_cast<float>(std::sqrt(x * x + y * y + z * z));
    const bool occupied = image.at(cell->row, cell->col, 5) > 0.0f;
    if (occupied && !(range < image.at(cell->row, cell->col, 4))) continue;
    image.at(cell->row, cell->col, 0) = p.x;
    image.at(cell->row, cell->col, 1) = p.y;
    image.at(cell->row, cell->col, 2) = p.z;
    image.at(cell->row, cell->col, 3) = p.intensity;
    image.at(cell->row, cell->col, 4) = range;
    image.at(cell->row, cell->col, 5) = 1.0f;
  }
  return image;
}

LabelGrid rasterize_labels(const PointCloud& cloud, const BevSpec& spec) {
  spec.validate();
  return rasterize_with(cloud, spec, spec.rows, spec.cols);
}

LabelGrid rasterize_labels(const PointCloud& cloud, const SfvSpec& spec) {
  spec.validate();
  return rasterize_with(cloud, spec, spec.rows, spec.cols);
}

void write_channel_pgm(const GridImage& image, int channel, const std::filesystem::path& path) {
  if (channel < 0 || channel >= image.channels()) {
    throw Error(ErrorCode::kInvalidArgument, "channel " + std::to_string(channel) + " out of range");
  }
  const int occupancy = image.kind() == GridKind::kBev ? 3 : 5;
  float lo = 0.0f;
  float hi = 1.0f;
  if (image.kind() == GridKind::kSfv && channel != 5) {
    lo = std::numeric_limits<float>::infinity();
    hi = -std::numeric_limits<float>::infinity();
    for (int r = 0; r < image.height(); ++r) {
      for (int c = 0; c < image.width(); ++c) {
        if (image.at(r, c, occupancy) <= 0.0f) continue;
        lo = std::min(lo, image.at(r, c, channel));
        hi = std::max(hi, image.at(r, c, channel));
      }
    }
    if (!(hi > lo)) {
      lo = 0.0f;
      hi = std::max(hi, 1.0f);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      float t = 0.0f;
      if (image.at(r, c, occupancy) > 0.0f) t = (image.at(r, c, channel) - lo) / (hi - lo);
      const auto byte = static_cast<unsigned char>(std::lround(std::clamp(t, 0.0f, 1.0f) * 255.0f));
      out.put(static_cast<char>(byte));
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed on " + path.string());
}

void write_label_ppm(const LabelGrid& labels, const std::filesystem::path& path) {
  static constexpr unsigned char kColors[kNumClasses][3] = {
      {128, 128, 128}, {0, 200, 0}, {220, 0, 0}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "P6\n" << labels.width() << ' ' << labels.height() << "\n255\n";
  for (ClassId c : labels.data()) {
    out.write(reinterpret_cast<const char*>(kColors[index_of(c)]), 3);
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed on " + path.string());
}

}  // namespace salsanet
