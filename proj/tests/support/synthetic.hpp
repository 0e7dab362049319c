#pragma once
// Synthetic labeled scenes for training and CLI tests. Points are placed strictly
// inside grid cells and every point in a cell shares that cell's class.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "salsanet/dataset.hpp"
#include "salsanet/pointcloud.hpp"

namespace synth {

using salsanet::ClassId;

// 32 x 16 BEV grid covering x in [0, 6.4), y in [-2.4, 2.4).
inline salsanet::InputSpec small_bev() {
  salsanet::InputSpec spec;
  spec.view = salsanet::GridKind::kBev;
  spec.bev.roi = {0.0, 6.4, -2.4, 2.4};
  spec.bev.cell_x = 0.2;
  spec.bev.cell_y = 0.3;
  spec.bev.rows = 32;
  spec.bev.cols = 16;
  return spec;
}

struct SceneOptions {
  int vehicles = 1;
  int vehicle_rows = 6;  // cells along x
  int vehicle_cols = 3;  // cells along y
  double empty_fraction = 0.1;
  // Background blobs shaped like vehicles whose height and intensity overlap theirs.
  int clutter = 0;
  double clutter_intensity = 0.45;  // vehicles draw from [0.55, 0.85)
};

inline salsanet::PointCloud make_scene(std::uint64_t seed, const salsanet::BevSpec& bev, const SceneOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int rows = bev.rows, cols = bev.cols;
  std::vector<ClassId> cell(static_cast<std::size_t>(rows * cols), ClassId::kBackground);

  // Road: a band of columns whose centre drifts with x.
  const double centre0 = cols * (0.35 + 0.3 * unit(rng));
  const double drift = (unit(rng) - 0.5) * 0.3;
  const double half = cols * (0.18 + 0.08 * unit(rng));
  for (int r = 0; r < rows; ++r) {
    const double centre = centre0 + drift * r;
    for (int c = 0; c < cols; ++c) {
      if (std::abs(c + 0.5 - centre) < half) cell[static_cast<std::size_t>(r * cols + c)] = ClassId::kRoad;
    }
  }
  std::vector<bool> clutter(cell.size(), false);
  for (int v = 0; v < opt.clutter; ++v) {
    const int r0 = static_cast<int>(unit(rng) * (rows - opt.vehicle_rows + 1));
    const int c0 = static_cast<int>(unit(rng) * (cols - opt.vehicle_cols + 1));
    for (int r = r0; r < r0 + opt.vehicle_rows; ++r)
      for (int c = c0; c < c0 + opt.vehicle_cols; ++c) {
        cell[static_cast<std::size_t>(r * cols + c)] = ClassId::kBackground;
        clutter[static_cast<std::size_t>(r * cols + c)] = true;
      }
  }
  for (int v = 0; v < opt.vehicles; ++v) {
    const int r0 = static_cast<int>(unit(rng) * (rows - opt.vehicle_rows + 1));
    const int c0 = static_cast<int>(unit(rng) * (cols - opt.vehicle_cols + 1));
    for (int r = r0; r < r0 + opt.vehicle_rows; ++r)
      for (int c = c0; c < c0 + opt.vehicle_cols; ++c) cell[static_cast<std::size_t>(r * cols + c)] = ClassId::kVehicle;
  }

  std::vector<salsanet::Point> points;
  std::vector<ClassId> labels;
  std::uniform_int_distribution<int> count(2, 6);
  std::normal_distribution<double> jitter(0.0, 0.02);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const ClassId cls = cell[static_cast<std::size_t>(r * cols + c)];
      const bool blob = clutter[static_cast<std::size_t>(r * cols + c)] && cls == ClassId::kBackground;
      if (cls != ClassId::kVehicle && !blob && unit(rng) < opt.empty_fraction) continue;
      const int n = count(rng);
      for (int k = 0; k < n; ++k) {
        const double x = bev.roi.x_min + (r + 0.1 + 0.8 * unit(rng)) * bev.cell_x;
        const double y = bev.roi.y_min + (c + 0.1 + 0.8 * unit(rng)) * bev.cell_y;
        double z = 0.0, intensity = 0.0;
        switch (cls) {
          case ClassId::kRoad:
            z = -1.7 + jitter(rng);
            intensity = 0.3 + 0.05 * unit(rng);
            break;
          case ClassId::kVehicle:
            z = -1.3 + 1.4 * unit(rng);
            intensity = 0.55 + 0.3 * unit(rng);
            break;
          case ClassId::kBackground:
            if (blob) {
              z = -1.3 + 1.4 * unit(rng);
              intensity = opt.clutter_intensity + 0.3 * unit(rng);
            } else {
              z = -1.6 + 1.2 * unit(rng) * unit(rng);
              intensity = 0.05 + 0.1 * unit(rng);
            }
            break;
        }
        points.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z),
                          static_cast<float>(intensity)});
        labels.push_back(cls);
      }
    }
  }
  return salsanet::PointCloud(std::move(points), std::move(labels));
}

inline std::vector<salsanet::Sample> make_samples(std::size_t n, std::uint64_t seed, const salsanet::InputSpec& spec,
                                                  const SceneOptions& opt = {}) {
  std::vector<salsanet::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%06zu", i);
    out.push_back(salsanet::sample_from_cloud(id, make_scene(seed * 1000 + i, spec.bev, opt), spec));
  }
  return out;
}

inline void write_samples(const std::filesystem::path& dir, std::size_t n, std::uint64_t seed,
                          const salsanet::InputSpec& spec, const SceneOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%06zu", i);
    salsanet::write_labeled_cloud(make_scene(seed * 1000 + i, spec.bev, opt), dir / (std::string(id) + ".bin"),
                                  dir / (std::string(id) + ".label"));
  }
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("salsanet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace synth
