#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "salsanet/error.hpp"

namespace fixtures {

// Calibration file from a KITTI drive, including keys the parser ignores.
inline const std::string kKittiCalib =
    "P0: 7.215377e+02 0 6.095593e+02 0 0 7.215377e+02 1.728540e+02 0 0 0 1 0\n"
    "P2: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 4.485728000000e+01 "
    "0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.163791000000e-01 "
    "0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.745884000000e-03\n"
    "R0_rect: 9.999239000000e-01 9.837760000000e-03 -7.445048000000e-03 -9.869795000000e-03 "
    "9.999421000000e-01 -4.278459000000e-03 7.402527000000e-03 4.351614000000e-03 9.999631000000e-01\n"
    "Tr_velo_to_cam: 7.533745000000e-03 -9.999714000000e-01 -6.166020000000e-04 -4.069766000000e-03 "
    "1.480249000000e-02 7.280733000000e-04 -9.998902000000e-01 -7.631618000000e-02 "
    "9.998621000000e-01 7.523790000000e-03 1.480755000000e-02 -2.717806000000e-01\n"
    "Tr_imu_to_velo: 1 0 0 0 0 1 0 0 0 0 1 0\n";

// Pinhole camera at the LiDAR origin looking along +x, no rectification.
inline std::string axis_calib(double f = 100.0, double cx = 50.0, double cy = 20.0) {
  auto n = [](double v) { return std::to_string(v); };
  return "P2: " + n(f) + " 0 " + n(cx) + " 0 0 " + n(f) + " " + n(cy) + " 0 0 0 1 0\n" +
         "R0_rect: 1 0 0 0 1 0 0 0 1\n"
         "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n";
}

inline std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<std::byte>(s[i]);
  return out;
}

template <typename F>
salsanet::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const salsanet::Error& e) {
    return e.code();
  }
  return static_cast<salsanet::ErrorCode>(0);
}

template <typename F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const salsanet::Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace fixtures
