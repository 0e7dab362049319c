#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "salsanet/projection.hpp"
#include "salsanet/tensor.hpp"

namespace salsanet {

// Which raster the network consumes, and its geometry.
struct InputSpec {
  GridKind view = GridKind::kBev;
  BevSpec bev{};
  SfvSpec sfv{};

  int rows() const { return view == GridKind::kBev ? bev.rows : sfv.rows; }
  int cols() const { return view == GridKind::kBev ? bev.cols : sfv.cols; }
  int channels() const { return view == GridKind::kBev ? kBevChannels : kSfvChannels; }

  void validate() const;
  GridImage project(const PointCloud& cloud) const;
  LabelGrid rasterize(const PointCloud& cloud) const;

  std::string to_json() const;
  static InputSpec from_json(std::string_view text);
};

const char* view_name(GridKind view);
// Accepts "bev" or "sfv"; throws kInvalidArgument otherwise.
GridKind parse_view(std::string_view name);

// GridImage <-> TNSR tensor with dims (H, W, C).
nn::Tensor grid_to_tensor(const GridImage& grid);
GridImage tensor_to_grid(const nn::Tensor& t);
// LabelGrid <-> TNSR tensor with dims (H, W) holding class ids as floats.
nn::Tensor labels_to_tensor(const LabelGrid& labels);
LabelGrid tensor_to_labels(const nn::Tensor& t);

// Stacks H x W x C grids into an N x C x H x W batch.
nn::Tensor to_nchw(std::span<const GridImage* const> grids);

struct Sample {
  std::string id;
  std::optional<PointCloud> cloud;  // present for labeled clouds; enables augmentation
  GridImage grid;
  LabelGrid labels;
};

Sample sample_from_cloud(std::string id, PointCloud cloud, const InputSpec& spec);

// Loads a directory of labeled clouds (<id>.bin + <id>.label) or projected pairs
// (<id>.grid.tnsr + <id>.labels.tnsr), sorted by id. Throws kEmptyInput when none are found.
std::vector<Sample> load_dataset_dir(const std::filesystem::path& dir, const InputSpec& spec);

}  // namespace salsanet
