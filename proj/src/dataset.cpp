#include "salsanet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "salsanet/error.hpp"

namespace salsanet {

namespace fs = std::filesystem;

void InputSpec::validate() const {
  if (view == GridKind::kBev) {
    bev.validate();
  } else {
    sfv.validate();
  }
}

GridImage InputSpec::project(const PointCloud& cloud) const {
  return view == GridKind::kBev ? project_bev(cloud, bev) : project_sfv(cloud, sfv);
}

LabelGrid InputSpec::rasterize(const PointCloud& cloud) const {
  return view == GridKind::kBev ? rasterize_labels(cloud, bev) : rasterize_labels(cloud, sfv);
}

std::string InputSpec::to_json() const {
  nlohmann::json j;
  j["view"] = view_name(view);
  if (view == GridKind::kBev) {
    j["bev"] = {{"x_min", bev.roi.x_min}, {"x_max", bev.roi.x_max}, {"y_min", bev.roi.y_min},
                {"y_max", bev.roi.y_max}, {"cell_x", bev.cell_x},   {"cell_y", bev.cell_y},
                {"rows", bev.rows},       {"cols", bev.cols}};
  } else {
    j["sfv"] = {{"azimuth_fov_deg", sfv.azimuth_fov_deg}, {"zenith_min_deg", sfv.zenith_min_deg},
                {"zenith_max_deg", sfv.zenith_max_deg},   {"rows", sfv.rows},
                {"cols", sfv.cols}};
  }
  return j.dump();
}

InputSpec InputSpec::from_json(std::string_view text) {
  InputSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    spec.view = parse_view(j.at("view").get<std::string>());
    if (spec.view == GridKind::kBev) {
      const auto& b = j.at("bev");
      spec.bev.roi = {b.at("x_min").get<double>(), b.at("x_max").get<double>(), b.at("y_min").get<double>(),
                      b.at("y_max").get<double>()};
      spec.bev.cell_x = b.at("cell_x").get<double>();
      spec.bev.cell_y = b.at("cell_y").get<double>();
      spec.bev.rows = b.at("rows").get<int>();
      spec.bev.cols = b.at("cols").get<int>();
    } else {
      const auto& s = j.at("sfv");
      spec.sfv.azimuth_fov_deg = s.at("azimuth_fov_deg").get<double>();
      spec.sfv.zenith_min_deg = s.at("zenith_min_deg").get<double>();
      spec.sfv.zenith_max_deg = s.at("zenith_max_deg").get<double>();
      spec.sfv.rows = s.at("rows").get<int>();
      spec.sfv.cols = s.at("cols").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptData, std::string("input spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

const char* view_name(GridKind view) { return view == GridKind::kBev ? "bev" : "sfv"; }

GridKind parse_view(std::string_view name) {
  if (name == "bev") return GridKind::kBev;
  if (name == "sfv") return GridKind::kSfv;
  throw Error(ErrorCode::kInvalidArgument, "unknown view '" + std::string(name) + "' (expected bev or sfv)");
}

nn::Tensor grid_to_tensor(const GridImage& grid) {
  return nn::Tensor({static_cast<std::size_t>(grid.height()), static_cast<std::size_t>(grid.width()),
                     static_cast<std::size_t>(grid.channels())},
                    grid.data());
}

GridImage tensor_to_grid(const nn::Tensor& t) {
  if (t.rank() != 3 || (t.dim(2) != kBevChannels && t.dim(2) != kSfvChannels)) {
    throw Error(ErrorCode::kShape, "grid tensor must be (H, W, 4) or (H, W, 6), got " + nn::to_string(t.shape()));
  }
  const GridKind kind = t.dim(2) == kBevChannels ? GridKind::kBev : GridKind::kSfv;
  return GridImage(kind, static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)),
                   std::vector<float>(t.values().begin(), t.values().end()));
}

nn::Tensor labels_to_tensor(const LabelGrid& labels) {
  nn::Tensor t({static_cast<std::size_t>(labels.height()), static_cast<std::size_t>(labels.width())});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(index_of(labels.data()[i]));
  return t;
}

LabelGrid tensor_to_labels(const nn::Tensor& t) {
  if (t.rank() != 2) throw Error(ErrorCode::kShape, "label tensor must be (H, W), got " + nn::to_string(t.shape()));
  std::vector<ClassId> data(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float v = t[i];
    if (!(v == 0.0f || v == 1.0f || v == 2.0f)) {
      throw Error(ErrorCode::kCorruptData, "label tensor holds a non-class value at index " + std::to_string(i));
    }
    data[i] = static_cast<ClassId>(static_cast<std::uint8_t>(v));
  }
  return LabelGrid(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)), std::move(data));
}

nn::Tensor to_nchw(std::span<const GridImage* const> grids) {
  if (grids.empty()) throw Error(ErrorCode::kEmptyInput, "cannot batch zero grids");
  const GridImage& first = *grids.front();
  const std::size_t h = static_cast<std::size_t>(first.height());
  const std::size_t w = static_cast<std::size_t>(first.width());
  const std::size_t c = static_cast<std::size_t>(first.channels());
  nn::Tensor batch({grids.size(), c, h, w});
  for (std::size_t n = 0; n < grids.size(); ++n) {
    const GridImage& g = *grids[n];
    if (g.height() != first.height() || g.width() != first.width() || g.channels() != first.channels()) {
      throw Error(ErrorCode::kShape, "batch mixes grids of different sizes");
    }
    const auto& src = g.data();
    for (std::size_t p = 0; p < h * w; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) batch[(n * c + ch) * h * w + p] = src[p * c + ch];
    }
  }
  return batch;
}

Sample sample_from_cloud(std::string id, PointCloud cloud, const InputSpec& spec) {
  Sample s;
  s.id = std::move(id);
  s.grid = spec.project(cloud);
  s.labels = spec.rasterize(cloud);
  s.cloud = std::move(cloud);
  return s;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<Sample> load_dataset_dir(const fs::path& dir, const InputSpec& spec) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, dir.string() + " is not a directory");
  spec.validate();
  std::map<std::string, fs::path> scans;
  std::map<std::string, fs::path> grids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (ends_with(name, ".bin")) {
      scans[name.substr(0, name.size() - 4)] = entry.path();
    } else if (ends_with(name, ".grid.tnsr")) {
      grids[name.substr(0, name.size() - 10)] = entry.path();
    }
  }
  std::vector<Sample> samples;
  for (const auto& [id, scan] : scans) {
    const fs::path label = dir / (id + ".label");
    if (!fs::exists(label)) continue;
    samples.push_back(sample_from_cloud(id, read_labeled_cloud(scan, label), spec));
  }
  if (samples.empty()) {
    for (const auto& [id, grid_path] : grids) {
      const fs::path label_path = dir / (id + ".labels.tnsr");
      if (!fs::exists(label_path)) continue;
      Sample s;
      s.id = id;
      s.grid = tensor_to_grid(nn::load_tnsr(grid_path));
      s.labels = tensor_to_labels(nn::load_tnsr(label_path));
      if (s.grid.kind() != spec.view || s.grid.height() != spec.rows() || s.grid.width() != spec.cols() ||
          s.labels.height() != spec.rows() || s.labels.width() != spec.cols()) {
        throw Error(ErrorCode::kShape, grid_path.string() + ": grid does not match the " +
                                           std::string(view_name(spec.view)) + " input of " +
                                           std::to_string(spec.rows()) + "x" + std::to_string(spec.cols()));
      }
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "no frames found in " + dir.string());
  return samples;
}

}  // namespace salsanet
