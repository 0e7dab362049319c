// salsanet_cli: labeling, projection, training, evaluation and inference.
// Links only against the C interface.
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "salsanet/salsanet.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ok(sn_status s, const std::string& what) {
  if (s != SN_OK) throw Failure(what + ": " + sn_status_name(s) + ": " + sn_last_error());
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Cloud = Handle<sn_cloud, sn_cloud_free>;
using Calib = Handle<sn_calib, sn_calib_free>;
using Mask = Handle<sn_mask, sn_mask_free>;
using Boxes = Handle<sn_boxes, sn_boxes_free>;
using Grid = Handle<sn_grid, sn_grid_free>;
using Labels = Handle<sn_labels, sn_labels_free>;
using Config = Handle<sn_config, sn_config_free>;
using Model = Handle<sn_model, sn_model_free>;
using Confusion = Handle<sn_confusion, sn_confusion_free>;

struct Globals {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

void write_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed, json config, json inputs,
                    json outputs) {
  json m = {{"command", command},
            {"version", sn_version()},
            {"seed", seed},
            {"config", std::move(config)},
            {"inputs", std::move(inputs)},
            {"outputs", std::move(outputs)}};
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  f << m.dump(2) << '\n';
  if (!f) throw Failure("cannot write " + (dir / "manifest.json").string());
}

void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw Failure(std::string(what) + " '" + dir.string() + "' is not a directory");
}

// Stems of files in dir ending with suffix, sorted.
std::vector<std::string> stems(const fs::path& dir, const std::string& suffix) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs work(i) for i in [0, n) on up to jobs threads. Returns per-index error text (empty on success).
template <typename F>
std::vector<std::string> parallel_frames(std::size_t n, unsigned jobs, F work) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

sn_view parse_view(const std::string& v) { return v == "sfv" ? SN_VIEW_SFV : SN_VIEW_BEV; }

int cmd_autolabel(const Globals& g, const fs::path& scan_dir, const fs::path& calib_dir, const fs::path& mask_dir,
                  const fs::path& box_dir, const fs::path& out_dir) {
  require_dir(scan_dir, "scan dir");
  require_dir(calib_dir, "calib dir");
  const auto ids = stems(scan_dir, ".bin");
  if (ids.empty()) throw Failure("no frames in " + scan_dir.string());
  fs::create_directories(out_dir);

  struct FrameResult {
    bool skipped = false;
    std::uint64_t counts[3] = {0, 0, 0};
  };
  std::vector<FrameResult> results(ids.size());
  const auto errors = parallel_frames(ids.size(), g.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    const fs::path calib_path = calib_dir / (id + ".txt");
    if (!fs::exists(calib_path)) {
      results[i].skipped = true;
      return;
    }
    Calib calib;
    ok(sn_calib_load(calib_path.c_str(), calib.out()), "frame " + id);
    Cloud cloud;
    ok(sn_cloud_load_scan((scan_dir / (id + ".bin")).c_str(), cloud.out(), nullptr), "frame " + id);
    Mask mask;
    const fs::path mask_path = mask_dir / (id + ".pgm");
    if (!mask_dir.empty() && fs::exists(mask_path)) ok(sn_mask_load_pgm(mask_path.c_str(), 128, mask.out()), "frame " + id);
    Boxes boxes;
    const fs::path box_path = box_dir / (id + ".txt");
    if (!box_dir.empty() && fs::exists(box_path)) {
      ok(sn_boxes_load_kitti(box_path.c_str(), calib.get(), boxes.out()), "frame " + id);
    }
    ok(sn_autolabel(cloud.get(), calib.get(), mask.get(), boxes.get()), "frame " + id);
    ok(sn_cloud_save_labeled(cloud.get(), (out_dir / (id + ".bin")).c_str(), (out_dir / (id + ".label")).c_str()),
       "frame " + id);
    ok(sn_cloud_class_counts(cloud.get(), results[i].counts), "frame " + id);
  });

  std::uint64_t totals[3] = {0, 0, 0};
  std::size_t done = 0;
  json frames = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!errors[i].empty()) throw Failure(errors[i]);
    if (results[i].skipped) {
      std::cerr << "warning: frame " << ids[i] << ": no calibration file, skipped\n";
      continue;
    }
    for (int c = 0; c < 3; ++c) totals[c] += results[i].counts[c];
    frames.push_back(ids[i]);
    ++done;
  }
  if (done == 0) throw Failure("no frames processed");
  std::cout << "labeled " << done << " frames: background=" << totals[0] << " road=" << totals[1]
            << " vehicle=" << totals[2] << '\n';
  write_manifest(out_dir, "autolabel", g.seed, json::object(),
                 {{"scan_dir", scan_dir.string()},
                  {"calib_dir", calib_dir.string()},
                  {"mask_dir", mask_dir.string()},
                  {"box_dir", box_dir.string()}},
                 {{"out_dir", out_dir.string()}, {"frames", frames}});
  return 0;
}

int cmd_project(const Globals& g, const fs::path& labeled_dir, const std::string& view_name, const fs::path& out_dir,
                bool export_ppm) {
  require_dir(labeled_dir, "labeled dir");
  std::vector<std::string> ids;
  for (const auto& id : stems(labeled_dir, ".bin")) {
    if (fs::exists(labeled_dir / (id + ".label"))) ids.push_back(id);
  }
  if (ids.empty()) throw Failure("no frames in " + labeled_dir.string());
  fs::create_directories(out_dir);
  const sn_view view = parse_view(view_name);

  const auto errors = parallel_frames(ids.size(), g.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    const std::string what = "frame " + id;
    Cloud cloud;
    ok(sn_cloud_load_labeled((labeled_dir / (id + ".bin")).c_str(), (labeled_dir / (id + ".label")).c_str(),
                             cloud.out()),
       what);
    Grid grid;
    ok(sn_project(cloud.get(), view, grid.out()), what);
    Labels labels;
    ok(sn_rasterize_labels(cloud.get(), view, labels.out()), what);
    ok(sn_grid_save_tnsr(grid.get(), (out_dir / (id + ".grid.tnsr")).c_str()), what);
    ok(sn_labels_save_tnsr(labels.get(), (out_dir / (id + ".labels.tnsr")).c_str()), what);
    if (export_ppm) ok(sn_labels_save_ppm(labels.get(), (out_dir / (id + ".labels.ppm")).c_str()), what);
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Failure(e);
  }
  std::cout << "projected " << ids.size() << " frames (" << view_name << ")\n";
  write_manifest(out_dir, "project", g.seed, {{"view", view_name}, {"export_ppm", export_ppm}},
                 {{"labeled_dir", labeled_dir.string()}}, {{"out_dir", out_dir.string()}, {"frames", ids}});
  return 0;
}

int cmd_train(const Globals& g, bool seed_given, const fs::path& config_path,
              const std::vector<std::string>& overrides) {
  Config config;
  ok(sn_config_load(config_path.c_str(), config.out()), "config " + config_path.string());
  if (seed_given) ok(sn_config_set(config.get(), "seed", std::to_string(g.seed).c_str()), "--seed");
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure("--set expects key=value, got '" + kv + "'");
    ok(sn_config_set(config.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
  }
  const json resolved = json::parse(sn_config_json(config.get()));
  const fs::path out_dir = resolved.at("out_dir").get<std::string>();
  if (out_dir.empty()) throw Failure("config key 'out_dir': required");
  Model model;
  ok(sn_train(config.get(), model.out()), "train");
  std::cout << "checkpoint written to " << (out_dir / "checkpoint.snck").string() << '\n';
  write_manifest(out_dir, "train", resolved.at("seed").get<std::uint64_t>(), resolved,
                 {{"config", config_path.string()}, {"data_dir", resolved.at("data_dir")}},
                 {{"checkpoint", (out_dir / "checkpoint.snck").string()},
                  {"log", (out_dir / "train_log.csv").string()}});
  return 0;
}

int cmd_eval(const Globals& g, const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out_dir,
             bool identity) {
  require_dir(data_dir, "data dir");
  Model model;
  ok(sn_model_load(checkpoint.c_str(), model.out()), "checkpoint " + checkpoint.string());

  const auto grid_ids = stems(data_dir, ".grid.tnsr");
  std::vector<std::string> cloud_ids;
  for (const auto& id : stems(data_dir, ".bin")) {
    if (fs::exists(data_dir / (id + ".label"))) cloud_ids.push_back(id);
  }
  const bool tensors = !grid_ids.empty();
  const auto& ids = tensors ? grid_ids : cloud_ids;
  if (ids.empty()) throw Failure("no frames in " + data_dir.string());

  Confusion cm;
  ok(sn_confusion_create(cm.out()), "confusion");
  for (const auto& id : ids) {
    const std::string what = "frame " + id;
    Grid grid;
    Labels gt;
    if (tensors) {
      ok(sn_grid_load_tnsr((data_dir / (id + ".grid.tnsr")).c_str(), grid.out()), what);
      ok(sn_labels_load_tnsr((data_dir / (id + ".labels.tnsr")).c_str(), gt.out()), what);
    } else {
      Cloud cloud;
      ok(sn_cloud_load_labeled((data_dir / (id + ".bin")).c_str(), (data_dir / (id + ".label")).c_str(), cloud.out()),
         what);
      ok(sn_model_project(model.get(), cloud.get(), grid.out()), what);
      ok(sn_model_rasterize_labels(model.get(), cloud.get(), gt.out()), what);
    }
    Labels pred;
    if (!identity) ok(sn_model_infer(model.get(), grid.get(), pred.out()), what);
    ok(sn_confusion_accumulate(cm.get(), identity ? gt.get() : pred.get(), gt.get()), what);
  }
  fs::create_directories(out_dir);
  ok(sn_confusion_write_csv(cm.get(), (out_dir / "metrics.csv").c_str()), "metrics");
  double miou = 0.0;
  ok(sn_confusion_mean_iou(cm.get(), &miou), "metrics");
  std::printf("evaluated %zu frames, mean IoU %.4f\n", ids.size(), miou);
  write_manifest(out_dir, "eval", g.seed, {{"identity", identity}},
                 {{"checkpoint", checkpoint.string()}, {"data_dir", data_dir.string()}, {"frames", ids}},
                 {{"metrics", (out_dir / "metrics.csv").string()}});
  return 0;
}

int cmd_infer(const Globals& g, const fs::path& checkpoint, const fs::path& scan, const fs::path& out_dir,
              bool export_ppm) {
  Model model;
  ok(sn_model_load(checkpoint.c_str(), model.out()), "checkpoint " + checkpoint.string());
  Cloud cloud;
  std::size_t dropped = 0;
  ok(sn_cloud_load_scan(scan.c_str(), cloud.out(), &dropped), "scan " + scan.string());
  if (dropped > 0) std::cerr << "warning: dropped " << dropped << " non-finite points\n";
  Grid grid;
  ok(sn_model_project(model.get(), cloud.get(), grid.out()), "project");
  Labels pred;
  ok(sn_model_infer(model.get(), grid.get(), pred.out()), "infer");
  fs::create_directories(out_dir);
  const std::string stem = scan.stem().string();
  json outputs = {{"labels", (out_dir / (stem + ".labels.tnsr")).string()}};
  ok(sn_labels_save_tnsr(pred.get(), (out_dir / (stem + ".labels.tnsr")).c_str()), "write labels");
  if (export_ppm) {
    ok(sn_labels_save_ppm(pred.get(), (out_dir / (stem + ".labels.ppm")).c_str()), "write ppm");
    outputs["ppm"] = (out_dir / (stem + ".labels.ppm")).string();
  }
  write_manifest(out_dir, "infer", g.seed, {{"export_ppm", export_ppm}},
                 {{"checkpoint", checkpoint.string()}, {"scan", scan.string()}}, outputs);
  std::cout << "labels written to " << outputs["labels"].get<std::string>() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SalsaNet LiDAR road and vehicle segmentation"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads for per-frame commands")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();

  std::string scan_dir, calib_dir, mask_dir, box_dir, out_dir, labeled_dir, config_path, checkpoint, data_dir, scan;
  std::string view = "bev";
  bool export_ppm = false;
  bool identity = false;
  std::vector<std::string> overrides;

  auto* al = app.add_subcommand("autolabel", "transfer image-space labels onto LiDAR points");
  al->add_option("scan_dir", scan_dir)->required();
  al->add_option("calib_dir", calib_dir)->required();
  al->add_option("mask_dir", mask_dir, "road masks <id>.pgm")->required();
  al->add_option("box_dir", box_dir, "KITTI object labels <id>.txt")->required();
  al->add_option("out_dir", out_dir)->required();

  auto* pr = app.add_subcommand("project", "rasterize labeled clouds to grid and label tensors");
  pr->add_option("labeled_dir", labeled_dir)->required();
  pr->add_option("out_dir", out_dir)->required();
  pr->add_option("--view", view)->check(CLI::IsMember({"bev", "sfv"}))->capture_default_str();
  pr->add_flag("--export-ppm", export_ppm, "also write class-colored PPM images");

  auto* tr = app.add_subcommand("train", "train a network from a config file");
  tr->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  tr->add_option("--set", overrides, "override a config entry, key=value");

  auto* ev = app.add_subcommand("eval", "score a checkpoint on a labeled dataset");
  ev->add_option("checkpoint", checkpoint)->required();
  ev->add_option("data_dir", data_dir)->required();
  ev->add_option("out_dir", out_dir)->required();
  ev->add_flag("--identity", identity, "score ground truth against itself, bypassing the network");

  auto* in = app.add_subcommand("infer", "segment one scan");
  in->add_option("checkpoint", checkpoint)->required();
  in->add_option("scan", scan)->required();
  in->add_option("out_dir", out_dir)->required();
  in->add_flag("--export-ppm", export_ppm, "also write a class-colored PPM image");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? 0 : std::max(code, 2);
  }

  try {
    if (*al) return cmd_autolabel(g, scan_dir, calib_dir, mask_dir, box_dir, out_dir);
    if (*pr) return cmd_project(g, labeled_dir, view, out_dir, export_ppm);
    if (*tr) return cmd_train(g, seed_opt->count() > 0, config_path, overrides);
    if (*ev) return cmd_eval(g, checkpoint, data_dir, out_dir, identity);
    if (*in) return cmd_infer(g, checkpoint, scan, out_dir, export_ppm);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
