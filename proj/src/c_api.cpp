#include "salsanet/salsanet.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "salsanet/autolabel.hpp"
#include "salsanet/dataset.hpp"
#include "salsanet/error.hpp"
#include "salsanet/geometry.hpp"
#include "salsanet/io.hpp"
#include "salsanet/metrics.hpp"
#include "salsanet/training.hpp"

struct sn_cloud {
  salsanet::PointCloud cloud;
};
struct sn_calib {
  salsanet::CalibrationSet calib;
};
struct sn_mask {
  salsanet::SegMask mask;
};
struct sn_boxes {
  std::vector<salsanet::Box3D> boxes;
};
struct sn_grid {
  salsanet::GridImage grid;
};
struct sn_labels {
  salsanet::LabelGrid labels;
};
struct sn_config {
  salsanet::TrainConfig config;
  std::string json;
};
struct sn_model {
  salsanet::nn::SalsaNet net;
  salsanet::InputSpec input;
  std::uint64_t iteration = 0;
};
struct sn_confusion {
  salsanet::ConfusionMatrix cm;
};

namespace {

using salsanet::Error;
using salsanet::ErrorCode;

thread_local std::string g_last_error;

sn_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return SN_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return SN_ERR_IO;
    case ErrorCode::kMalformedScan: return SN_ERR_MALFORMED_SCAN;
    case ErrorCode::kCalibParse: return SN_ERR_CALIB_PARSE;
    case ErrorCode::kShape: return SN_ERR_SHAPE;
    case ErrorCode::kDegenerateBatch: return SN_ERR_DEGENERATE_BATCH;
    case ErrorCode::kUndefinedAngle: return SN_ERR_UNDEFINED_ANGLE;
    case ErrorCode::kLengthMismatch: return SN_ERR_LENGTH_MISMATCH;
    case ErrorCode::kConfig: return SN_ERR_CONFIG;
    case ErrorCode::kEmptyInput: return SN_ERR_EMPTY_INPUT;
    case ErrorCode::kNonFinite: return SN_ERR_NON_FINITE;
    case ErrorCode::kCorruptData: return SN_ERR_CORRUPT_DATA;
  }
  return SN_ERR_INTERNAL;
}

template <typename F>
sn_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SN_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SN_ERR_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SN_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must not be null");
}

salsanet::InputSpec default_input(sn_view view) {
  salsanet::InputSpec spec;
  if (view == SN_VIEW_BEV) {
    spec.view = salsanet::GridKind::kBev;
  } else if (view == SN_VIEW_SFV) {
    spec.view = salsanet::GridKind::kSfv;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown view " + std::to_string(static_cast<int>(view)));
  }
  return spec;
}

std::string config_json(const salsanet::TrainConfig& c) {
  nlohmann::json j = {{"lr0", c.lr0},
                      {"lr_decay", c.lr_decay},
                      {"decay_every", c.decay_every},
                      {"dropout", c.dropout},
                      {"batch_size", c.batch_size},
                      {"epochs", c.epochs},
                      {"max_iterations", c.max_iterations},
                      {"adam_beta1", c.adam_beta1},
                      {"adam_beta2", c.adam_beta2},
                      {"adam_eps", c.adam_eps},
                      {"augment", c.augment},
                      {"flip_probability", c.flip_probability},
                      {"noise_probability", c.noise_probability},
                      {"noise_sigma", c.noise_sigma},
                      {"max_rotation_deg", c.max_rotation_deg},
                      {"class_weights", c.class_weights},
                      {"bn_momentum", c.bn_momentum},
                      {"seed", c.seed},
                      {"checkpoint_every", c.checkpoint_every},
                      {"data_dir", c.data_dir},
                      {"out_dir", c.out_dir},
                      {"input", nlohmann::json::parse(c.input.to_json())}};
  return j.dump();
}

}  // namespace

extern "C" {

const char* sn_version(void) { return "1.0.0"; }

const char* sn_last_error(void) { return g_last_error.c_str(); }

const char* sn_status_name(sn_status status) {
  switch (status) {
    case SN_OK: return "ok";
    case SN_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case SN_ERR_IO: return "io";
    case SN_ERR_MALFORMED_SCAN: return "malformed-scan";
    case SN_ERR_CALIB_PARSE: return "calib-parse";
    case SN_ERR_SHAPE: return "shape";
    case SN_ERR_DEGENERATE_BATCH: return "degenerate-batch";
    case SN_ERR_UNDEFINED_ANGLE: return "undefined-angle";
    case SN_ERR_LENGTH_MISMATCH: return "length-mismatch";
    case SN_ERR_CONFIG: return "config";
    case SN_ERR_EMPTY_INPUT: return "empty-input";
    case SN_ERR_NON_FINITE: return "non-finite";
    case SN_ERR_CORRUPT_DATA: return "corrupt-data";
    case SN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

sn_status sn_cloud_load_scan(const char* path, sn_cloud** out, size_t* dropped) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto scan = salsanet::read_kitti_scan_file(path);
    if (dropped) *dropped = scan.dropped_non_finite;
    *out = new sn_cloud{std::move(scan.cloud)};
  });
}

sn_status sn_cloud_load_labeled(const char* scan_path, const char* label_path, sn_cloud** out) {
  return guarded([&] {
    require(scan_path, "scan_path");
    require(label_path, "label_path");
    require(out, "out");
    *out = new sn_cloud{salsanet::read_labeled_cloud(scan_path, label_path)};
  });
}

sn_status sn_cloud_save_labeled(const sn_cloud* cloud, const char* scan_path, const char* label_path) {
  return guarded([&] {
    require(cloud, "cloud");
    require(scan_path, "scan_path");
    require(label_path, "label_path");
    salsanet::write_labeled_cloud(cloud->cloud, scan_path, label_path);
  });
}

sn_status sn_cloud_size(const sn_cloud* cloud, size_t* out) {
  return guarded([&] {
    require(cloud, "cloud");
    require(out, "out");
    *out = cloud->cloud.size();
  });
}

sn_status sn_cloud_class_counts(const sn_cloud* cloud, uint64_t counts[3]) {
  return guarded([&] {
    require(cloud, "cloud");
    require(counts, "counts");
    if (!cloud->cloud.has_labels()) throw Error(ErrorCode::kInvalidArgument, "cloud has no labels");
    counts[0] = counts[1] = counts[2] = 0;
    for (salsanet::ClassId c : cloud->cloud.labels()) ++counts[salsanet::index_of(c)];
  });
}

void sn_cloud_free(sn_cloud* cloud) { delete cloud; }

sn_status sn_calib_load(const char* path, sn_calib** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    try {
      *out = new sn_calib{salsanet::parse_kitti_calib(salsanet::io::read_text_file(path))};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kCalibParse) throw Error(e.code(), std::string(path) + ": " + e.what());
      throw;
    }
  });
}

void sn_calib_free(sn_calib* calib) { delete calib; }

sn_status sn_mask_load_pgm(const char* path, uint8_t threshold, sn_mask** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_mask{salsanet::read_pgm_mask_file(path, threshold)};
  });
}

void sn_mask_free(sn_mask* mask) { delete mask; }

sn_status sn_boxes_load_kitti(const char* path, const sn_calib* calib, sn_boxes** out) {
  return guarded([&] {
    require(path, "path");
    require(calib, "calib");
    require(out, "out");
    *out = new sn_boxes{salsanet::vehicle_boxes(salsanet::io::read_text_file(path), calib->calib)};
  });
}

sn_status sn_boxes_count(const sn_boxes* boxes, size_t* out) {
  return guarded([&] {
    require(boxes, "boxes");
    require(out, "out");
    *out = boxes->boxes.size();
  });
}

void sn_boxes_free(sn_boxes* boxes) { delete boxes; }

sn_status sn_autolabel(sn_cloud* cloud, const sn_calib* calib, const sn_mask* mask, const sn_boxes* boxes) {
  return guarded([&] {
    require(cloud, "cloud");
    if (mask) require(calib, "calib");
    const auto& pc = cloud->cloud;
    std::vector<salsanet::ClassId> road(pc.size(), salsanet::ClassId::kBackground);
    std::vector<salsanet::ClassId> vehicle(pc.size(), salsanet::ClassId::kBackground);
    if (mask) road = salsanet::label_from_mask(pc, calib->calib, mask->mask);
    if (boxes) vehicle = salsanet::label_from_boxes(pc, boxes->boxes);
    cloud->cloud = pc.with_labels(salsanet::merge_labels(road, vehicle));
  });
}

sn_status sn_project(const sn_cloud* cloud, sn_view view, sn_grid** out) {
  return guarded([&] {
    require(cloud, "cloud");
    require(out, "out");
    *out = new sn_grid{default_input(view).project(cloud->cloud)};
  });
}

sn_status sn_rasterize_labels(const sn_cloud* cloud, sn_view view, sn_labels** out) {
  return guarded([&] {
    require(cloud, "cloud");
    require(out, "out");
    *out = new sn_labels{default_input(view).rasterize(cloud->cloud)};
  });
}

sn_status sn_grid_dims(const sn_grid* grid, size_t dims[3]) {
  return guarded([&] {
    require(grid, "grid");
    require(dims, "dims");
    dims[0] = static_cast<size_t>(grid->grid.height());
    dims[1] = static_cast<size_t>(grid->grid.width());
    dims[2] = static_cast<size_t>(grid->grid.channels());
  });
}

sn_status sn_grid_save_tnsr(const sn_grid* grid, const char* path) {
  return guarded([&] {
    require(grid, "grid");
    require(path, "path");
    salsanet::nn::save_tnsr(salsanet::grid_to_tensor(grid->grid), path);
  });
}

sn_status sn_grid_load_tnsr(const char* path, sn_grid** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_grid{salsanet::tensor_to_grid(salsanet::nn::load_tnsr(path))};
  });
}

sn_status sn_grid_save_pgm(const sn_grid* grid, int channel, const char* path) {
  return guarded([&] {
    require(grid, "grid");
    require(path, "path");
    salsanet::write_channel_pgm(grid->grid, channel, path);
  });
}

void sn_grid_free(sn_grid* grid) { delete grid; }

sn_status sn_labels_dims(const sn_labels* labels, size_t dims[2]) {
  return guarded([&] {
    require(labels, "labels");
    require(dims, "dims");
    dims[0] = static_cast<size_t>(labels->labels.height());
    dims[1] = static_cast<size_t>(labels->labels.width());
  });
}

sn_status sn_labels_copy(const sn_labels* labels, uint8_t* out, size_t capacity) {
  return guarded([&] {
    require(labels, "labels");
    require(out, "out");
    const auto& data = labels->labels.data();
    if (capacity < data.size()) {
      throw Error(ErrorCode::kInvalidArgument, "buffer holds " + std::to_string(capacity) + " cells, need " +
                                                   std::to_string(data.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<uint8_t>(data[i]);
  });
}

sn_status sn_labels_save_tnsr(const sn_labels* labels, const char* path) {
  return guarded([&] {
    require(labels, "labels");
    require(path, "path");
    salsanet::nn::save_tnsr(salsanet::labels_to_tensor(labels->labels), path);
  });
}

sn_status sn_labels_load_tnsr(const char* path, sn_labels** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_labels{salsanet::tensor_to_labels(salsanet::nn::load_tnsr(path))};
  });
}

sn_status sn_labels_save_ppm(const sn_labels* labels, const char* path) {
  return guarded([&] {
    require(labels, "labels");
    require(path, "path");
    salsanet::write_label_ppm(labels->labels, path);
  });
}

void sn_labels_free(sn_labels* labels) { delete labels; }

sn_status sn_config_load(const char* path, sn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_config{salsanet::load_train_config(path), {}};
  });
}

sn_status sn_config_default(sn_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sn_config{};
  });
}

sn_status sn_config_set(sn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    salsanet::TrainConfig updated = config->config;
    salsanet::set_config_value(updated, key, value);
    updated.validate();
    config->config = std::move(updated);
  });
}

const char* sn_config_json(sn_config* config) {
  if (config == nullptr) return "{}";
  config->json = config_json(config->config);
  return config->json.c_str();
}

void sn_config_free(sn_config* config) { delete config; }

sn_status sn_train(const sn_config* config, sn_model** out) {
  return guarded([&] {
    require(config, "config");
    auto result = salsanet::run_training(config->config);
    if (out) *out = new sn_model{std::move(result.net), config->config.input, result.iterations};
  });
}

sn_status sn_model_load(const char* path, sn_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const auto ckpt = salsanet::nn::load_checkpoint(path);
    if (ckpt.input_spec.empty()) throw Error(ErrorCode::kCorruptData, std::string(path) + ": checkpoint has no input spec");
    auto input = salsanet::InputSpec::from_json(ckpt.input_spec);
    if (ckpt.arch.in_channels != static_cast<std::size_t>(input.channels())) {
      throw Error(ErrorCode::kCorruptData, std::string(path) + ": architecture does not match its input view");
    }
    *out = new sn_model{salsanet::nn::restore_network(ckpt), input, ckpt.iteration};
  });
}

sn_status sn_model_save(const sn_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    auto& net = const_cast<salsanet::nn::SalsaNet&>(model->net);
    salsanet::nn::save_checkpoint(salsanet::nn::make_checkpoint(net, model->iteration, model->input.to_json()), path);
  });
}

sn_status sn_model_view(const sn_model* model, sn_view* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->input.view == salsanet::GridKind::kBev ? SN_VIEW_BEV : SN_VIEW_SFV;
  });
}

sn_status sn_model_project(const sn_model* model, const sn_cloud* cloud, sn_grid** out) {
  return guarded([&] {
    require(model, "model");
    require(cloud, "cloud");
    require(out, "out");
    *out = new sn_grid{model->input.project(cloud->cloud)};
  });
}

sn_status sn_model_rasterize_labels(const sn_model* model, const sn_cloud* cloud, sn_labels** out) {
  return guarded([&] {
    require(model, "model");
    require(cloud, "cloud");
    require(out, "out");
    *out = new sn_labels{model->input.rasterize(cloud->cloud)};
  });
}

sn_status sn_model_infer(const sn_model* model, const sn_grid* grid, sn_labels** out) {
  return guarded([&] {
    require(model, "model");
    require(grid, "grid");
    require(out, "out");
    const auto& g = grid->grid;
    if (g.kind() != model->input.view || g.height() != model->input.rows() || g.width() != model->input.cols()) {
      throw Error(ErrorCode::kShape, "grid " + std::to_string(g.height()) + "x" + std::to_string(g.width()) + "x" +
                                         std::to_string(g.channels()) + " does not match the model's " +
                                         salsanet::view_name(model->input.view) + " input " +
                                         std::to_string(model->input.rows()) + "x" +
                                         std::to_string(model->input.cols()) + "x" +
                                         std::to_string(model->input.channels()));
    }
    const salsanet::GridImage* ptr = &g;
    auto labels = salsanet::predict_labels(model->net.infer(salsanet::to_nchw({&ptr, 1})));
    *out = new sn_labels{std::move(labels.front())};
  });
}

void sn_model_free(sn_model* model) { delete model; }

sn_status sn_confusion_create(sn_confusion** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sn_confusion{};
  });
}

sn_status sn_confusion_accumulate(sn_confusion* cm, const sn_labels* pred, const sn_labels* gt) {
  return guarded([&] {
    require(cm, "cm");
    require(pred, "pred");
    require(gt, "gt");
    salsanet::accumulate(cm->cm, pred->labels, gt->labels);
  });
}

sn_status sn_confusion_scores(const sn_confusion* cm, int cls, double* precision, double* recall, double* iou) {
  return guarded([&] {
    require(cm, "cm");
    if (cls < 0 || cls >= static_cast<int>(salsanet::kNumClasses)) {
      throw Error(ErrorCode::kInvalidArgument, "class index " + std::to_string(cls) + " out of range");
    }
    const auto s = salsanet::class_scores(cm->cm, static_cast<salsanet::ClassId>(cls));
    if (precision) *precision = s.precision;
    if (recall) *recall = s.recall;
    if (iou) *iou = s.iou;
  });
}

sn_status sn_confusion_mean_iou(const sn_confusion* cm, double* out) {
  return guarded([&] {
    require(cm, "cm");
    require(out, "out");
    *out = salsanet::mean_iou(cm->cm);
  });
}

sn_status sn_confusion_total(const sn_confusion* cm, uint64_t* out) {
  return guarded([&] {
    require(cm, "cm");
    require(out, "out");
    *out = cm->cm.total();
  });
}

sn_status sn_confusion_write_csv(const sn_confusion* cm, const char* path) {
  return guarded([&] {
    require(cm, "cm");
    require(path, "path");
    salsanet::io::write_text_file(path, salsanet::metrics_csv(cm->cm));
  });
}

void sn_confusion_free(sn_confusion* cm) { delete cm; }

}  // extern "C"
