/* C interface to the SalsaNet LiDAR segmentation pipeline.
 *
 * Every function returns an sn_status. On failure, sn_last_error() returns a
 * thread-local message describing the most recent error on the calling thread.
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function (passing NULL is allowed). */
#ifndef SALSANET_SALSANET_H_
#define SALSANET_SALSANET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SN_API __declspec(dllexport)
#else
#define SN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sn_status {
  SN_OK = 0,
  SN_ERR_INVALID_ARGUMENT = 1,
  SN_ERR_IO = 2,
  SN_ERR_MALFORMED_SCAN = 3,
  SN_ERR_CALIB_PARSE = 4,
  SN_ERR_SHAPE = 5,
  SN_ERR_DEGENERATE_BATCH = 6,
  SN_ERR_UNDEFINED_ANGLE = 7,
  SN_ERR_LENGTH_MISMATCH = 8,
  SN_ERR_CONFIG = 9,
  SN_ERR_EMPTY_INPUT = 10,
  SN_ERR_NON_FINITE = 11,
  SN_ERR_CORRUPT_DATA = 12,
  SN_ERR_INTERNAL = 99
} sn_status;

typedef enum sn_view { SN_VIEW_BEV = 0, SN_VIEW_SFV = 1 } sn_view;

typedef struct sn_cloud sn_cloud;
typedef struct sn_calib sn_calib;
typedef struct sn_mask sn_mask;
typedef struct sn_boxes sn_boxes;
typedef struct sn_grid sn_grid;
typedef struct sn_labels sn_labels;
typedef struct sn_config sn_config;
typedef struct sn_model sn_model;
typedef struct sn_confusion sn_confusion;

SN_API const char* sn_version(void);
SN_API const char* sn_last_error(void);
SN_API const char* sn_status_name(sn_status status);

/* Point clouds ----------------------------------------------------------- */

/* Reads a KITTI Velodyne scan. `dropped` (nullable) receives the number of non-finite points skipped. */
SN_API sn_status sn_cloud_load_scan(const char* path, sn_cloud** out, size_t* dropped);
/* Reads a scan plus its one-byte-per-point label sidecar. */
SN_API sn_status sn_cloud_load_labeled(const char* scan_path, const char* label_path, sn_cloud** out);
/* Writes scan + sidecar; the cloud must carry labels. */
SN_API sn_status sn_cloud_save_labeled(const sn_cloud* cloud, const char* scan_path, const char* label_path);
SN_API sn_status sn_cloud_size(const sn_cloud* cloud, size_t* out);
/* Per-class label totals (background, road, vehicle); the cloud must carry labels. */
SN_API sn_status sn_cloud_class_counts(const sn_cloud* cloud, uint64_t counts[3]);
SN_API void sn_cloud_free(sn_cloud* cloud);

/* Auto-labeling inputs --------------------------------------------------- */

SN_API sn_status sn_calib_load(const char* path, sn_calib** out);
SN_API void sn_calib_free(sn_calib* calib);

/* 8-bit PGM road mask; pixels >= threshold are road. */
SN_API sn_status sn_mask_load_pgm(const char* path, uint8_t threshold, sn_mask** out);
SN_API void sn_mask_free(sn_mask* mask);

/* Vehicle boxes (Car, Van, Truck) from a KITTI object label file, moved into the LiDAR frame. */
SN_API sn_status sn_boxes_load_kitti(const char* path, const sn_calib* calib, sn_boxes** out);
SN_API sn_status sn_boxes_count(const sn_boxes* boxes, size_t* out);
SN_API void sn_boxes_free(sn_boxes* boxes);

/* Labels every point from the road mask and vehicle boxes (either may be NULL; calib is
 * required with a mask). Replaces any labels the cloud already had. */
SN_API sn_status sn_autolabel(sn_cloud* cloud, const sn_calib* calib, const sn_mask* mask, const sn_boxes* boxes);

/* Projection ------------------------------------------------------------- */

/* Default geometry: BEV 256x64x4, SFV 64x512x6. */
SN_API sn_status sn_project(const sn_cloud* cloud, sn_view view, sn_grid** out);
SN_API sn_status sn_rasterize_labels(const sn_cloud* cloud, sn_view view, sn_labels** out);

/* dims receives (height, width, channels). */
SN_API sn_status sn_grid_dims(const sn_grid* grid, size_t dims[3]);
SN_API sn_status sn_grid_save_tnsr(const sn_grid* grid, const char* path);
SN_API sn_status sn_grid_load_tnsr(const char* path, sn_grid** out);
SN_API sn_status sn_grid_save_pgm(const sn_grid* grid, int channel, const char* path);
SN_API void sn_grid_free(sn_grid* grid);

/* dims receives (height, width). */
SN_API sn_status sn_labels_dims(const sn_labels* labels, size_t dims[2]);
/* Copies height*width class ids (row-major) into `out`. */
SN_API sn_status sn_labels_copy(const sn_labels* labels, uint8_t* out, size_t capacity);
SN_API sn_status sn_labels_save_tnsr(const sn_labels* labels, const char* path);
SN_API sn_status sn_labels_load_tnsr(const char* path, sn_labels** out);
/* Class-colored render: road green, vehicle red, background gray. */
SN_API sn_status sn_labels_save_ppm(const sn_labels* labels, const char* path);
SN_API void sn_labels_free(sn_labels* labels);

/* Training --------------------------------------------------------------- */

SN_API sn_status sn_config_load(const char* path, sn_config** out);
SN_API sn_status sn_config_default(sn_config** out);
SN_API sn_status sn_config_set(sn_config* config, const char* key, const char* value);
/* Resolved configuration as a JSON object (valid until the config is modified or freed). */
SN_API const char* sn_config_json(sn_config* config);
SN_API void sn_config_free(sn_config* config);

/* Trains from config data_dir and writes checkpoint.snck, train_log.csv (and periodic
 * checkpoints) to out_dir. `out` (nullable) receives the trained model. */
SN_API sn_status sn_train(const sn_config* config, sn_model** out);

/* Models ----------------------------------------------------------------- */

SN_API sn_status sn_model_load(const char* path, sn_model** out);
SN_API sn_status sn_model_save(const sn_model* model, const char* path);
SN_API sn_status sn_model_view(const sn_model* model, sn_view* out);
/* Projects a scan with the geometry the model was trained on. */
SN_API sn_status sn_model_project(const sn_model* model, const sn_cloud* cloud, sn_grid** out);
SN_API sn_status sn_model_rasterize_labels(const sn_model* model, const sn_cloud* cloud, sn_labels** out);
/* Argmax segmentation of one grid. */
SN_API sn_status sn_model_infer(const sn_model* model, const sn_grid* grid, sn_labels** out);
SN_API void sn_model_free(sn_model* model);

/* Metrics ---------------------------------------------------------------- */

SN_API sn_status sn_confusion_create(sn_confusion** out);
SN_API sn_status sn_confusion_accumulate(sn_confusion* cm, const sn_labels* pred, const sn_labels* gt);
/* Precision, recall and IoU of one class (0 background, 1 road, 2 vehicle), as fractions. */
SN_API sn_status sn_confusion_scores(const sn_confusion* cm, int cls, double* precision, double* recall,
                                     double* iou);
SN_API sn_status sn_confusion_mean_iou(const sn_confusion* cm, double* out);
SN_API sn_status sn_confusion_total(const sn_confusion* cm, uint64_t* out);
SN_API sn_status sn_confusion_write_csv(const sn_confusion* cm, const char* path);
SN_API void sn_confusion_free(sn_confusion* cm);

#ifdef __cplusplus
}
#endif

#endif /* SALSANET_SALSANET_H_ */
