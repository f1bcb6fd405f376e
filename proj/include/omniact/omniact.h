/*
 * omniact - calibration-free top-view fisheye unwrapping and
 * weakly-supervised multi-instance multi-label action recognition.
 *
 * C API over the C++ core. Every function returns a status code
 * (OMNIACT_OK on success); objects are opaque handles created through
 * out-parameters and released with the matching *_free call. The last
 * error message of the calling thread is available via omniact_errmsg().
 */

#ifndef OMNIACT_H
#define OMNIACT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32) || defined(_WIN64)
#define OMNIACT_API __declspec(dllexport)
#else
#define OMNIACT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; they double as the CLI exit codes. */
enum {
  OMNIACT_OK = 0,
  OMNIACT_ERR_INVALID = 2, /* bad arguments or configuration */
  OMNIACT_ERR_IO = 3,      /* file not found, malformed, unwritable */
  OMNIACT_ERR_NUMERIC = 4  /* numeric failure (divergence, degeneracy) */
};

enum { OMNIACT_INTERP_NEAREST = 0, OMNIACT_INTERP_BILINEAR = 1 };

enum {
  OMNIACT_AGG_AVG = 0,
  OMNIACT_AGG_MAX = 1,
  OMNIACT_AGG_LSE = 2,
  OMNIACT_AGG_ATTENTION = 3
};

enum {
  OMNIACT_HEAD_MIML = 0,
  OMNIACT_HEAD_POOL_AVG = 1,
  OMNIACT_HEAD_POOL_MAX = 2
};

OMNIACT_API const char* omniact_version(void);

/* Message for the most recent failure on this thread. */
OMNIACT_API const char* omniact_errmsg(void);

typedef struct omniact_image omniact_image;
typedef struct omniact_mapping omniact_mapping;
typedef struct omniact_tensor omniact_tensor;
typedef struct omniact_head omniact_head;
typedef struct omniact_dataset omniact_dataset;

/* ------------------------------------------------------------------ */
/* Geometry: panorama sizing, center estimation, fisheye unwrapping.  */

/* Width from the FoV proportion h/w = vfov / (2*hfov). */
OMNIACT_API int omniact_panorama_dims(double hfov_deg, double vfov_deg,
                                      int height_px, int* out_width_px);

/* Normalized line a*x + b*y + c = 0 through two body keypoints. */
OMNIACT_API int omniact_spine_from_keypoints(double shoulder_x,
                                             double shoulder_y, double hip_x,
                                             double hip_y,
                                             double out_line_abc[3]);

/* Minimizer of the summed absolute point-line distances over n_lines
 * packed (a, b, c) triples. */
OMNIACT_API int omniact_estimate_center(const double* lines_abc,
                                        size_t n_lines, double* out_x,
                                        double* out_y);

/* Reads a keypoints JSON file, estimates a center per frame and averages
 * the per-frame results. out_frames_used may be NULL. */
OMNIACT_API int omniact_center_from_keypoints_file(const char* path,
                                                   double* out_x,
                                                   double* out_y,
                                                   size_t* out_frames_used);

/* Distance from the center to the furthest frame corner. */
OMNIACT_API int omniact_fisheye_radius(double center_x, double center_y,
                                       int frame_w, int frame_h,
                                       double* out_radius);

OMNIACT_API int omniact_mapping_build(int pano_w, int pano_h, double center_x,
                                      double center_y, double radius_px,
                                      double phi_deg, int fisheye_w,
                                      int fisheye_h, omniact_mapping** out);

OMNIACT_API int omniact_mapping_save(const omniact_mapping* mapping,
                                     const char* path);

/* The cache file stores only panorama-side data, so the expected fisheye
 * size must be supplied; entries outside it fail with
 * OMNIACT_ERR_INVALID. */
OMNIACT_API int omniact_mapping_load(const char* path, int fisheye_w,
                                     int fisheye_h, omniact_mapping** out);

OMNIACT_API int omniact_mapping_dims(const omniact_mapping* mapping,
                                     int* out_w, int* out_h);

/* Source coordinates for panorama pixel (x, y); *out_in_frame is 0 for
 * out-of-frame entries (coordinates are NaN then). */
OMNIACT_API int omniact_mapping_entry(const omniact_mapping* mapping, int x,
                                      int y, float* out_xf, float* out_yf,
                                      int* out_in_frame);

OMNIACT_API void omniact_mapping_free(omniact_mapping* mapping);

/* ------------------------------------------------------------------ */
/* Images (binary PGM/PPM, 8-bit).                                    */

OMNIACT_API int omniact_image_create(int width, int height, int channels,
                                     omniact_image** out);
OMNIACT_API int omniact_image_read(const char* path, omniact_image** out);
OMNIACT_API int omniact_image_write(const omniact_image* img,
                                    const char* path);
OMNIACT_API int omniact_image_info(const omniact_image* img, int* out_w,
                                   int* out_h, int* out_channels);

/* Interleaved row-major pixel buffer, width*height*channels bytes. */
OMNIACT_API uint8_t* omniact_image_pixels(omniact_image* img);

/* Resamples a fisheye frame through the mapping table; out-of-frame
 * pixels are black. */
OMNIACT_API int omniact_remap(const omniact_image* fisheye,
                              const omniact_mapping* mapping, int interp,
                              omniact_image** out);

OMNIACT_API void omniact_image_free(omniact_image* img);

/* ------------------------------------------------------------------ */
/* Tensors (OTSR files; doubles in memory, f32 on disk).              */

OMNIACT_API int omniact_tensor_create(const uint32_t* dims, uint32_t ndim,
                                      omniact_tensor** out);
OMNIACT_API int omniact_tensor_read(const char* path, omniact_tensor** out);
OMNIACT_API int omniact_tensor_write(const omniact_tensor* t,
                                     const char* path);
OMNIACT_API int omniact_tensor_rank(const omniact_tensor* t,
                                    uint32_t* out_ndim);
OMNIACT_API int omniact_tensor_dims(const omniact_tensor* t,
                                    uint32_t* out_dims, uint32_t max_ndim);
OMNIACT_API double* omniact_tensor_data(omniact_tensor* t);
OMNIACT_API const double* omniact_tensor_cdata(const omniact_tensor* t);
OMNIACT_API void omniact_tensor_free(omniact_tensor* t);

/* ------------------------------------------------------------------ */
/* Region masks. Masks travel as 2-D 0/1 tensors (H x W).             */

/* Max-pools boxes (packed x0,y0,x1,y1 per box) into a frame-resolution
 * binary mask. */
OMNIACT_API int omniact_clip_mask(const int32_t* boxes_xyxy, size_t n_boxes,
                                  int frame_w, int frame_h,
                                  omniact_tensor** out_mask);

/* Max-pool resize to the feature grid. */
OMNIACT_API int omniact_mask_downsample(const omniact_tensor* mask,
                                        int target_w, int target_h,
                                        omniact_tensor** out);

/* out[c,i,j] = features[c,i,j] * mask[i,j]. */
OMNIACT_API int omniact_apply_mask(const omniact_tensor* features,
                                   const omniact_tensor* mask,
                                   omniact_tensor** out);

/* ------------------------------------------------------------------ */
/* MIML training and prediction.                                      */

typedef struct omniact_hyperparams {
  int32_t k;             /* instance block width */
  double lse_sharpness;  /* r */
  double reg_weight;     /* alpha */
  double lr;
  double momentum;
  int32_t batch_size;
  int32_t epochs;
  int32_t lr_halve_every;
  int32_t aggregator; /* OMNIACT_AGG_* */
  int32_t head_kind;  /* OMNIACT_HEAD_* */
} omniact_hyperparams;

/* k=8, r=0.8, alpha=0.001, lr=0.01, momentum=0.9, batch 32, 50 epochs,
 * halving every 10, LSE aggregation, miml head. */
OMNIACT_API void omniact_hyperparams_defaults(omniact_hyperparams* hp);

/* Loads a dataset manifest. With use_mask nonzero, per-clip boxes are
 * rasterized at (frame_w, frame_h), max-pool-resized to the feature grid
 * and applied to the features. */
OMNIACT_API int omniact_dataset_load(const char* manifest_path, int use_mask,
                                     int frame_w, int frame_h,
                                     omniact_dataset** out);
OMNIACT_API int omniact_dataset_size(const omniact_dataset* ds,
                                     size_t* out_n);
OMNIACT_API int omniact_dataset_n_classes(const omniact_dataset* ds,
                                          int* out_n_classes);
OMNIACT_API int omniact_dataset_feat_dim(const omniact_dataset* ds,
                                         int* out_feat_dim);
OMNIACT_API int omniact_dataset_labels(const omniact_dataset* ds, size_t index,
                                       const uint8_t** out_labels,
                                       size_t* out_len);
/* Clip name (feature file stem); the pointer stays valid while the
 * dataset handle lives. */
OMNIACT_API int omniact_dataset_name(const omniact_dataset* ds, size_t index,
                                     const char** out_name);
OMNIACT_API void omniact_dataset_free(omniact_dataset* ds);

/* SGD with momentum over seeded shuffles; deterministic given the seed.
 * Per-epoch metrics go to metrics_csv_path when it is non-NULL. */
OMNIACT_API int omniact_train(const omniact_dataset* ds,
                              const omniact_hyperparams* hp, uint64_t seed,
                              const char* metrics_csv_path,
                              omniact_head** out_head);

OMNIACT_API int omniact_head_save(const omniact_head* head, const char* path);
OMNIACT_API int omniact_head_load(const char* path, int n_classes,
                                  int feat_dim, int with_attention,
                                  omniact_head** out);
OMNIACT_API int omniact_head_info(const omniact_head* head, int* out_n_classes,
                                  int* out_feat_dim, int* out_with_attention);
OMNIACT_API void omniact_head_free(omniact_head* head);

/* Bag probabilities (and optionally raw bag scores) for one clip. */
OMNIACT_API int omniact_predict(const omniact_head* head,
                                const omniact_dataset* ds, size_t index,
                                const omniact_hyperparams* hp,
                                double* out_bag_probs,
                                double* out_bag_scores);

/* Bag scores for every clip, row-major n_samples x n_classes. */
OMNIACT_API int omniact_predict_all(const omniact_head* head,
                                    const omniact_dataset* ds,
                                    const omniact_hyperparams* hp,
                                    double* out_scores);

/* ------------------------------------------------------------------ */
/* Grad-CAM localization.                                             */

/* Feature-resolution heatmap ReLU(sum_k alpha_k A^k) for one class of
 * one clip, with alpha_k the spatial mean of d p^a / d A^k. */
OMNIACT_API int omniact_gradcam(const omniact_head* head,
                                const omniact_dataset* ds, size_t index,
                                int class_index,
                                const omniact_hyperparams* hp,
                                omniact_tensor** out_heatmap);

/* Bilinear upsampling (align-corners false); target >= source. */
OMNIACT_API int omniact_heatmap_upsample(const omniact_tensor* heatmap,
                                         int out_w, int out_h,
                                         omniact_tensor** out);

/* Grayscale PGM normalized by the map's own maximum. */
OMNIACT_API int omniact_heatmap_write_pgm(const omniact_tensor* heatmap,
                                          const char* path);

/* Fixed 0.5 alpha blend over an RGB panorama of the same size. */
OMNIACT_API int omniact_heatmap_overlay(const omniact_tensor* heatmap,
                                        const omniact_image* panorama,
                                        omniact_image** out);

OMNIACT_API int omniact_heatmap_argmax_col(const omniact_tensor* heatmap,
                                           int32_t* out_col);

/* ------------------------------------------------------------------ */
/* Evaluation metrics.                                                */

/* Information-retrieval AP (precision at each positive), descending
 * scores, ties stable in input order. Fails with OMNIACT_ERR_INVALID
 * when no label is positive. */
OMNIACT_API int omniact_average_precision(const double* scores,
                                          const uint8_t* labels, size_t n,
                                          double* out_ap);

/* Per-class AP and their mean over row-major n x C scores/labels.
 * Classes without positives come back NaN and are excluded from the
 * mean; out_per_class_ap may be NULL. */
OMNIACT_API int omniact_eval_scores(const double* scores,
                                    const uint8_t* labels, size_t n_samples,
                                    size_t n_classes,
                                    double* out_per_class_ap,
                                    double* out_map);

OMNIACT_API int omniact_predictions_write_csv(const char* path,
                                              const double* scores,
                                              const uint8_t* labels,
                                              size_t n_samples,
                                              size_t n_classes);

/* Scores a prediction CSV (sample_id,class,score,label); optionally
 * writes the per-class AP table. */
OMNIACT_API int omniact_eval_pred_csv(const char* pred_csv_path,
                                      const char* ap_csv_path,
                                      double* out_map);

/* Fraction of cases whose argmax column lies in [span_begin, span_end). */
OMNIACT_API int omniact_localization_hit_rate(const int32_t* argmax_cols,
                                              const int32_t* span_begin,
                                              const int32_t* span_end,
                                              size_t n, double* out_rate);

/* ------------------------------------------------------------------ */
/* Synthetic data generation.                                         */

typedef struct omniact_synth_spec {
  int32_t n_classes;
  int32_t n_instances_max;
  int32_t feat_dim;
  int32_t grid_h;
  int32_t grid_w;
  int32_t k;
  double noise_sigma;
  double signal_gain;
  int32_t max_concurrent_actions;
  int32_t n_distractors;
  int32_t frame_w; /* nominal frame resolution the boxes are written at */
  int32_t frame_h;
} omniact_synth_spec;

/* Desk-scale defaults: C=6, D=64, 8x40 grid, k=8, sigma=0.3, gain=0.45,
 * up to 4 concurrent actions, 1280x256 nominal frames. */
OMNIACT_API void omniact_synth_spec_defaults(omniact_synth_spec* spec);

/* Writes train and test splits (tensors, boxes, manifests, planted-truth
 * JSON) under out_dir. Both splits share one seed stream. */
OMNIACT_API int omniact_synth_write_dataset(const char* out_dir,
                                            const omniact_synth_spec* spec,
                                            int n_train, int n_test,
                                            uint64_t seed);

/* White radial rays from the center on black; ray angles in degrees,
 * direction (cos psi, -sin psi) in image coordinates. */
OMNIACT_API int omniact_synth_fisheye(int frame_w, int frame_h,
                                      double center_x, double center_y,
                                      const double* ray_angles_deg,
                                      size_t n_rays, omniact_image** out);

/* Writes a keypoints JSON of n_spines jittered spine pairs radiating from
 * the center, for unwrap demos and center-recovery experiments. */
OMNIACT_API int omniact_synth_keypoints(const char* out_path, int frame_w,
                                        int frame_h, double center_x,
                                        double center_y, int n_spines,
                                        double jitter_px, uint64_t seed);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* OMNIACT_H */
