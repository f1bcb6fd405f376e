#include "omniact/omniact.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/evalmetrics.hpp"
#include "core/geometry.hpp"
#include "core/image.hpp"
#include "core/localize.hpp"
#include "core/miml.hpp"
#include "core/regionmask.hpp"
#include "core/synth.hpp"
#include "core/tensor.hpp"

struct omniact_image {
  omniact::Image img;
};
struct omniact_mapping {
  omniact::geometry::MappingTable table;
};
struct omniact_tensor {
  omniact::Tensor t;
};
struct omniact_head {
  omniact::miml::MimlHead head;
};
struct omniact_dataset {
  omniact::dataset::LoadedDataset data;
  int n_classes = 0;
  int feat_dim = 0;
};

namespace {

thread_local std::string g_errmsg;

int fail(int code, const char* msg) {
  g_errmsg = msg;
  return code;
}

template <typename F>
int guarded(F&& fn) {
  try {
    fn();
    return OMNIACT_OK;
  } catch (const omniact::Error& e) {
    g_errmsg = e.what();
    return static_cast<int>(e.code());
  } catch (const std::bad_alloc&) {
    g_errmsg = "out of memory";
    return OMNIACT_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_errmsg = e.what();
    return OMNIACT_ERR_INVALID;
  }
}

omniact::miml::Hyperparams to_core(const omniact_hyperparams& hp) {
  omniact::miml::Hyperparams out;
  out.k = hp.k;
  out.lse_sharpness = hp.lse_sharpness;
  out.reg_weight = hp.reg_weight;
  out.lr = hp.lr;
  out.momentum = hp.momentum;
  out.batch_size = hp.batch_size;
  out.epochs = hp.epochs;
  out.lr_halve_every = hp.lr_halve_every;
  switch (hp.aggregator) {
    case OMNIACT_AGG_AVG: out.aggregator = omniact::miml::Aggregator::avg; break;
    case OMNIACT_AGG_MAX: out.aggregator = omniact::miml::Aggregator::max; break;
    case OMNIACT_AGG_LSE: out.aggregator = omniact::miml::Aggregator::lse; break;
    case OMNIACT_AGG_ATTENTION:
      out.aggregator = omniact::miml::Aggregator::attention;
      break;
    default: omniact::throw_invalid("unknown aggregator code");
  }
  switch (hp.head_kind) {
    case OMNIACT_HEAD_MIML:
      out.head_kind = omniact::miml::HeadKind::miml;
      break;
    case OMNIACT_HEAD_POOL_AVG:
      out.head_kind = omniact::miml::HeadKind::pool_avg;
      break;
    case OMNIACT_HEAD_POOL_MAX:
      out.head_kind = omniact::miml::HeadKind::pool_max;
      break;
    default: omniact::throw_invalid("unknown head kind code");
  }
  out.validate();
  return out;
}

omniact::synth::SynthSpec to_core(const omniact_synth_spec& spec) {
  omniact::synth::SynthSpec out;
  out.n_classes = spec.n_classes;
  out.n_instances_max = spec.n_instances_max;
  out.feat_dim = spec.feat_dim;
  out.grid_h = spec.grid_h;
  out.grid_w = spec.grid_w;
  out.k = spec.k;
  out.noise_sigma = spec.noise_sigma;
  out.signal_gain = spec.signal_gain;
  out.max_concurrent_actions = spec.max_concurrent_actions;
  out.n_distractors = spec.n_distractors;
  return out;
}

const omniact::miml::TrainSample& sample_at(const omniact_dataset* ds,
                                            size_t index) {
  if (index >= ds->data.samples.size()) {
    omniact::throw_invalid("sample index out of range");
  }
  return ds->data.samples[index];
}

}  // namespace

extern "C" {

const char* omniact_version(void) { return "0.1.0"; }

const char* omniact_errmsg(void) { return g_errmsg.c_str(); }

/* ------------------------------------------------------------------ */

int omniact_panorama_dims(double hfov_deg, double vfov_deg, int height_px,
                          int* out_width_px) {
  if (!out_width_px) return fail(OMNIACT_ERR_INVALID, "out_width_px is NULL");
  return guarded([&] {
    const auto spec = omniact::geometry::panorama_dims(
        {hfov_deg, vfov_deg}, height_px);
    *out_width_px = spec.width_px;
  });
}

int omniact_spine_from_keypoints(double shoulder_x, double shoulder_y,
                                 double hip_x, double hip_y,
                                 double out_line_abc[3]) {
  if (!out_line_abc) return fail(OMNIACT_ERR_INVALID, "out_line_abc is NULL");
  return guarded([&] {
    const auto line = omniact::geometry::spine_from_keypoints(
        shoulder_x, shoulder_y, hip_x, hip_y);
    out_line_abc[0] = line.a;
    out_line_abc[1] = line.b;
    out_line_abc[2] = line.c;
  });
}

int omniact_estimate_center(const double* lines_abc, size_t n_lines,
                            double* out_x, double* out_y) {
  if (!lines_abc || !out_x || !out_y) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    std::vector<omniact::geometry::SpineLine> lines(n_lines);
    for (size_t i = 0; i < n_lines; ++i) {
      lines[i].a = lines_abc[3 * i];
      lines[i].b = lines_abc[3 * i + 1];
      lines[i].c = lines_abc[3 * i + 2];
    }
    const auto c = omniact::geometry::estimate_center(lines);
    *out_x = c.x;
    *out_y = c.y;
  });
}

int omniact_center_from_keypoints_file(const char* path, double* out_x,
                                       double* out_y,
                                       size_t* out_frames_used) {
  if (!path || !out_x || !out_y) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto pairs = omniact::dataset::read_keypoints(path);
    size_t used = 0;
    const auto c = omniact::dataset::center_from_keypoints(pairs, &used);
    *out_x = c.x;
    *out_y = c.y;
    if (out_frames_used) *out_frames_used = used;
  });
}

int omniact_fisheye_radius(double center_x, double center_y, int frame_w,
                           int frame_h, double* out_radius) {
  if (!out_radius) return fail(OMNIACT_ERR_INVALID, "out_radius is NULL");
  return guarded([&] {
    *out_radius = omniact::geometry::fisheye_radius({center_x, center_y},
                                                    frame_w, frame_h);
  });
}

int omniact_mapping_build(int pano_w, int pano_h, double center_x,
                          double center_y, double radius_px, double phi_deg,
                          int fisheye_w, int fisheye_h,
                          omniact_mapping** out) {
  if (!out) return fail(OMNIACT_ERR_INVALID, "out is NULL");
  return guarded([&] {
    omniact::geometry::MappingParams params;
    params.center = {center_x, center_y};
    params.radius_px = radius_px;
    params.phi_deg = phi_deg;
    auto table = omniact::geometry::build_mapping(
        {pano_w, pano_h}, params, fisheye_w, fisheye_h);
    *out = new omniact_mapping{std::move(table)};
  });
}

int omniact_mapping_save(const omniact_mapping* mapping, const char* path) {
  if (!mapping || !path) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] { omniact::geometry::save_mapping(mapping->table, path); });
}

int omniact_mapping_load(const char* path, int fisheye_w, int fisheye_h,
                         omniact_mapping** out) {
  if (!path || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    auto table = omniact::geometry::load_mapping(path, fisheye_w, fisheye_h);
    *out = new omniact_mapping{std::move(table)};
  });
}

int omniact_mapping_dims(const omniact_mapping* mapping, int* out_w,
                         int* out_h) {
  if (!mapping || !out_w || !out_h) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  *out_w = mapping->table.spec.width_px;
  *out_h = mapping->table.spec.height_px;
  return OMNIACT_OK;
}

int omniact_mapping_entry(const omniact_mapping* mapping, int x, int y,
                          float* out_xf, float* out_yf, int* out_in_frame) {
  if (!mapping || !out_xf || !out_yf || !out_in_frame) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  const auto& t = mapping->table;
  if (x < 0 || x >= t.spec.width_px || y < 0 || y >= t.spec.height_px) {
    return fail(OMNIACT_ERR_INVALID, "mapping entry out of range");
  }
  const size_t idx = 2 * (static_cast<size_t>(y) * t.spec.width_px + x);
  *out_xf = t.coords[idx];
  *out_yf = t.coords[idx + 1];
  *out_in_frame = std::isnan(t.coords[idx]) ? 0 : 1;
  return OMNIACT_OK;
}

void omniact_mapping_free(omniact_mapping* mapping) { delete mapping; }

/* ------------------------------------------------------------------ */

int omniact_image_create(int width, int height, int channels,
                         omniact_image** out) {
  if (!out) return fail(OMNIACT_ERR_INVALID, "out is NULL");
  return guarded(
      [&] { *out = new omniact_image{omniact::Image(width, height, channels)}; });
}

int omniact_image_read(const char* path, omniact_image** out) {
  if (!path || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] { *out = new omniact_image{omniact::read_pnm(path)}; });
}

int omniact_image_write(const omniact_image* img, const char* path) {
  if (!img || !path) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] { omniact::write_pnm(img->img, path); });
}

int omniact_image_info(const omniact_image* img, int* out_w, int* out_h,
                       int* out_channels) {
  if (!img || !out_w || !out_h || !out_channels) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  *out_w = img->img.width;
  *out_h = img->img.height;
  *out_channels = img->img.channels;
  return OMNIACT_OK;
}

uint8_t* omniact_image_pixels(omniact_image* img) {
  return img ? img->img.pixels.data() : nullptr;
}

int omniact_remap(const omniact_image* fisheye, const omniact_mapping* mapping,
                  int interp, omniact_image** out) {
  if (!fisheye || !mapping || !out) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  if (interp != OMNIACT_INTERP_NEAREST && interp != OMNIACT_INTERP_BILINEAR) {
    return fail(OMNIACT_ERR_INVALID, "unknown interpolation mode");
  }
  return guarded([&] {
    const auto mode = interp == OMNIACT_INTERP_NEAREST
                          ? omniact::geometry::Interp::nearest
                          : omniact::geometry::Interp::bilinear;
    *out = new omniact_image{
        omniact::geometry::remap(fisheye->img, mapping->table, mode)};
  });
}

void omniact_image_free(omniact_image* img) { delete img; }

/* ------------------------------------------------------------------ */

int omniact_tensor_create(const uint32_t* dims, uint32_t ndim,
                          omniact_tensor** out) {
  if (!dims || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    *out = new omniact_tensor{
        omniact::Tensor(std::vector<uint32_t>(dims, dims + ndim))};
  });
}

int omniact_tensor_read(const char* path, omniact_tensor** out) {
  if (!path || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] { *out = new omniact_tensor{omniact::read_tensor(path)}; });
}

int omniact_tensor_write(const omniact_tensor* t, const char* path) {
  if (!t || !path) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] { omniact::write_tensor(t->t, path); });
}

int omniact_tensor_rank(const omniact_tensor* t, uint32_t* out_ndim) {
  if (!t || !out_ndim) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  *out_ndim = static_cast<uint32_t>(t->t.dims.size());
  return OMNIACT_OK;
}

int omniact_tensor_dims(const omniact_tensor* t, uint32_t* out_dims,
                        uint32_t max_ndim) {
  if (!t || !out_dims) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  if (max_ndim < t->t.dims.size()) {
    return fail(OMNIACT_ERR_INVALID, "dims buffer too small");
  }
  std::copy(t->t.dims.begin(), t->t.dims.end(), out_dims);
  return OMNIACT_OK;
}

double* omniact_tensor_data(omniact_tensor* t) {
  return t ? t->t.values.data() : nullptr;
}

const double* omniact_tensor_cdata(const omniact_tensor* t) {
  return t ? t->t.values.data() : nullptr;
}

void omniact_tensor_free(omniact_tensor* t) { delete t; }

/* ------------------------------------------------------------------ */

int omniact_clip_mask(const int32_t* boxes_xyxy, size_t n_boxes, int frame_w,
                      int frame_h, omniact_tensor** out_mask) {
  if ((!boxes_xyxy && n_boxes > 0) || !out_mask) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    std::vector<omniact::regionmask::BoundingBox> boxes(n_boxes);
    for (size_t i = 0; i < n_boxes; ++i) {
      boxes[i] = {boxes_xyxy[4 * i], boxes_xyxy[4 * i + 1],
                  boxes_xyxy[4 * i + 2], boxes_xyxy[4 * i + 3], 0};
    }
    const auto mask = omniact::regionmask::clip_mask(boxes, frame_w, frame_h);
    *out_mask = new omniact_tensor{omniact::regionmask::mask_to_tensor(mask)};
  });
}

int omniact_mask_downsample(const omniact_tensor* mask, int target_w,
                            int target_h, omniact_tensor** out) {
  if (!mask || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    const auto m = omniact::regionmask::mask_from_tensor(mask->t);
    const auto small = omniact::regionmask::downsample_mask(m, target_w,
                                                            target_h);
    *out = new omniact_tensor{omniact::regionmask::mask_to_tensor(small)};
  });
}

int omniact_apply_mask(const omniact_tensor* features,
                       const omniact_tensor* mask, omniact_tensor** out) {
  if (!features || !mask || !out) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto m = omniact::regionmask::mask_from_tensor(mask->t);
    *out = new omniact_tensor{omniact::regionmask::apply_mask(features->t, m)};
  });
}

/* ------------------------------------------------------------------ */

void omniact_hyperparams_defaults(omniact_hyperparams* hp) {
  if (!hp) return;
  hp->k = 8;
  hp->lse_sharpness = 0.8;
  hp->reg_weight = 0.001;
  hp->lr = 0.01;
  hp->momentum = 0.9;
  hp->batch_size = 32;
  hp->epochs = 50;
  hp->lr_halve_every = 10;
  hp->aggregator = OMNIACT_AGG_LSE;
  hp->head_kind = OMNIACT_HEAD_MIML;
}

int omniact_dataset_load(const char* manifest_path, int use_mask, int frame_w,
                         int frame_h, omniact_dataset** out) {
  if (!manifest_path || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    omniact::dataset::LoadOptions opts;
    opts.use_mask = use_mask != 0;
    opts.frame_w = frame_w;
    opts.frame_h = frame_h;
    auto data = omniact::dataset::load_samples(manifest_path, opts);
    auto* ds = new omniact_dataset{std::move(data)};
    if (!ds->data.samples.empty()) {
      ds->n_classes = static_cast<int>(ds->data.samples[0].labels.size());
      ds->feat_dim = static_cast<int>(ds->data.samples[0].features.dims[0]);
    }
    *out = ds;
  });
}

int omniact_dataset_size(const omniact_dataset* ds, size_t* out_n) {
  if (!ds || !out_n) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  *out_n = ds->data.samples.size();
  return OMNIACT_OK;
}

int omniact_dataset_n_classes(const omniact_dataset* ds, int* out_n_classes) {
  if (!ds || !out_n_classes) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  *out_n_classes = ds->n_classes;
  return OMNIACT_OK;
}

int omniact_dataset_feat_dim(const omniact_dataset* ds, int* out_feat_dim) {
  if (!ds || !out_feat_dim) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  *out_feat_dim = ds->feat_dim;
  return OMNIACT_OK;
}

int omniact_dataset_labels(const omniact_dataset* ds, size_t index,
                           const uint8_t** out_labels, size_t* out_len) {
  if (!ds || !out_labels || !out_len) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto& s = sample_at(ds, index);
    *out_labels = s.labels.data();
    *out_len = s.labels.size();
  });
}

int omniact_dataset_name(const omniact_dataset* ds, size_t index,
                         const char** out_name) {
  if (!ds || !out_name) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  if (index >= ds->data.names.size()) {
    return fail(OMNIACT_ERR_INVALID, "sample index out of range");
  }
  *out_name = ds->data.names[index].c_str();
  return OMNIACT_OK;
}

void omniact_dataset_free(omniact_dataset* ds) { delete ds; }

int omniact_train(const omniact_dataset* ds, const omniact_hyperparams* hp,
                  uint64_t seed, const char* metrics_csv_path,
                  omniact_head** out_head) {
  if (!ds || !hp || !out_head) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    const auto core_hp = to_core(*hp);
    auto result = omniact::miml::train(ds->data.samples, core_hp, seed);
    if (metrics_csv_path) {
      omniact::dataset::write_metrics_csv(metrics_csv_path, result.metrics);
    }
    *out_head = new omniact_head{std::move(result.head)};
  });
}

int omniact_head_save(const omniact_head* head, const char* path) {
  if (!head || !path) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] { omniact::miml::save_head(head->head, path); });
}

int omniact_head_load(const char* path, int n_classes, int feat_dim,
                      int with_attention, omniact_head** out) {
  if (!path || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    *out = new omniact_head{omniact::miml::load_head(path, n_classes, feat_dim,
                                                     with_attention != 0)};
  });
}

int omniact_head_info(const omniact_head* head, int* out_n_classes,
                      int* out_feat_dim, int* out_with_attention) {
  if (!head) return fail(OMNIACT_ERR_INVALID, "head is NULL");
  if (out_n_classes) *out_n_classes = head->head.n_classes;
  if (out_feat_dim) *out_feat_dim = head->head.feat_dim;
  if (out_with_attention) {
    *out_with_attention = head->head.has_attention() ? 1 : 0;
  }
  return OMNIACT_OK;
}

void omniact_head_free(omniact_head* head) { delete head; }

int omniact_predict(const omniact_head* head, const omniact_dataset* ds,
                    size_t index, const omniact_hyperparams* hp,
                    double* out_bag_probs, double* out_bag_scores) {
  if (!head || !ds || !hp || !out_bag_probs) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto core_hp = to_core(*hp);
    const auto scores =
        omniact::miml::predict(sample_at(ds, index), head->head, core_hp);
    std::copy(scores.bag_probs.begin(), scores.bag_probs.end(), out_bag_probs);
    if (out_bag_scores) {
      std::copy(scores.bag_scores.begin(), scores.bag_scores.end(),
                out_bag_scores);
    }
  });
}

int omniact_predict_all(const omniact_head* head, const omniact_dataset* ds,
                        const omniact_hyperparams* hp, double* out_scores) {
  if (!head || !ds || !hp || !out_scores) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto core_hp = to_core(*hp);
    const int c = head->head.n_classes;
    for (size_t i = 0; i < ds->data.samples.size(); ++i) {
      const auto scores =
          omniact::miml::predict(ds->data.samples[i], head->head, core_hp);
      std::copy(scores.bag_scores.begin(), scores.bag_scores.end(),
                out_scores + i * c);
    }
  });
}

/* ------------------------------------------------------------------ */

int omniact_gradcam(const omniact_head* head, const omniact_dataset* ds,
                    size_t index, int class_index,
                    const omniact_hyperparams* hp,
                    omniact_tensor** out_heatmap) {
  if (!head || !ds || !hp || !out_heatmap) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto core_hp = to_core(*hp);
    const auto& sample = sample_at(ds, index);
    const auto grads = omniact::localize::feature_gradients(
        sample, head->head, core_hp, class_index);
    const auto weights = omniact::localize::channel_weights(grads);
    *out_heatmap = new omniact_tensor{
        omniact::localize::gradcam(sample.features, weights)};
  });
}

int omniact_heatmap_upsample(const omniact_tensor* heatmap, int out_w,
                             int out_h, omniact_tensor** out) {
  if (!heatmap || !out) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    *out = new omniact_tensor{
        omniact::localize::upsample_heatmap(heatmap->t, out_w, out_h)};
  });
}

int omniact_heatmap_write_pgm(const omniact_tensor* heatmap,
                              const char* path) {
  if (!heatmap || !path) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    omniact::write_pnm(omniact::localize::render_heatmap(heatmap->t), path);
  });
}

int omniact_heatmap_overlay(const omniact_tensor* heatmap,
                            const omniact_image* panorama,
                            omniact_image** out) {
  if (!heatmap || !panorama || !out) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    *out = new omniact_image{
        omniact::localize::overlay_heatmap(heatmap->t, panorama->img)};
  });
}

int omniact_heatmap_argmax_col(const omniact_tensor* heatmap,
                               int32_t* out_col) {
  if (!heatmap || !out_col) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded(
      [&] { *out_col = omniact::localize::argmax_column(heatmap->t); });
}

/* ------------------------------------------------------------------ */

int omniact_average_precision(const double* scores, const uint8_t* labels,
                              size_t n, double* out_ap) {
  if (!scores || !labels || !out_ap) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    *out_ap = omniact::evalmetrics::average_precision({scores, n}, {labels, n});
  });
}

int omniact_eval_scores(const double* scores, const uint8_t* labels,
                        size_t n_samples, size_t n_classes,
                        double* out_per_class_ap, double* out_map) {
  if (!scores || !labels || !out_map) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    omniact::Matrix m(static_cast<int>(n_samples), static_cast<int>(n_classes));
    std::copy(scores, scores + n_samples * n_classes, m.v.begin());
    std::vector<std::vector<uint8_t>> labs(n_samples);
    for (size_t i = 0; i < n_samples; ++i) {
      labs[i].assign(labels + i * n_classes, labels + (i + 1) * n_classes);
    }
    const auto aps = omniact::evalmetrics::per_class_ap(m, labs);
    if (out_per_class_ap) {
      std::copy(aps.begin(), aps.end(), out_per_class_ap);
    }
    *out_map = omniact::evalmetrics::mean_ap(aps);
  });
}

int omniact_predictions_write_csv(const char* path, const double* scores,
                                  const uint8_t* labels, size_t n_samples,
                                  size_t n_classes) {
  if (!path || !scores || !labels) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    omniact::Matrix m(static_cast<int>(n_samples), static_cast<int>(n_classes));
    std::copy(scores, scores + n_samples * n_classes, m.v.begin());
    std::vector<std::vector<uint8_t>> labs(n_samples);
    for (size_t i = 0; i < n_samples; ++i) {
      labs[i].assign(labels + i * n_classes, labels + (i + 1) * n_classes);
    }
    omniact::dataset::write_predictions_csv(path, m, labs);
  });
}

int omniact_eval_pred_csv(const char* pred_csv_path, const char* ap_csv_path,
                          double* out_map) {
  if (!pred_csv_path || !out_map) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const auto rows = omniact::dataset::read_predictions_csv(pred_csv_path);
    if (rows.empty()) omniact::throw_io("prediction file holds no rows");
    int max_class = 0;
    for (const auto& r : rows) {
      if (r.class_id < 0) omniact::throw_io("negative class id");
      max_class = std::max(max_class, r.class_id);
    }
    // Group per class, keeping file order for stable tie handling.
    std::vector<std::vector<double>> scores(max_class + 1);
    std::vector<std::vector<uint8_t>> labels(max_class + 1);
    for (const auto& r : rows) {
      scores[r.class_id].push_back(r.score);
      labels[r.class_id].push_back(r.label);
    }
    std::vector<double> aps(max_class + 1,
                            std::numeric_limits<double>::quiet_NaN());
    for (int a = 0; a <= max_class; ++a) {
      if (scores[a].empty()) continue;
      bool any = false;
      for (uint8_t l : labels[a]) any = any || l;
      if (any) {
        aps[a] = omniact::evalmetrics::average_precision(scores[a], labels[a]);
      }
    }
    const double map = omniact::evalmetrics::mean_ap(aps);
    if (ap_csv_path) omniact::dataset::write_ap_csv(ap_csv_path, aps, map);
    *out_map = map;
  });
}

int omniact_localization_hit_rate(const int32_t* argmax_cols,
                                  const int32_t* span_begin,
                                  const int32_t* span_end, size_t n,
                                  double* out_rate) {
  if (!argmax_cols || !span_begin || !span_end || !out_rate) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    std::vector<omniact::evalmetrics::LocalizationCase> cases(n);
    for (size_t i = 0; i < n; ++i) {
      cases[i] = {argmax_cols[i], span_begin[i], span_end[i]};
    }
    *out_rate = omniact::evalmetrics::localization_hit_rate(cases);
  });
}

/* ------------------------------------------------------------------ */

void omniact_synth_spec_defaults(omniact_synth_spec* spec) {
  if (!spec) return;
  spec->n_classes = 6;
  spec->n_instances_max = 5;
  spec->feat_dim = 64;
  spec->grid_h = 8;
  spec->grid_w = 40;
  spec->k = 8;
  spec->noise_sigma = 0.3;
  spec->signal_gain = 0.45;
  spec->max_concurrent_actions = 4;
  spec->n_distractors = 0;
  spec->frame_w = 1280;
  spec->frame_h = 256;
}

int omniact_synth_write_dataset(const char* out_dir,
                                const omniact_synth_spec* spec, int n_train,
                                int n_test, uint64_t seed) {
  if (!out_dir || !spec) return fail(OMNIACT_ERR_INVALID, "NULL argument");
  return guarded([&] {
    omniact::dataset::write_synth_dataset(out_dir, to_core(*spec), n_train,
                                          n_test, seed, spec->frame_w,
                                          spec->frame_h);
  });
}

int omniact_synth_fisheye(int frame_w, int frame_h, double center_x,
                          double center_y, const double* ray_angles_deg,
                          size_t n_rays, omniact_image** out) {
  if ((!ray_angles_deg && n_rays > 0) || !out) {
    return fail(OMNIACT_ERR_INVALID, "NULL argument");
  }
  return guarded([&] {
    const std::vector<double> rays(ray_angles_deg, ray_angles_deg + n_rays);
    *out = new omniact_image{omniact::synth::gen_fisheye(
        frame_w, frame_h, {center_x, center_y}, rays)};
  });
}

int omniact_synth_keypoints(const char* out_path, int frame_w, int frame_h,
                            double center_x, double center_y, int n_spines,
                            double jitter_px, uint64_t seed) {
  if (!out_path) return fail(OMNIACT_ERR_INVALID, "out_path is NULL");
  return guarded([&] {
    const double reach = std::min(
        {center_x, center_y, frame_w - center_x, frame_h - center_y});
    if (!(reach > 8.0)) {
      omniact::throw_invalid("center too close to the frame border");
    }
    omniact::Rng rng(seed);
    const auto pairs = omniact::synth::gen_spine_keypoints(
        {center_x, center_y}, n_spines, 0.25 * reach, 0.9 * reach, jitter_px,
        rng);
    std::vector<omniact::dataset::KeypointPair> kps;
    kps.reserve(pairs.size());
    for (const auto& p : pairs) {
      kps.push_back({p.frame, p.shoulder_x, p.shoulder_y, p.hip_x, p.hip_y});
    }
    omniact::dataset::write_keypoints(out_path, kps);
  });
}

} /* extern "C" */
