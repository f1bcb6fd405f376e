// omniact command line: fisheye unwrapping, synthetic datasets, MIML
// training, evaluation, Grad-CAM localization and the ablation grid.
// Everything goes through the public C API (omniact/omniact.h).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "omniact/omniact.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exits with the C API status code, which doubles as the exit code
// convention (2 config, 3 io, 4 numeric).
void check(int status) {
  if (status != OMNIACT_OK) {
    std::cerr << "error: " << omniact_errmsg() << "\n";
    std::exit(status);
  }
}

[[noreturn]] void die(int code, const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(code);
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  explicit Handle(T* p) : ptr(p) {}
  ~Handle() { reset(); }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& other) noexcept : ptr(other.ptr) { other.ptr = nullptr; }
  Handle& operator=(Handle&& other) noexcept {
    if (this != &other) {
      reset();
      ptr = other.ptr;
      other.ptr = nullptr;
    }
    return *this;
  }
  void reset() {
    if (ptr) Free(ptr);
    ptr = nullptr;
  }
  T** out() {
    reset();
    return &ptr;
  }
  T* get() const { return ptr; }
};

using ImageHandle = Handle<omniact_image, omniact_image_free>;
using MappingHandle = Handle<omniact_mapping, omniact_mapping_free>;
using TensorHandle = Handle<omniact_tensor, omniact_tensor_free>;
using HeadHandle = Handle<omniact_head, omniact_head_free>;
using DatasetHandle = Handle<omniact_dataset, omniact_dataset_free>;

// All tunables reachable from the config file and the flags. Flags win
// over config values; config values win over the defaults below.
struct Config {
  uint64_t seed = 1;
  // geometry
  double hfov = 360.0;
  double vfov = 235.0;
  double phi = 0.0;
  int height = 800;
  std::string interp = "bilinear";
  // hyperparameters
  int k = 8;
  double r = 0.8;
  double alpha = 0.001;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 50;
  int lr_halve_every = 10;
  std::string aggregator = "lse";
  std::string head_kind = "miml";
  // masks
  bool use_mask = true;
  int frame_w = 1280;
  int frame_h = 256;
  // synth
  int classes = 6;
  int feat_dim = 64;
  int grid_h = 8;
  int grid_w = 40;
  double noise = 0.3;
  double gain = 0.45;
  int max_concurrent = 4;
  int distractors = 0;
  int train_samples = 512;
  int test_samples = 128;
};

void apply_config_file(const std::string& path, Config* cfg) {
  std::ifstream in(path);
  if (!in) die(OMNIACT_ERR_IO, "cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    die(OMNIACT_ERR_INVALID, path + ": " + e.what());
  }
  if (!j.is_object()) die(OMNIACT_ERR_INVALID, path + ": config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "seed") cfg->seed = val.get<uint64_t>();
      else if (key == "hfov") cfg->hfov = val.get<double>();
      else if (key == "vfov") cfg->vfov = val.get<double>();
      else if (key == "phi") cfg->phi = val.get<double>();
      else if (key == "height") cfg->height = val.get<int>();
      else if (key == "interp") cfg->interp = val.get<std::string>();
      else if (key == "k") cfg->k = val.get<int>();
      else if (key == "r") cfg->r = val.get<double>();
      else if (key == "alpha") cfg->alpha = val.get<double>();
      else if (key == "lr") cfg->lr = val.get<double>();
      else if (key == "momentum") cfg->momentum = val.get<double>();
      else if (key == "batch_size") cfg->batch_size = val.get<int>();
      else if (key == "epochs") cfg->epochs = val.get<int>();
      else if (key == "lr_halve_every") cfg->lr_halve_every = val.get<int>();
      else if (key == "aggregator") cfg->aggregator = val.get<std::string>();
      else if (key == "head_kind") cfg->head_kind = val.get<std::string>();
      else if (key == "use_mask") cfg->use_mask = val.get<bool>();
      else if (key == "frame_w") cfg->frame_w = val.get<int>();
      else if (key == "frame_h") cfg->frame_h = val.get<int>();
      else if (key == "classes") cfg->classes = val.get<int>();
      else if (key == "feat_dim") cfg->feat_dim = val.get<int>();
      else if (key == "grid_h") cfg->grid_h = val.get<int>();
      else if (key == "grid_w") cfg->grid_w = val.get<int>();
      else if (key == "noise") cfg->noise = val.get<double>();
      else if (key == "gain") cfg->gain = val.get<double>();
      else if (key == "max_concurrent") cfg->max_concurrent = val.get<int>();
      else if (key == "distractors") cfg->distractors = val.get<int>();
      else if (key == "train_samples") cfg->train_samples = val.get<int>();
      else if (key == "test_samples") cfg->test_samples = val.get<int>();
      else die(OMNIACT_ERR_INVALID, path + ": unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      die(OMNIACT_ERR_INVALID, path + ": key '" + key + "': " + e.what());
    }
  }
}

int aggregator_code(const std::string& s) {
  if (s == "avg") return OMNIACT_AGG_AVG;
  if (s == "max") return OMNIACT_AGG_MAX;
  if (s == "lse") return OMNIACT_AGG_LSE;
  if (s == "attention") return OMNIACT_AGG_ATTENTION;
  die(OMNIACT_ERR_INVALID, "unknown aggregator '" + s + "'");
}

int head_kind_code(const std::string& s) {
  if (s == "miml") return OMNIACT_HEAD_MIML;
  if (s == "pool_avg") return OMNIACT_HEAD_POOL_AVG;
  if (s == "pool_max") return OMNIACT_HEAD_POOL_MAX;
  die(OMNIACT_ERR_INVALID, "unknown head kind '" + s + "'");
}

omniact_hyperparams hyperparams_from(const Config& cfg) {
  omniact_hyperparams hp;
  omniact_hyperparams_defaults(&hp);
  hp.k = cfg.k;
  hp.lse_sharpness = cfg.r;
  hp.reg_weight = cfg.alpha;
  hp.lr = cfg.lr;
  hp.momentum = cfg.momentum;
  hp.batch_size = cfg.batch_size;
  hp.epochs = cfg.epochs;
  hp.lr_halve_every = cfg.lr_halve_every;
  hp.aggregator = aggregator_code(cfg.aggregator);
  hp.head_kind = head_kind_code(cfg.head_kind);
  return hp;
}

DatasetHandle load_dataset(const std::string& manifest, const Config& cfg) {
  DatasetHandle ds;
  check(omniact_dataset_load(manifest.c_str(), cfg.use_mask ? 1 : 0,
                             cfg.frame_w, cfg.frame_h, ds.out()));
  return ds;
}

struct EvalResult {
  double map = 0.0;
  std::vector<double> scores;       // n x C
  std::vector<uint8_t> labels;      // n x C
  std::vector<double> per_class_ap; // C
  size_t n = 0;
  int c = 0;
};

EvalResult evaluate(const omniact_head* head, const omniact_dataset* ds,
                    const omniact_hyperparams& hp) {
  EvalResult res;
  check(omniact_dataset_size(ds, &res.n));
  check(omniact_dataset_n_classes(ds, &res.c));
  if (res.n == 0) die(OMNIACT_ERR_INVALID, "dataset is empty");
  res.scores.resize(res.n * res.c);
  check(omniact_predict_all(head, ds, &hp, res.scores.data()));
  res.labels.resize(res.n * res.c);
  for (size_t i = 0; i < res.n; ++i) {
    const uint8_t* lab = nullptr;
    size_t len = 0;
    check(omniact_dataset_labels(ds, i, &lab, &len));
    std::copy(lab, lab + len, res.labels.begin() + i * res.c);
  }
  res.per_class_ap.resize(res.c);
  check(omniact_eval_scores(res.scores.data(), res.labels.data(), res.n,
                            res.c, res.per_class_ap.data(), &res.map));
  return res;
}

// ---------------------------------------------------------------- unwrap

struct UnwrapArgs {
  std::vector<std::string> inputs;
  std::string keypoints;
  std::string center;  // "x,y" override
  std::string table;
  std::string out_dir = ".";
};

int cmd_unwrap(const UnwrapArgs& args, const Config& cfg) {
  if (args.inputs.empty()) die(OMNIACT_ERR_INVALID, "no input frames given");

  int pano_w = 0;
  check(omniact_panorama_dims(cfg.hfov, cfg.vfov, cfg.height, &pano_w));

  ImageHandle first;
  check(omniact_image_read(args.inputs[0].c_str(), first.out()));
  int fe_w = 0, fe_h = 0, fe_ch = 0;
  check(omniact_image_info(first.get(), &fe_w, &fe_h, &fe_ch));

  double cx = 0.0, cy = 0.0;
  if (!args.center.empty()) {
    if (std::sscanf(args.center.c_str(), "%lf,%lf", &cx, &cy) != 2) {
      die(OMNIACT_ERR_INVALID, "--center expects 'x,y'");
    }
  } else {
    if (args.keypoints.empty()) {
      die(OMNIACT_ERR_INVALID, "need --keypoints or an explicit --center");
    }
    size_t frames_used = 0;
    check(omniact_center_from_keypoints_file(args.keypoints.c_str(), &cx, &cy,
                                             &frames_used));
    std::cout << "center estimated from " << frames_used << " frame(s)\n";
  }

  double radius = 0.0;
  check(omniact_fisheye_radius(cx, cy, fe_w, fe_h, &radius));
  std::cout << "center: (" << cx << ", " << cy << ")\n"
            << "radius: " << radius << "\n"
            << "panorama: " << pano_w << "x" << cfg.height << "\n";

  MappingHandle mapping;
  if (!args.table.empty() && fs::exists(args.table)) {
    check(omniact_mapping_load(args.table.c_str(), fe_w, fe_h, mapping.out()));
    int tw = 0, th = 0;
    check(omniact_mapping_dims(mapping.get(), &tw, &th));
    if (tw != pano_w || th != cfg.height) {
      die(OMNIACT_ERR_INVALID, "cached table size does not match the config");
    }
    std::cout << "mapping: loaded " << args.table << "\n";
  } else {
    check(omniact_mapping_build(pano_w, cfg.height, cx, cy, radius, cfg.phi,
                                fe_w, fe_h, mapping.out()));
    if (!args.table.empty()) {
      check(omniact_mapping_save(mapping.get(), args.table.c_str()));
      std::cout << "mapping: cached to " << args.table << "\n";
    }
  }

  const int interp = cfg.interp == "nearest" ? OMNIACT_INTERP_NEAREST
                     : cfg.interp == "bilinear"
                         ? OMNIACT_INTERP_BILINEAR
                         : (die(OMNIACT_ERR_INVALID,
                                "interp must be nearest or bilinear"),
                            0);

  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  for (const std::string& input : args.inputs) {
    ImageHandle frame;
    check(omniact_image_read(input.c_str(), frame.out()));
    int w = 0, h = 0, ch = 0;
    check(omniact_image_info(frame.get(), &w, &h, &ch));
    if (w != fe_w || h != fe_h) {
      die(OMNIACT_ERR_INVALID, input + ": frame size differs from the first input");
    }
    ImageHandle pano;
    check(omniact_remap(frame.get(), mapping.get(), interp, pano.out()));
    const fs::path in_path(input);
    const std::string ext = ch == 1 ? ".pgm" : ".ppm";
    const std::string out_path =
        (fs::path(args.out_dir) / (in_path.stem().string() + "_pano" + ext))
            .string();
    check(omniact_image_write(pano.get(), out_path.c_str()));
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  bool fisheye_demo = false;
};

int cmd_synth(const SynthArgs& args, const Config& cfg) {
  omniact_synth_spec spec;
  omniact_synth_spec_defaults(&spec);
  spec.n_classes = cfg.classes;
  spec.feat_dim = cfg.feat_dim;
  spec.grid_h = cfg.grid_h;
  spec.grid_w = cfg.grid_w;
  spec.k = cfg.k;
  spec.n_instances_max = (cfg.grid_w + cfg.k - 1) / cfg.k;
  spec.noise_sigma = cfg.noise;
  spec.signal_gain = cfg.gain;
  spec.max_concurrent_actions = cfg.max_concurrent;
  spec.n_distractors = cfg.distractors;
  spec.frame_w = cfg.frame_w;
  spec.frame_h = cfg.frame_h;

  check(omniact_synth_write_dataset(args.out_dir.c_str(), &spec,
                                    cfg.train_samples, cfg.test_samples,
                                    cfg.seed));
  std::cout << "wrote " << cfg.train_samples << " train / " << cfg.test_samples
            << " test samples under " << args.out_dir << "\n";

  if (args.fisheye_demo) {
    const int size = 512;
    const double cx = 240.0, cy = 272.0;
    std::vector<double> rays;
    for (int a = 0; a < 360; a += 30) rays.push_back(a);
    ImageHandle img;
    check(omniact_synth_fisheye(size, size, cx, cy, rays.data(), rays.size(),
                                img.out()));
    const std::string img_path = args.out_dir + "/fisheye_demo.pgm";
    check(omniact_image_write(img.get(), img_path.c_str()));
    const std::string kp_path = args.out_dir + "/keypoints_demo.json";
    check(omniact_synth_keypoints(kp_path.c_str(), size, size, cx, cy, 12, 0.5,
                                  cfg.seed));
    std::cout << "wrote " << img_path << " and " << kp_path
              << " (true center " << cx << "," << cy << ")\n";
  }
  return 0;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string manifest;
  std::string out_head;
  std::string metrics;
};

int cmd_train(const TrainArgs& args, const Config& cfg) {
  const omniact_hyperparams hp = hyperparams_from(cfg);
  DatasetHandle ds = load_dataset(args.manifest, cfg);
  HeadHandle head;
  check(omniact_train(ds.get(), &hp, cfg.seed,
                      args.metrics.empty() ? nullptr : args.metrics.c_str(),
                      head.out()));
  if (!args.out_head.empty()) {
    check(omniact_head_save(head.get(), args.out_head.c_str()));
    std::cout << "wrote " << args.out_head << "\n";
  }
  const EvalResult res = evaluate(head.get(), ds.get(), hp);
  std::cout << "train mAP: " << res.map << "\n";
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string manifest;
  std::string head;
  std::string pred_in;
  std::string out_pred;
  std::string out_ap;
};

int cmd_eval(const EvalArgs& args, const Config& cfg) {
  if (!args.pred_in.empty()) {
    double map = 0.0;
    check(omniact_eval_pred_csv(args.pred_in.c_str(),
                                args.out_ap.empty() ? nullptr
                                                    : args.out_ap.c_str(),
                                &map));
    std::cout << "mAP: " << map << "\n";
    return 0;
  }
  if (args.manifest.empty() || args.head.empty()) {
    die(OMNIACT_ERR_INVALID, "need --manifest and --head (or --pred)");
  }
  const omniact_hyperparams hp = hyperparams_from(cfg);
  DatasetHandle ds = load_dataset(args.manifest, cfg);
  int n_classes = 0, feat_dim = 0;
  check(omniact_dataset_n_classes(ds.get(), &n_classes));
  check(omniact_dataset_feat_dim(ds.get(), &feat_dim));
  HeadHandle head;
  check(omniact_head_load(args.head.c_str(), n_classes, feat_dim,
                          hp.aggregator == OMNIACT_AGG_ATTENTION &&
                              hp.head_kind == OMNIACT_HEAD_MIML,
                          head.out()));
  const EvalResult res = evaluate(head.get(), ds.get(), hp);
  if (!args.out_pred.empty()) {
    check(omniact_predictions_write_csv(args.out_pred.c_str(),
                                        res.scores.data(), res.labels.data(),
                                        res.n, res.c));
    std::cout << "wrote " << args.out_pred << "\n";
  }
  if (!args.out_ap.empty()) {
    double map2 = 0.0;
    // Route through the CSV so the table matches what a re-evaluation of
    // the file would produce.
    const std::string tmp = args.out_ap + ".pred.tmp";
    check(omniact_predictions_write_csv(tmp.c_str(), res.scores.data(),
                                        res.labels.data(), res.n, res.c));
    check(omniact_eval_pred_csv(tmp.c_str(), args.out_ap.c_str(), &map2));
    fs::remove(tmp);
    std::cout << "wrote " << args.out_ap << "\n";
  }
  for (int a = 0; a < res.c; ++a) {
    if (std::isnan(res.per_class_ap[a])) {
      std::cout << "class " << a << ": AP undefined (no positives)\n";
    } else {
      std::cout << "class " << a << ": AP " << res.per_class_ap[a] << "\n";
    }
  }
  std::cout << "mAP: " << res.map << "\n";
  return 0;
}

// -------------------------------------------------------------- localize

struct LocalizeArgs {
  std::string manifest;
  std::string head;
  std::string out_dir = ".";
  std::string truth;
  std::string overlay_dir;
  double threshold = 0.5;
  int upsample_w = 0;
  int upsample_h = 0;
  int max_samples = 0;  // 0 = all
};

int cmd_localize(const LocalizeArgs& args, const Config& cfg) {
  const omniact_hyperparams hp = hyperparams_from(cfg);
  DatasetHandle ds = load_dataset(args.manifest, cfg);
  size_t n = 0;
  int n_classes = 0, feat_dim = 0;
  check(omniact_dataset_size(ds.get(), &n));
  check(omniact_dataset_n_classes(ds.get(), &n_classes));
  check(omniact_dataset_feat_dim(ds.get(), &feat_dim));
  HeadHandle head;
  check(omniact_head_load(args.head.c_str(), n_classes, feat_dim,
                          hp.aggregator == OMNIACT_AGG_ATTENTION &&
                              hp.head_kind == OMNIACT_HEAD_MIML,
                          head.out()));

  json truth;
  if (!args.truth.empty()) {
    std::ifstream in(args.truth);
    if (!in) die(OMNIACT_ERR_IO, "cannot open truth file: " + args.truth);
    try {
      truth = json::parse(in);
    } catch (const json::exception& e) {
      die(OMNIACT_ERR_IO, args.truth + ": " + e.what());
    }
  }

  std::error_code ec;
  fs::create_directories(args.out_dir, ec);

  std::vector<int32_t> hit_cols, span_lo, span_hi;
  std::vector<double> probs(n_classes);
  const size_t limit =
      args.max_samples > 0 ? std::min<size_t>(n, args.max_samples) : n;

  for (size_t i = 0; i < limit; ++i) {
    check(omniact_predict(head.get(), ds.get(), i, &hp, probs.data(), nullptr));
    const char* name = nullptr;
    check(omniact_dataset_name(ds.get(), i, &name));

    for (int a = 0; a < n_classes; ++a) {
      if (!(probs[a] > args.threshold)) continue;
      TensorHandle heat;
      check(omniact_gradcam(head.get(), ds.get(), i, a, &hp, heat.out()));

      int32_t col = 0;
      check(omniact_heatmap_argmax_col(heat.get(), &col));
      std::cout << name << " class " << a << ": p=" << probs[a]
                << " argmax_col=" << col << "\n";

      TensorHandle up;
      const omniact_tensor* to_write = heat.get();
      if (args.upsample_w > 0 && args.upsample_h > 0) {
        check(omniact_heatmap_upsample(heat.get(), args.upsample_w,
                                       args.upsample_h, up.out()));
        to_write = up.get();
      }
      const std::string base = std::string(name) + "_" + std::to_string(a);
      const std::string pgm_path =
          (fs::path(args.out_dir) / (base + ".pgm")).string();
      check(omniact_heatmap_write_pgm(to_write, pgm_path.c_str()));

      if (!args.overlay_dir.empty()) {
        const std::string pano_path =
            (fs::path(args.overlay_dir) / (std::string(name) + ".ppm"))
                .string();
        if (fs::exists(pano_path)) {
          ImageHandle pano, blend;
          check(omniact_image_read(pano_path.c_str(), pano.out()));
          check(omniact_heatmap_overlay(to_write, pano.get(), blend.out()));
          const std::string overlay_path =
              (fs::path(args.out_dir) / (base + "_overlay.ppm")).string();
          check(omniact_image_write(blend.get(), overlay_path.c_str()));
        }
      }

      if (!truth.is_null()) {
        const int k = truth.at("k").get<int>();
        const int grid_w = truth.at("grid_w").get<int>();
        for (const json& p : truth.at("samples").at(i).at("placements")) {
          if (p.at(1).get<int>() != a) continue;
          const int block = p.at(0).get<int>();
          hit_cols.push_back(col);
          span_lo.push_back(block * k);
          span_hi.push_back(std::min(grid_w, (block + 1) * k));
        }
      }
    }
  }

  if (!truth.is_null() && !hit_cols.empty()) {
    double rate = 0.0;
    check(omniact_localization_hit_rate(hit_cols.data(), span_lo.data(),
                                        span_hi.data(), hit_cols.size(),
                                        &rate));
    std::cout << "localization hit rate: " << rate << " over "
              << hit_cols.size() << " planted actions\n";
  }
  return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string data_dir;
  std::string out_csv;
  int seeds = 5;
};

struct Preset {
  std::string name;
  std::string head_kind = "miml";
  std::string aggregator = "lse";
  bool mask = true;
  double alpha = 0.001;
  int k = 8;
  double r = 0.8;
};

int cmd_ablate(const AblateArgs& args, const Config& cfg) {
  std::vector<Preset> presets;
  // Aggregator x mask x alpha grid at default k and r.
  for (const char* agg : {"avg", "max", "lse", "attention"}) {
    for (bool mask : {true, false}) {
      for (double alpha : {0.0, 0.001}) {
        Preset p;
        p.name = std::string("agg_") + agg + (mask ? "_mask" : "_nomask") +
                 (alpha > 0 ? "_reg" : "_noreg");
        p.aggregator = agg;
        p.mask = mask;
        p.alpha = alpha;
        presets.push_back(p);
      }
    }
  }
  // Instance width sweep.
  for (int k : {2, 4, 8, 16}) {
    Preset p;
    p.name = "k_" + std::to_string(k);
    p.k = k;
    presets.push_back(p);
  }
  // LSE sharpness sweep.
  for (double r : {0.2, 0.4, 0.8, 1.6, 3.2}) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "r_%g", r);
    Preset p;
    p.name = buf;
    p.r = r;
    presets.push_back(p);
  }
  // Whole-map pooling baselines.
  for (const char* kind : {"pool_avg", "pool_max"}) {
    for (bool mask : {true, false}) {
      Preset p;
      p.name = std::string(kind) + (mask ? "_mask" : "_nomask");
      p.head_kind = kind;
      p.mask = mask;
      presets.push_back(p);
    }
  }

  const std::string train_manifest = args.data_dir + "/train_manifest.json";
  const std::string test_manifest = args.data_dir + "/test_manifest.json";

  Config masked = cfg;
  masked.use_mask = true;
  Config unmasked = cfg;
  unmasked.use_mask = false;
  DatasetHandle train_m = load_dataset(train_manifest, masked);
  DatasetHandle test_m = load_dataset(test_manifest, masked);
  DatasetHandle train_u = load_dataset(train_manifest, unmasked);
  DatasetHandle test_u = load_dataset(test_manifest, unmasked);

  std::ofstream out(args.out_csv);
  if (!out) die(OMNIACT_ERR_IO, "cannot open " + args.out_csv);
  out << "preset,head_kind,aggregator,mask,alpha,k,r,seed,test_map\n";

  for (const Preset& p : presets) {
    for (int s = 0; s < args.seeds; ++s) {
      Config run = cfg;
      run.head_kind = p.head_kind;
      run.aggregator = p.aggregator;
      run.alpha = p.alpha;
      run.k = p.k;
      run.r = p.r;
      const omniact_hyperparams hp = hyperparams_from(run);
      const uint64_t seed = cfg.seed + static_cast<uint64_t>(s);
      const omniact_dataset* train = p.mask ? train_m.get() : train_u.get();
      const omniact_dataset* test = p.mask ? test_m.get() : test_u.get();
      HeadHandle head;
      check(omniact_train(train, &hp, seed, nullptr, head.out()));
      const EvalResult res = evaluate(head.get(), test, hp);
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%s,%s,%d,%g,%d,%g,%llu,%.17g\n",
                    p.name.c_str(), p.head_kind.c_str(), p.aggregator.c_str(),
                    p.mask ? 1 : 0, p.alpha, p.k, p.r,
                    static_cast<unsigned long long>(seed), res.map);
      out << line;
      std::cout << p.name << " seed " << seed << ": test mAP " << res.map
                << "\n";
    }
  }
  std::cout << "wrote " << args.out_csv << " (" << presets.size() << " presetsx"
            << args.seeds << " seeds)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omniact: top-view fisheye unwrapping and weakly-supervised "
               "multi-instance multi-label action recognition"};
  app.require_subcommand(1);

  Config cfg;
  // Config file first, then flags on top.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      apply_config_file(argv[i + 1], &cfg);
    }
  }

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--config", "JSON config file (flags override it)")
        ->expected(1);
    sub->add_option("--seed", cfg.seed, "global random seed");
  };
  auto add_hyper = [&cfg](CLI::App* sub) {
    sub->add_option("--k", cfg.k, "instance block width");
    sub->add_option("--r", cfg.r, "LSE sharpness");
    sub->add_option("--alpha", cfg.alpha, "sparsity regularizer weight");
    sub->add_option("--lr", cfg.lr, "learning rate");
    sub->add_option("--momentum", cfg.momentum, "SGD momentum");
    sub->add_option("--batch", cfg.batch_size, "mini-batch size");
    sub->add_option("--epochs", cfg.epochs, "training epochs");
    sub->add_option("--halve-every", cfg.lr_halve_every,
                    "halve the lr every this many epochs");
    sub->add_option("--aggregator", cfg.aggregator,
                    "avg | max | lse | attention");
    sub->add_option("--head-kind", cfg.head_kind,
                    "miml | pool_avg | pool_max");
  };
  auto add_mask = [&cfg](CLI::App* sub) {
    sub->add_flag("--mask,!--no-mask", cfg.use_mask,
                  "apply region masks from the manifest's boxes");
    sub->add_option("--frame-w", cfg.frame_w, "box frame width");
    sub->add_option("--frame-h", cfg.frame_h, "box frame height");
  };

  UnwrapArgs unwrap_args;
  CLI::App* unwrap = app.add_subcommand(
      "unwrap", "transform top-view fisheye frames into panoramas");
  add_common(unwrap);
  unwrap->add_option("--input", unwrap_args.inputs, "fisheye PGM/PPM frames")
      ->required();
  unwrap->add_option("--keypoints", unwrap_args.keypoints,
                     "keypoints JSON for center estimation");
  unwrap->add_option("--center", unwrap_args.center,
                     "x,y center override (skips estimation)");
  unwrap->add_option("--table", unwrap_args.table,
                     "mapping table cache path (loaded if present)");
  unwrap->add_option("--out", unwrap_args.out_dir, "output directory");
  unwrap->add_option("--height", cfg.height, "panorama height");
  unwrap->add_option("--hfov", cfg.hfov, "horizontal FoV in degrees");
  unwrap->add_option("--vfov", cfg.vfov, "vertical FoV in degrees");
  unwrap->add_option("--phi", cfg.phi, "unwrap start angle in degrees");
  unwrap->add_option("--interp", cfg.interp, "nearest | bilinear");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic planted-actor dataset");
  add_common(synth);
  synth->add_option("--out", synth_args.out_dir, "output directory")
      ->required();
  synth->add_option("--train-samples", cfg.train_samples, "training clips");
  synth->add_option("--test-samples", cfg.test_samples, "test clips");
  synth->add_option("--classes", cfg.classes, "number of action classes");
  synth->add_option("--feat-dim", cfg.feat_dim, "feature channels");
  synth->add_option("--grid-h", cfg.grid_h, "feature grid height");
  synth->add_option("--grid-w", cfg.grid_w, "feature grid width");
  synth->add_option("--k", cfg.k, "block width for actor placement");
  synth->add_option("--noise", cfg.noise, "gaussian noise sigma");
  synth->add_option("--gain", cfg.gain, "planted signal gain");
  synth->add_option("--max-concurrent", cfg.max_concurrent,
                    "max concurrent actions per clip");
  synth->add_option("--distractors", cfg.distractors,
                    "off-label actors outside the mask region");
  synth->add_option("--frame-w", cfg.frame_w, "nominal frame width for boxes");
  synth->add_option("--frame-h", cfg.frame_h, "nominal frame height for boxes");
  synth->add_flag("--fisheye-demo", synth_args.fisheye_demo,
                  "also write a synthetic fisheye image and keypoints file");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a scoring head");
  add_common(train);
  add_hyper(train);
  add_mask(train);
  train->add_option("--manifest", train_args.manifest, "dataset manifest")
      ->required();
  train->add_option("--out", train_args.out_head, "head output path");
  train->add_option("--metrics", train_args.metrics, "per-epoch metrics CSV");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "evaluate a head (or a prediction CSV) with per-class AP/mAP");
  add_common(eval);
  add_hyper(eval);
  add_mask(eval);
  eval->add_option("--manifest", eval_args.manifest, "dataset manifest");
  eval->add_option("--head", eval_args.head, "trained head file");
  eval->add_option("--pred", eval_args.pred_in,
                   "score an existing prediction CSV instead");
  eval->add_option("--out-pred", eval_args.out_pred, "prediction CSV output");
  eval->add_option("--out-ap", eval_args.out_ap, "per-class AP table output");

  LocalizeArgs loc_args;
  CLI::App* localize = app.add_subcommand(
      "localize", "write Grad-CAM heatmaps for predicted actions");
  add_common(localize);
  add_hyper(localize);
  add_mask(localize);
  localize->add_option("--manifest", loc_args.manifest, "dataset manifest")
      ->required();
  localize->add_option("--head", loc_args.head, "trained head file")
      ->required();
  localize->add_option("--out", loc_args.out_dir, "output directory");
  localize->add_option("--truth", loc_args.truth,
                       "planted-truth JSON for hit-rate scoring");
  localize->add_option("--overlay-dir", loc_args.overlay_dir,
                       "directory of <clip>.ppm panoramas to blend over");
  localize->add_option("--threshold", loc_args.threshold,
                       "prediction threshold");
  localize->add_option("--upsample-w", loc_args.upsample_w,
                       "upsample heatmaps to this width");
  localize->add_option("--upsample-h", loc_args.upsample_h,
                       "upsample heatmaps to this height");
  localize->add_option("--samples", loc_args.max_samples,
                       "only process the first N clips (0 = all)");

  AblateArgs ablate_args;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "run the aggregator/mask/alpha/k/r preset grid");
  add_common(ablate);
  add_hyper(ablate);
  add_mask(ablate);
  ablate->add_option("--data", ablate_args.data_dir,
                     "dataset directory written by synth")
      ->required();
  ablate->add_option("--out", ablate_args.out_csv, "summary CSV")->required();
  ablate->add_option("--seeds", ablate_args.seeds, "seeds per preset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);  // prints the help text
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error
    return OMNIACT_ERR_INVALID;
  }

  try {
    if (unwrap->parsed()) return cmd_unwrap(unwrap_args, cfg);
    if (synth->parsed()) return cmd_synth(synth_args, cfg);
    if (train->parsed()) return cmd_train(train_args, cfg);
    if (eval->parsed()) return cmd_eval(eval_args, cfg);
    if (localize->parsed()) return cmd_localize(loc_args, cfg);
    if (ablate->parsed()) return cmd_ablate(ablate_args, cfg);
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return OMNIACT_ERR_IO;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return OMNIACT_ERR_INVALID;
  }
  return OMNIACT_ERR_INVALID;
}
