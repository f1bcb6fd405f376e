#include "core/dataset.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "core/error.hpp"

namespace omniact::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw_io(path + ": " + e.what());
  }
}

void dump_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open file for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw_io("failed writing: " + path);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string resolve(const std::string& base_file, const std::string& rel) {
  const fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(base_file).parent_path() / p).string();
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_array()) throw_io(path + ": manifest must be a JSON array");
  std::vector<ManifestEntry> entries;
  entries.reserve(j.size());
  for (const json& item : j) {
    if (!item.is_object() || !item.contains("features") ||
        !item.contains("labels")) {
      throw_io(path + ": manifest entries need 'features' and 'labels'");
    }
    ManifestEntry e;
    e.features = item.at("features").get<std::string>();
    if (item.contains("boxes") && !item.at("boxes").is_null()) {
      e.boxes = item.at("boxes").get<std::string>();
    }
    for (const json& l : item.at("labels")) {
      const int v = l.get<int>();
      if (v != 0 && v != 1) throw_io(path + ": labels must be 0 or 1");
      e.labels.push_back(static_cast<uint8_t>(v));
    }
    if (e.labels.empty()) throw_io(path + ": empty label vector");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  json j = json::array();
  for (const ManifestEntry& e : entries) {
    json item;
    item["features"] = e.features;
    item["boxes"] = e.boxes.empty() ? json() : json(e.boxes);
    item["labels"] = e.labels;
    j.push_back(std::move(item));
  }
  dump_file(j, path);
}

LoadedDataset load_samples(const std::string& manifest_path,
                           const LoadOptions& opts) {
  const std::vector<ManifestEntry> entries = read_manifest(manifest_path);
  LoadedDataset out;
  out.samples.reserve(entries.size());
  out.names.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    miml::TrainSample sample;
    sample.features = read_tensor(resolve(manifest_path, e.features));
    if (sample.features.dims.size() != 3) {
      throw_io(e.features + ": feature tensor must be C x H x W");
    }
    sample.labels = e.labels;
    if (opts.use_mask && !e.boxes.empty()) {
      if (opts.frame_w < 1 || opts.frame_h < 1) {
        throw_invalid("mask application needs the box frame resolution");
      }
      const std::vector<FrameBoxes> frames =
          read_boxes(resolve(manifest_path, e.boxes));
      const regionmask::BinaryMask frame_mask = regionmask::clip_mask(
          flatten_boxes(frames), opts.frame_w, opts.frame_h);
      const regionmask::BinaryMask feat_mask = regionmask::downsample_mask(
          frame_mask, static_cast<int>(sample.features.dims[2]),
          static_cast<int>(sample.features.dims[1]));
      sample.features = regionmask::apply_mask(sample.features, feat_mask);
      sample.mask = regionmask::mask_to_tensor(feat_mask);
    }
    out.samples.push_back(std::move(sample));
    out.names.push_back(fs::path(e.features).stem().string());
  }
  return out;
}

std::vector<KeypointPair> read_keypoints(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_array()) throw_io(path + ": keypoints must be a JSON array");
  std::vector<KeypointPair> pairs;
  for (const json& item : j) {
    if (!item.is_object() || !item.contains("frame") ||
        !item.contains("mid_shoulder") || !item.contains("mid_hip")) {
      throw_io(path + ": entries need frame, mid_shoulder, mid_hip");
    }
    const json& s = item.at("mid_shoulder");
    const json& h = item.at("mid_hip");
    if (!s.is_array() || s.size() != 2 || !h.is_array() || h.size() != 2) {
      throw_io(path + ": keypoints must be [x, y] pairs");
    }
    KeypointPair p;
    p.frame = item.at("frame").get<int>();
    p.shoulder_x = s[0].get<double>();
    p.shoulder_y = s[1].get<double>();
    p.hip_x = h[0].get<double>();
    p.hip_y = h[1].get<double>();
    pairs.push_back(p);
  }
  return pairs;
}

void write_keypoints(const std::string& path,
                     const std::vector<KeypointPair>& pairs) {
  json j = json::array();
  for (const KeypointPair& p : pairs) {
    json item;
    item["frame"] = p.frame;
    item["mid_shoulder"] = {p.shoulder_x, p.shoulder_y};
    item["mid_hip"] = {p.hip_x, p.hip_y};
    j.push_back(std::move(item));
  }
  dump_file(j, path);
}

geometry::FisheyeCenter center_from_keypoints(
    const std::vector<KeypointPair>& pairs, size_t* frames_used) {
  if (pairs.empty()) throw_invalid("keypoints file holds no spine pairs");
  std::map<int, std::vector<geometry::SpineLine>> by_frame;
  std::vector<geometry::SpineLine> all;
  for (const KeypointPair& p : pairs) {
    geometry::SpineLine line;
    try {
      line = geometry::spine_from_keypoints(p.shoulder_x, p.shoulder_y,
                                            p.hip_x, p.hip_y);
    } catch (const Error&) {
      continue;  // coincident keypoints: drop the detection
    }
    by_frame[p.frame].push_back(line);
    all.push_back(line);
  }

  std::vector<geometry::FisheyeCenter> centers;
  for (const auto& [frame, spines] : by_frame) {
    if (spines.size() < 2) continue;
    try {
      centers.push_back(geometry::estimate_center(spines));
    } catch (const Error&) {
      // all-parallel frame: skip it
    }
  }
  if (centers.empty()) {
    // No frame was solvable alone; pool every spine.
    centers.push_back(geometry::estimate_center(all));
  }
  if (frames_used) *frames_used = centers.size();
  return geometry::averaged_center(centers);
}

std::vector<FrameBoxes> read_boxes(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_array()) throw_io(path + ": boxes file must be a JSON array");
  std::vector<FrameBoxes> frames;
  for (const json& item : j) {
    if (!item.is_object() || !item.contains("frame") ||
        !item.contains("boxes")) {
      throw_io(path + ": entries need frame and boxes");
    }
    FrameBoxes fb;
    fb.frame = item.at("frame").get<int>();
    for (const json& b : item.at("boxes")) {
      if (!b.is_array() || b.size() != 4) {
        throw_io(path + ": boxes must be [x0, y0, x1, y1]");
      }
      fb.boxes.push_back(
          {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
    }
    frames.push_back(std::move(fb));
  }
  return frames;
}

void write_boxes(const std::string& path,
                 const std::vector<FrameBoxes>& frames) {
  json j = json::array();
  for (const FrameBoxes& fb : frames) {
    json item;
    item["frame"] = fb.frame;
    json arr = json::array();
    for (const auto& b : fb.boxes) arr.push_back({b[0], b[1], b[2], b[3]});
    item["boxes"] = std::move(arr);
    j.push_back(std::move(item));
  }
  dump_file(j, path);
}

std::vector<regionmask::BoundingBox> flatten_boxes(
    const std::vector<FrameBoxes>& frames) {
  std::vector<regionmask::BoundingBox> out;
  for (const FrameBoxes& fb : frames) {
    for (const auto& b : fb.boxes) {
      out.push_back({b[0], b[1], b[2], b[3], fb.frame});
    }
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<miml::EpochMetrics>& metrics) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open metrics file for writing: " + path);
  out << "epoch,lr,loss_bce,loss_reg,train_map\n";
  for (const miml::EpochMetrics& m : metrics) {
    out << m.epoch << "," << fmt_double(m.lr) << "," << fmt_double(m.loss_bce)
        << "," << fmt_double(m.loss_reg) << "," << fmt_double(m.train_map)
        << "\n";
  }
  if (!out) throw_io("failed writing metrics: " + path);
}

void write_predictions_csv(const std::string& path, const Matrix& scores,
                           const std::vector<std::vector<uint8_t>>& labels) {
  if (static_cast<size_t>(scores.rows) != labels.size()) {
    throw_invalid("score matrix and labels disagree on sample count");
  }
  std::ofstream out(path);
  if (!out) throw_io("cannot open predictions file for writing: " + path);
  out << "sample_id,class,score,label\n";
  for (int i = 0; i < scores.rows; ++i) {
    for (int a = 0; a < scores.cols; ++a) {
      out << i << "," << a << "," << fmt_double(scores.at(i, a)) << ","
          << static_cast<int>(labels[i][a]) << "\n";
    }
  }
  if (!out) throw_io("failed writing predictions: " + path);
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open predictions file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,class,score,label") {
    throw_io(path + ": expected header sample_id,class,score,label");
  }
  std::vector<PredictionRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    PredictionRow r;
    int label = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%d", &r.sample_id, &r.class_id,
                    &r.score, &label) != 4 ||
        (label != 0 && label != 1)) {
      throw_io(path + ": malformed row at line " + std::to_string(lineno));
    }
    r.label = static_cast<uint8_t>(label);
    rows.push_back(r);
  }
  return rows;
}

void write_ap_csv(const std::string& path,
                  const std::vector<double>& per_class_ap, double map) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open AP file for writing: " + path);
  out << "class,ap\n";
  for (size_t a = 0; a < per_class_ap.size(); ++a) {
    out << a << ",";
    if (std::isnan(per_class_ap[a])) {
      out << "undefined";
    } else {
      out << fmt_double(per_class_ap[a]);
    }
    out << "\n";
  }
  out << "mAP," << fmt_double(map) << "\n";
  if (!out) throw_io("failed writing AP table: " + path);
}

namespace {

std::string sample_name(const char* split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", split, index);
  return buf;
}

void write_split(const std::string& out_dir, const char* split,
                 const synth::SynthSpec& spec, const synth::MimlDataset& data,
                 int frame_w, int frame_h, std::string* manifest_path,
                 std::string* truth_path) {
  std::vector<ManifestEntry> entries;
  entries.reserve(data.samples.size());
  for (size_t i = 0; i < data.samples.size(); ++i) {
    const std::string name = sample_name(split, static_cast<int>(i));
    const std::string feat_rel = "features/" + name + ".otsr";
    const std::string boxes_rel = "boxes/" + name + ".json";
    write_tensor(data.samples[i].features, out_dir + "/" + feat_rel);

    // Actor boxes at nominal frame resolution: each planted block becomes a
    // full-height box over its column span.
    FrameBoxes fb;
    fb.frame = 0;
    for (const synth::Placement& p : data.truth.per_sample[i]) {
      const int col0 = p.instance_index * spec.k;
      const int col1 = std::min(spec.grid_w, (p.instance_index + 1) * spec.k);
      fb.boxes.push_back(
          {static_cast<int>(static_cast<int64_t>(col0) * frame_w /
                            spec.grid_w),
           0,
           static_cast<int>(static_cast<int64_t>(col1) * frame_w /
                            spec.grid_w),
           frame_h});
    }
    write_boxes(out_dir + "/" + boxes_rel, {fb});

    ManifestEntry e;
    e.features = feat_rel;
    e.boxes = boxes_rel;
    e.labels = data.samples[i].labels;
    entries.push_back(std::move(e));
  }
  *manifest_path = out_dir + "/" + split + std::string("_manifest.json");
  write_manifest(*manifest_path, entries);

  json truth;
  truth["n_classes"] = spec.n_classes;
  truth["k"] = spec.k;
  truth["grid_h"] = spec.grid_h;
  truth["grid_w"] = spec.grid_w;
  truth["frame_w"] = frame_w;
  truth["frame_h"] = frame_h;
  json samples = json::array();
  for (const auto& placements : data.truth.per_sample) {
    json plist = json::array();
    for (const synth::Placement& p : placements) {
      plist.push_back({p.instance_index, p.class_index});
    }
    json s;
    s["placements"] = std::move(plist);
    samples.push_back(std::move(s));
  }
  truth["samples"] = std::move(samples);
  *truth_path = out_dir + "/truth_" + split + ".json";
  dump_file(truth, *truth_path);
}

}  // namespace

SynthPaths write_synth_dataset(const std::string& out_dir,
                               const synth::SynthSpec& spec, int n_train,
                               int n_test, uint64_t seed, int frame_w,
                               int frame_h) {
  if (n_train < 1 || n_test < 0) {
    throw_invalid("need at least one training sample");
  }
  if (frame_w < spec.grid_w || frame_h < spec.grid_h) {
    throw_invalid("nominal frame must be at least the feature grid size");
  }
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "features", ec);
  fs::create_directories(fs::path(out_dir) / "boxes", ec);
  if (ec) throw_io("cannot create output directory: " + out_dir);

  // One seed stream: signatures first, then the two splits, so train and
  // test share class signatures.
  Rng rng(seed);
  const synth::SignatureSet sigs =
      synth::make_signatures(spec.n_classes, spec.feat_dim, rng);
  synth::SynthSpec train_spec = spec;
  train_spec.n_samples = n_train;
  const synth::MimlDataset train =
      synth::gen_miml_dataset(train_spec, sigs, rng);
  synth::SynthSpec test_spec = spec;
  test_spec.n_samples = n_test;
  const synth::MimlDataset test = synth::gen_miml_dataset(test_spec, sigs, rng);

  SynthPaths paths;
  write_split(out_dir, "train", spec, train, frame_w, frame_h,
              &paths.train_manifest, &paths.train_truth);
  write_split(out_dir, "test", spec, test, frame_w, frame_h,
              &paths.test_manifest, &paths.test_truth);
  return paths;
}

TruthFile read_truth(const std::string& path) {
  const json j = parse_file(path);
  TruthFile t;
  try {
    t.n_classes = j.at("n_classes").get<int>();
    t.k = j.at("k").get<int>();
    t.grid_h = j.at("grid_h").get<int>();
    t.grid_w = j.at("grid_w").get<int>();
    t.frame_w = j.at("frame_w").get<int>();
    t.frame_h = j.at("frame_h").get<int>();
    for (const json& s : j.at("samples")) {
      std::vector<synth::Placement> placements;
      for (const json& p : s.at("placements")) {
        placements.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
      }
      t.truth.per_sample.push_back(std::move(placements));
    }
  } catch (const json::exception& e) {
    throw_io(path + ": " + e.what());
  }
  return t;
}

}  // namespace omniact::dataset
