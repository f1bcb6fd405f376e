#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/geometry.hpp"
#include "core/matrix.hpp"
#include "core/miml.hpp"
#include "core/regionmask.hpp"
#include "core/synth.hpp"

namespace omniact::dataset {

/// Manifest entry; paths are relative to the manifest file's directory.
struct ManifestEntry {
  std::string features;
  std::string boxes;  // empty = null (no region mask for this clip)
  std::vector<uint8_t> labels;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);

struct LoadOptions {
  bool use_mask = true;
  // Frame resolution the bounding boxes are expressed in; required when
  // masks are applied.
  int frame_w = 0;
  int frame_h = 0;
};

struct LoadedDataset {
  std::vector<miml::TrainSample> samples;
  std::vector<std::string> names;  // feature file stems, used for outputs
};

/// Reads every clip of a manifest; with use_mask, boxes are rasterized at
/// frame resolution, max-pool-resized to the feature grid and applied.
LoadedDataset load_samples(const std::string& manifest_path,
                           const LoadOptions& opts);

struct KeypointPair {
  int frame = 0;
  double shoulder_x = 0.0, shoulder_y = 0.0;
  double hip_x = 0.0, hip_y = 0.0;
};

/// Keypoints file: JSON array of {frame, mid_shoulder: [x, y],
/// mid_hip: [x, y]}.
std::vector<KeypointPair> read_keypoints(const std::string& path);
void write_keypoints(const std::string& path,
                     const std::vector<KeypointPair>& pairs);

/// Groups keypoint pairs by frame, estimates a center for each frame with
/// at least two usable spines and averages the per-frame centers. Frames
/// whose spines are degenerate or all parallel are skipped; if no frame
/// is usable on its own, all spines are pooled into a single estimate.
geometry::FisheyeCenter center_from_keypoints(
    const std::vector<KeypointPair>& pairs, size_t* frames_used = nullptr);

struct FrameBoxes {
  int frame = 0;
  std::vector<std::array<int, 4>> boxes;  // x0, y0, x1, y1
};

/// Boxes file: JSON array of {frame, boxes: [[x0,y0,x1,y1], ...]}.
std::vector<FrameBoxes> read_boxes(const std::string& path);
void write_boxes(const std::string& path,
                 const std::vector<FrameBoxes>& frames);

std::vector<regionmask::BoundingBox> flatten_boxes(
    const std::vector<FrameBoxes>& frames);

void write_metrics_csv(const std::string& path,
                       const std::vector<miml::EpochMetrics>& metrics);

/// Prediction CSV: header sample_id,class,score,label, one row per
/// (sample, class).
void write_predictions_csv(const std::string& path, const Matrix& scores,
                           const std::vector<std::vector<uint8_t>>& labels);

struct PredictionRow {
  int sample_id = 0;
  int class_id = 0;
  double score = 0.0;
  uint8_t label = 0;
};

std::vector<PredictionRow> read_predictions_csv(const std::string& path);

/// AP table: class,ap rows (undefined classes print as "undefined"),
/// closed by a mAP row.
void write_ap_csv(const std::string& path,
                  const std::vector<double>& per_class_ap, double map);

struct SynthPaths {
  std::string train_manifest;
  std::string test_manifest;
  std::string train_truth;
  std::string test_truth;
};

/// Generates a train and a test split from one seed (shared class
/// signatures) and writes feature tensors, per-clip boxes, manifests and
/// planted-truth JSON under out_dir.
SynthPaths write_synth_dataset(const std::string& out_dir,
                               const synth::SynthSpec& spec, int n_train,
                               int n_test, uint64_t seed, int frame_w,
                               int frame_h);

/// Truth JSON contents, as needed by localization scoring.
struct TruthFile {
  int n_classes = 0;
  int k = 0;
  int grid_h = 0, grid_w = 0;
  int frame_w = 0, frame_h = 0;
  synth::PlantedTruth truth;
};

TruthFile read_truth(const std::string& path);

}  // namespace omniact::dataset
