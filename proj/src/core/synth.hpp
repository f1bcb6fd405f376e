#pragma once

#include <cstdint>
#include <vector>

#include "core/geometry.hpp"
#include "core/image.hpp"
#include "core/matrix.hpp"
#include "core/miml.hpp"
#include "core/rng.hpp"

namespace omniact::synth {

/// Generator settings for planted-actor feature datasets. Desk-scale
/// defaults: 6 classes over a 64-channel 8x40 grid, five width-8 blocks.
struct SynthSpec {
  int n_samples = 0;
  int n_classes = 6;
  int n_instances_max = 5;  // placement blocks (ceil(grid_w / k))
  int feat_dim = 64;
  int grid_h = 8;
  int grid_w = 40;
  int k = 8;  // block width used for placements
  double noise_sigma = 0.3;
  double signal_gain = 0.45;
  int max_concurrent_actions = 4;
  // Label-irrelevant actor signatures planted in blocks outside the region
  // mask; exercises the mask ablation.
  int n_distractors = 0;
  uint64_t seed = 0;

  void validate() const;
};

/// One planted actor: which block, which class.
struct Placement {
  int instance_index = 0;
  int class_index = 0;
};

struct PlantedTruth {
  std::vector<std::vector<Placement>> per_sample;
};

/// Per-class unit signature vectors (rows), orthonormalized via
/// Gram-Schmidt when feat_dim >= n_classes so the classes are separable by
/// construction.
struct SignatureSet {
  int n_classes = 0;
  int feat_dim = 0;
  Matrix u;  // C x D
};

SignatureSet make_signatures(int n_classes, int feat_dim, Rng& rng);

struct MimlDataset {
  std::vector<miml::TrainSample> samples;  // raw features, no mask applied
  PlantedTruth truth;
};

/// Draws signatures from spec.seed, then the samples.
MimlDataset gen_miml_dataset(const SynthSpec& spec);

/// Same, with shared signatures and an external generator so several splits
/// (train/test) can come from one seed stream.
MimlDataset gen_miml_dataset(const SynthSpec& spec, const SignatureSet& sigs,
                             Rng& rng);

/// White radial rays from the center on black, for geometry tests. Ray
/// angles are degrees in the unwrap convention: a ray at angle psi runs
/// along direction (cos psi, -sin psi) in image coordinates.
Image gen_fisheye(int frame_w, int frame_h, geometry::FisheyeCenter center,
                  const std::vector<double>& ray_angles_deg);

/// Jittered mid-shoulder/mid-hip pairs along random rays through a common
/// center, for center-recovery experiments.
struct SpinePair {
  int frame = 0;
  double shoulder_x = 0.0, shoulder_y = 0.0;
  double hip_x = 0.0, hip_y = 0.0;
};

std::vector<SpinePair> gen_spine_keypoints(geometry::FisheyeCenter center,
                                           int count, double radius_lo,
                                           double radius_hi, double jitter_px,
                                           Rng& rng);

}  // namespace omniact::synth
