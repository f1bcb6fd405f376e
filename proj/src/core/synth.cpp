#include "core/synth.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace omniact::synth {

void SynthSpec::validate() const {
  if (n_samples < 0) throw_invalid("sample count must be >= 0");
  if (n_classes < 1) throw_invalid("class count must be >= 1");
  if (feat_dim < 1) throw_invalid("feature dim must be >= 1");
  if (grid_h < 1 || grid_w < 1) throw_invalid("grid size must be positive");
  if (k < 1) throw_invalid("block width k must be >= 1");
  if (n_instances_max < 1 || n_instances_max > (grid_w + k - 1) / k) {
    throw_invalid("n_instances_max must be in [1, ceil(grid_w / k)]");
  }
  if (noise_sigma < 0.0) throw_invalid("noise sigma must be >= 0");
  if (max_concurrent_actions < 1 || max_concurrent_actions > n_classes) {
    throw_invalid("max concurrent actions must be in [1, n_classes]");
  }
  if (n_distractors < 0) throw_invalid("distractor count must be >= 0");
}

SignatureSet make_signatures(int n_classes, int feat_dim, Rng& rng) {
  SignatureSet sigs;
  sigs.n_classes = n_classes;
  sigs.feat_dim = feat_dim;
  sigs.u = Matrix(n_classes, feat_dim);
  for (int c = 0; c < n_classes; ++c) {
    for (int d = 0; d < feat_dim; ++d) sigs.u.at(c, d) = rng.normal();
  }
  // Gram-Schmidt when the dimension allows; degenerate draws are retried by
  // renormalizing, which cannot happen for a continuous distribution anyway.
  for (int c = 0; c < n_classes; ++c) {
    double* row = sigs.u.row(c);
    if (feat_dim >= n_classes) {
      for (int prev = 0; prev < c; ++prev) {
        const double* q = sigs.u.row(prev);
        double dot = 0.0;
        for (int d = 0; d < feat_dim; ++d) dot += row[d] * q[d];
        for (int d = 0; d < feat_dim; ++d) row[d] -= dot * q[d];
      }
    }
    double norm = 0.0;
    for (int d = 0; d < feat_dim; ++d) norm += row[d] * row[d];
    norm = std::sqrt(norm);
    if (!(norm > 1e-9)) throw_numeric("degenerate signature draw");
    for (int d = 0; d < feat_dim; ++d) row[d] /= norm;
  }
  return sigs;
}

MimlDataset gen_miml_dataset(const SynthSpec& spec) {
  Rng rng(spec.seed);
  const SignatureSet sigs = make_signatures(spec.n_classes, spec.feat_dim, rng);
  return gen_miml_dataset(spec, sigs, rng);
}

MimlDataset gen_miml_dataset(const SynthSpec& spec, const SignatureSet& sigs,
                             Rng& rng) {
  spec.validate();
  if (sigs.n_classes != spec.n_classes || sigs.feat_dim != spec.feat_dim) {
    throw_invalid("signature set does not match the spec");
  }
  const int blocks = spec.n_instances_max;
  const int cap = std::min(spec.max_concurrent_actions, blocks);

  MimlDataset out;
  out.samples.reserve(spec.n_samples);
  out.truth.per_sample.reserve(spec.n_samples);

  for (int s = 0; s < spec.n_samples; ++s) {
    miml::TrainSample sample;
    sample.features = Tensor({static_cast<uint32_t>(spec.feat_dim),
                              static_cast<uint32_t>(spec.grid_h),
                              static_cast<uint32_t>(spec.grid_w)});
    sample.labels.assign(spec.n_classes, 0);

    const int n_actors =
        1 + static_cast<int>(rng.below(static_cast<uint64_t>(cap)));
    const std::vector<int> actor_blocks =
        rng.sample_distinct(blocks, n_actors);
    // Distinct classes: one block per class per sample keeps localization
    // ground truth unambiguous.
    const std::vector<int> actor_classes =
        rng.sample_distinct(spec.n_classes, n_actors);

    std::vector<Placement> placements;
    placements.reserve(n_actors);
    for (int i = 0; i < n_actors; ++i) {
      const int b = actor_blocks[i];
      const int c = actor_classes[i];
      if (spec.signal_gain != 0.0) {
        const int col_end = std::min(spec.grid_w, (b + 1) * spec.k);
        for (int d = 0; d < spec.feat_dim; ++d) {
          const double add = spec.signal_gain * sigs.u.at(c, d);
          for (int row = 0; row < spec.grid_h; ++row) {
            for (int col = b * spec.k; col < col_end; ++col) {
              sample.features.at3(d, row, col) += add;
            }
          }
        }
        sample.labels[c] = 1;
        placements.push_back({b, c});
      }
    }

    if (spec.n_distractors > 0) {
      std::vector<int> free_blocks;
      for (int b = 0; b < blocks; ++b) {
        if (std::find(actor_blocks.begin(), actor_blocks.end(), b) ==
            actor_blocks.end()) {
          free_blocks.push_back(b);
        }
      }
      std::vector<int> off_label;
      for (int c = 0; c < spec.n_classes; ++c) {
        if (!sample.labels[c]) off_label.push_back(c);
      }
      const int n_noise = std::min<int>(
          spec.n_distractors, static_cast<int>(free_blocks.size()));
      for (int i = 0; i < n_noise && !off_label.empty(); ++i) {
        const int b = free_blocks[i];
        const int c = off_label[rng.below(off_label.size())];
        const int col_end = std::min(spec.grid_w, (b + 1) * spec.k);
        for (int d = 0; d < spec.feat_dim; ++d) {
          const double add = spec.signal_gain * sigs.u.at(c, d);
          for (int row = 0; row < spec.grid_h; ++row) {
            for (int col = b * spec.k; col < col_end; ++col) {
              sample.features.at3(d, row, col) += add;
            }
          }
        }
      }
    }

    if (spec.noise_sigma > 0.0) {
      for (double& v : sample.features.values) {
        v += spec.noise_sigma * rng.normal();
      }
    }

    out.samples.push_back(std::move(sample));
    out.truth.per_sample.push_back(std::move(placements));
  }
  return out;
}

namespace {
constexpr double kDegToRad = 0.017453292519943295;
}

Image gen_fisheye(int frame_w, int frame_h, geometry::FisheyeCenter center,
                  const std::vector<double>& ray_angles_deg) {
  if (center.x < 0.0 || center.x >= frame_w || center.y < 0.0 ||
      center.y >= frame_h) {
    throw_invalid("ray center must lie inside the frame");
  }
  Image img(frame_w, frame_h, 1);
  const double reach =
      geometry::fisheye_radius(center, frame_w, frame_h);
  for (double psi : ray_angles_deg) {
    const double dx = std::cos(psi * kDegToRad);
    const double dy = -std::sin(psi * kDegToRad);
    for (double t = 0.0; t <= reach; t += 0.25) {
      const int x = static_cast<int>(center.x + t * dx);
      const int y = static_cast<int>(center.y + t * dy);
      if (x < 0 || x >= frame_w || y < 0 || y >= frame_h) break;
      img.at(x, y, 0) = 255;
    }
  }
  return img;
}

std::vector<SpinePair> gen_spine_keypoints(geometry::FisheyeCenter center,
                                           int count, double radius_lo,
                                           double radius_hi, double jitter_px,
                                           Rng& rng) {
  if (count < 1) throw_invalid("spine count must be >= 1");
  if (!(radius_lo > 0.0) || !(radius_hi > radius_lo)) {
    throw_invalid("need 0 < radius_lo < radius_hi");
  }
  std::vector<SpinePair> pairs;
  pairs.reserve(count);
  // Shoulder nearer the center, hip further out (people radiate outward
  // from the pole in a top view), with a guaranteed radial gap so keypoint
  // jitter is not amplified by a short lever arm.
  const double span = radius_hi - radius_lo;
  for (int i = 0; i < count; ++i) {
    const double ang = rng.uniform(0.0, 360.0) * kDegToRad;
    const double dx = std::cos(ang);
    const double dy = -std::sin(ang);
    const double r1 = rng.uniform(radius_lo, radius_lo + 0.35 * span);
    const double r2 = rng.uniform(radius_hi - 0.35 * span, radius_hi);
    SpinePair p;
    p.frame = 0;
    p.shoulder_x = center.x + r1 * dx + rng.uniform(-jitter_px, jitter_px);
    p.shoulder_y = center.y + r1 * dy + rng.uniform(-jitter_px, jitter_px);
    p.hip_x = center.x + r2 * dx + rng.uniform(-jitter_px, jitter_px);
    p.hip_y = center.y + r2 * dy + rng.uniform(-jitter_px, jitter_px);
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace omniact::synth
