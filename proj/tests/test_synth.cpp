#include <doctest.h>

#include <cmath>
#include <set>

#include "core/error.hpp"
#include "core/miml.hpp"
#include "core/synth.hpp"
#include "testutil.hpp"

using namespace omniact;
using namespace omniact::synth;

TEST_CASE("make_signatures is orthonormal when D >= C") {
  Rng rng(91);
  const SignatureSet sigs = make_signatures(5, 16, rng);
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      double dot = 0;
      for (int d = 0; d < 16; ++d) dot += sigs.u.at(a, d) * sigs.u.at(b, d);
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("gen_miml_dataset") {
  SynthSpec spec;
  spec.n_samples = 24;
  spec.seed = 7;

  SUBCASE("zero gain and zero noise produce empty zero samples") {
    SynthSpec z = spec;
    z.signal_gain = 0.0;
    z.noise_sigma = 0.0;
    const MimlDataset data = gen_miml_dataset(z);
    REQUIRE(data.samples.size() == 24);
    for (const auto& s : data.samples) {
      for (uint8_t l : s.labels) REQUIRE(l == 0);
      for (double v : s.features.values) REQUIRE(v == 0.0);
    }
  }

  SUBCASE("noise-free plants are proportional to the signature") {
    SynthSpec clean = spec;
    clean.noise_sigma = 0.0;
    clean.max_concurrent_actions = 1;
    Rng gen(clean.seed);
    const SignatureSet sigs =
        make_signatures(clean.n_classes, clean.feat_dim, gen);
    const MimlDataset data = gen_miml_dataset(clean, sigs, gen);
    for (size_t i = 0; i < data.samples.size(); ++i) {
      REQUIRE(data.truth.per_sample[i].size() == 1);
      const Placement p = data.truth.per_sample[i][0];
      const auto batch = miml::split_instances(data.samples[i].features,
                                               clean.k);
      // Planted block pools to gain * u_c exactly; empty blocks are zero.
      for (int j = 0; j < batch.n_instances; ++j) {
        for (int d = 0; d < clean.feat_dim; ++d) {
          const double want = j == p.instance_index
                                  ? clean.signal_gain * sigs.u.at(p.class_index, d)
                                  : 0.0;
          REQUIRE(batch.features.at(j, d) ==
                  doctest::Approx(want).epsilon(1e-9));
        }
      }
    }
  }

  SUBCASE("fixed seed regenerates bit-identical data") {
    const MimlDataset a = gen_miml_dataset(spec);
    const MimlDataset b = gen_miml_dataset(spec);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) {
      REQUIRE(a.samples[i].features.values == b.samples[i].features.values);
      REQUIRE(a.samples[i].labels == b.samples[i].labels);
    }
  }

  SUBCASE("labels are the union of planted classes; placements valid") {
    const MimlDataset data = gen_miml_dataset(spec);
    for (size_t i = 0; i < data.samples.size(); ++i) {
      std::set<int> classes, blocks;
      for (const Placement& p : data.truth.per_sample[i]) {
        CHECK(p.instance_index >= 0);
        CHECK(p.instance_index < spec.n_instances_max);
        CHECK(p.class_index >= 0);
        CHECK(p.class_index < spec.n_classes);
        classes.insert(p.class_index);
        blocks.insert(p.instance_index);
      }
      // One class per block, distinct classes per sample.
      CHECK(classes.size() == data.truth.per_sample[i].size());
      CHECK(blocks.size() == data.truth.per_sample[i].size());
      CHECK(static_cast<int>(classes.size()) <= spec.max_concurrent_actions);
      for (int c = 0; c < spec.n_classes; ++c) {
        CHECK(data.samples[i].labels[c] == (classes.count(c) ? 1 : 0));
      }
    }
  }

  SUBCASE("class balance at n_samples >= 4C over several seeds") {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull, 77ull, 123ull}) {
      SynthSpec s = spec;
      s.seed = seed;
      const MimlDataset data = gen_miml_dataset(s);
      std::vector<int> seen(s.n_classes, 0);
      for (const auto& sample : data.samples) {
        for (int c = 0; c < s.n_classes; ++c) seen[c] += sample.labels[c];
      }
      for (int c = 0; c < s.n_classes; ++c) REQUIRE(seen[c] >= 1);
    }
  }

  SUBCASE("planted truth is recoverable by the nearest-signature oracle") {
    SynthSpec clean = spec;
    clean.noise_sigma = 0.0;
    Rng gen(clean.seed);
    const SignatureSet sigs =
        make_signatures(clean.n_classes, clean.feat_dim, gen);
    const MimlDataset data = gen_miml_dataset(clean, sigs, gen);
    int checked = 0;
    for (size_t i = 0; i < data.samples.size(); ++i) {
      const auto batch =
          miml::split_instances(data.samples[i].features, clean.k);
      for (const Placement& p : data.truth.per_sample[i]) {
        int best = -1;
        double best_dot = -1e300;
        for (int c = 0; c < clean.n_classes; ++c) {
          double dot = 0;
          for (int d = 0; d < clean.feat_dim; ++d) {
            dot += batch.features.at(p.instance_index, d) * sigs.u.at(c, d);
          }
          if (dot > best_dot) {
            best_dot = dot;
            best = c;
          }
        }
        REQUIRE(best == p.class_index);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }

  SUBCASE("distractors stay off-label and off the actor blocks") {
    SynthSpec d = spec;
    d.noise_sigma = 0.0;
    d.n_distractors = 2;
    d.max_concurrent_actions = 3;
    Rng gen(d.seed);
    const SignatureSet sigs = make_signatures(d.n_classes, d.feat_dim, gen);
    const MimlDataset data = gen_miml_dataset(d, sigs, gen);
    int with_distractor = 0;
    for (size_t i = 0; i < data.samples.size(); ++i) {
      const auto batch = miml::split_instances(data.samples[i].features, d.k);
      std::set<int> actor_blocks;
      for (const Placement& p : data.truth.per_sample[i]) {
        actor_blocks.insert(p.instance_index);
      }
      for (int j = 0; j < batch.n_instances; ++j) {
        if (actor_blocks.count(j)) continue;
        double norm = 0;
        for (int dd = 0; dd < d.feat_dim; ++dd) {
          norm += std::abs(batch.features.at(j, dd));
        }
        if (norm < 1e-12) continue;  // empty block
        // Occupied non-actor block: must match an off-label signature.
        int best = -1;
        double best_dot = -1e300;
        for (int c = 0; c < d.n_classes; ++c) {
          double dot = 0;
          for (int dd = 0; dd < d.feat_dim; ++dd) {
            dot += batch.features.at(j, dd) * sigs.u.at(c, dd);
          }
          if (dot > best_dot) {
            best_dot = dot;
            best = c;
          }
        }
        REQUIRE(data.samples[i].labels[best] == 0);
        ++with_distractor;
      }
    }
    CHECK(with_distractor > 0);
  }

  SUBCASE("invalid specs rejected") {
    SynthSpec bad = spec;
    bad.max_concurrent_actions = 99;
    CHECK_THROWS_AS(gen_miml_dataset(bad), Error);
    bad = spec;
    bad.noise_sigma = -1;
    CHECK_THROWS_AS(gen_miml_dataset(bad), Error);
    bad = spec;
    bad.n_instances_max = 50;  // > ceil(grid_w / k)
    CHECK_THROWS_AS(gen_miml_dataset(bad), Error);
  }
}

TEST_CASE("gen_fisheye") {
  SUBCASE("no rays is all black") {
    const Image img = gen_fisheye(32, 32, {16, 16}, {});
    for (uint8_t p : img.pixels) REQUIRE(p == 0);
  }

  SUBCASE("four axis-aligned rays form a plus sign") {
    const Image img = gen_fisheye(33, 33, {16.5, 16.5}, {0, 90, 180, 270});
    CHECK(img.at(30, 16, 0) == 255);  // right
    CHECK(img.at(2, 16, 0) == 255);   // left
    CHECK(img.at(16, 2, 0) == 255);   // up (y points down, psi=90 goes up)
    CHECK(img.at(16, 30, 0) == 255);
    CHECK(img.at(4, 4, 0) == 0);      // off-ray stays black
  }

  SUBCASE("ray pixels are collinear with the center") {
    const geometry::FisheyeCenter c{40.5, 61.25};
    const Image img = gen_fisheye(128, 128, c, {33.0});
    const double dx = std::cos(33.0 * M_PI / 180.0);
    const double dy = -std::sin(33.0 * M_PI / 180.0);
    int lit = 0;
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) {
        if (!img.at(x, y, 0)) continue;
        ++lit;
        // Perpendicular distance of the pixel center to the ray line.
        const double px = x + 0.5 - c.x;
        const double py = y + 0.5 - c.y;
        CHECK(std::abs(px * dy - py * dx) <= 0.8);
      }
    }
    CHECK(lit > 20);
  }

  SUBCASE("center must be inside the frame") {
    CHECK_THROWS_AS(gen_fisheye(32, 32, {40, 10}, {0}), Error);
  }
}

TEST_CASE("gen_spine_keypoints") {
  Rng rng(95);
  const geometry::FisheyeCenter c{128, 130};
  const auto pairs = gen_spine_keypoints(c, 10, 25, 100, 0.0, rng);
  REQUIRE(pairs.size() == 10);
  for (const auto& p : pairs) {
    // Without jitter both points sit exactly on a ray through the center.
    const double cross = (p.shoulder_x - c.x) * (p.hip_y - c.y) -
                         (p.shoulder_y - c.y) * (p.hip_x - c.x);
    CHECK(std::abs(cross) < 1e-9);
    const double r1 = std::hypot(p.shoulder_x - c.x, p.shoulder_y - c.y);
    const double r2 = std::hypot(p.hip_x - c.x, p.hip_y - c.y);
    CHECK(r1 >= 25.0);
    CHECK(r2 <= 100.0);
    CHECK(r1 < r2);
  }
}
