#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/localize.hpp"
#include "core/regionmask.hpp"
#include "core/rng.hpp"
#include "core/synth.hpp"
#include "testutil.hpp"

using namespace omniact;
using namespace omniact::miml;
using namespace omniact::localize;

namespace {

// Finite differences of p^a over individual feature cells.
Tensor fd_feature_gradients(const TrainSample& sample, const MimlHead& head,
                            const Hyperparams& hp, int class_index,
                            double step = 1e-5) {
  Tensor grads = sample.features;
  TrainSample probe = sample;
  for (size_t i = 0; i < probe.features.values.size(); ++i) {
    const double saved = probe.features.values[i];
    probe.features.values[i] = saved + step;
    const double hi =
        predict(probe, head, hp).bag_probs[class_index];
    probe.features.values[i] = saved - step;
    const double lo =
        predict(probe, head, hp).bag_probs[class_index];
    probe.features.values[i] = saved;
    grads.values[i] = (hi - lo) / (2.0 * step);
  }
  // The analytic chain treats masked-out cells as dead inputs.
  if (!sample.mask.empty()) {
    const size_t plane = static_cast<size_t>(sample.features.dims[1]) *
                         sample.features.dims[2];
    for (uint32_t c = 0; c < sample.features.dims[0]; ++c) {
      for (size_t i = 0; i < plane; ++i) {
        if (sample.mask.values[i] == 0.0) grads.values[c * plane + i] = 0.0;
      }
    }
  }
  return grads;
}

TrainSample sample_with_mask(int c, int d, int h, int w, Rng& rng) {
  TrainSample s;
  s.features = testutil::random_feature_map(d, h, w, rng);
  s.labels.assign(c, 0);
  regionmask::BinaryMask m(w, h);
  for (auto& b : m.bits) b = rng.below(4) != 0 ? 1 : 0;
  m.bits[0] = 1;
  s.features = regionmask::apply_mask(s.features, m);
  s.mask = regionmask::mask_to_tensor(m);
  return s;
}

}  // namespace

TEST_CASE("feature_gradients") {
  Rng rng(81);
  Hyperparams hp;
  hp.k = 3;

  SUBCASE("all-zero mask kills the gradient") {
    TrainSample s;
    s.features = testutil::random_feature_map(4, 3, 6, rng);
    s.labels.assign(2, 0);
    regionmask::BinaryMask m(6, 3);  // all zeros
    s.features = regionmask::apply_mask(s.features, m);
    s.mask = regionmask::mask_to_tensor(m);
    MimlHead head = testutil::random_head(2, 4, false, rng);
    const Tensor g = feature_gradients(s, head, hp, 0);
    for (double v : g.values) REQUIRE(v == 0.0);
  }

  SUBCASE("single instance spreads the gradient uniformly") {
    TrainSample s;
    s.features = testutil::random_feature_map(3, 2, 4, rng);
    s.labels.assign(2, 0);
    MimlHead head = testutil::random_head(2, 3, false, rng);
    Hyperparams one;
    one.k = 4;  // N = 1
    const Tensor g = feature_gradients(s, head, one, 1);
    for (int c = 0; c < 3; ++c) {
      const double first = g.at3(c, 0, 0);
      for (int row = 0; row < 2; ++row) {
        for (int col = 0; col < 4; ++col) {
          REQUIRE(g.at3(c, row, col) == doctest::Approx(first).epsilon(1e-12));
        }
      }
    }
  }

  SUBCASE("matches finite differences over cells") {
    for (Aggregator agg : {Aggregator::avg, Aggregator::max, Aggregator::lse,
                           Aggregator::attention}) {
      for (bool masked : {false, true}) {
        TrainSample s = masked ? sample_with_mask(3, 5, 2, 7, rng)
                               : TrainSample{};
        if (!masked) {
          s.features = testutil::random_feature_map(5, 2, 7, rng);
          s.labels.assign(3, 0);
        }
        MimlHead head =
            testutil::random_head(3, 5, agg == Aggregator::attention, rng);
        Hyperparams cfg;
        cfg.k = 3;
        cfg.aggregator = agg;
        const Tensor analytic = feature_gradients(s, head, cfg, 1);
        const Tensor fd = fd_feature_gradients(s, head, cfg, 1);
        double diff = 0, norm = 0;
        for (size_t i = 0; i < analytic.values.size(); ++i) {
          diff += std::pow(analytic.values[i] - fd.values[i], 2);
          norm += std::pow(analytic.values[i], 2);
        }
        REQUIRE(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12) < 1e-5);
      }
    }
  }

  SUBCASE("class index validated") {
    TrainSample s;
    s.features = testutil::random_feature_map(2, 2, 4, rng);
    s.labels.assign(2, 0);
    MimlHead head = testutil::random_head(2, 2, false, rng);
    CHECK_THROWS_AS(feature_gradients(s, head, hp, 2), Error);
    CHECK_THROWS_AS(feature_gradients(s, head, hp, -1), Error);
  }
}

TEST_CASE("channel_weights") {
  SUBCASE("constant gradient per channel") {
    Tensor g({3, 2, 5});
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 5; ++j) g.at3(c, i, j) = 0.5 * (c + 1);
      }
    }
    const auto w = channel_weights(g);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(1.0));
    CHECK(w[2] == doctest::Approx(1.5));
  }

  SUBCASE("zero gradients give zero weights") {
    Tensor g({2, 3, 3});
    const auto w = channel_weights(g);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 0.0);
  }

  SUBCASE("random matches the direct mean") {
    Rng rng(82);
    Tensor g = testutil::random_feature_map(4, 3, 6, rng);
    const auto w = channel_weights(g);
    for (int c = 0; c < 4; ++c) {
      double sum = 0;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 6; ++j) sum += g.at3(c, i, j);
      }
      CHECK(w[c] == doctest::Approx(sum / 18.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradcam") {
  Rng rng(83);

  SUBCASE("single channel with unit weight is ReLU") {
    Tensor f = testutil::random_feature_map(1, 3, 4, rng);
    const Tensor h = gradcam(f, {1.0});
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        CHECK(h.at2(i, j) == doctest::Approx(std::max(f.at3(0, i, j), 0.0)));
      }
    }
  }

  SUBCASE("everywhere-negative combination is all zero") {
    Tensor f({1, 2, 2});
    f.values = {1, 2, 3, 4};
    const Tensor h = gradcam(f, {-1.0});
    for (double v : h.values) CHECK(v == 0.0);
  }

  SUBCASE("mixed-sign weights match direct evaluation") {
    Tensor f = testutil::random_feature_map(2, 3, 5, rng);
    const std::vector<double> w = {0.7, -1.3};
    const Tensor h = gradcam(f, w);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double want =
            std::max(0.7 * f.at3(0, i, j) - 1.3 * f.at3(1, i, j), 0.0);
        CHECK(h.at2(i, j) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  SUBCASE("zero-gradient classes yield identically zero heatmaps") {
    Tensor f = testutil::random_feature_map(3, 2, 4, rng);
    Tensor zero_grads({3, 2, 4});
    const Tensor h = gradcam(f, channel_weights(zero_grads));
    for (double v : h.values) REQUIRE(v == 0.0);
  }

  SUBCASE("positive scaling of the weights scales the heatmap") {
    Tensor f = testutil::random_feature_map(3, 2, 4, rng);
    std::vector<double> w = {0.3, -0.8, 1.1};
    const Tensor h1 = gradcam(f, w);
    for (double& x : w) x *= 2.5;
    const Tensor h2 = gradcam(f, w);
    for (size_t i = 0; i < h1.values.size(); ++i) {
      CHECK(h2.values[i] == doctest::Approx(2.5 * h1.values[i]).epsilon(1e-12));
    }
  }

  SUBCASE("channel count mismatch") {
    Tensor f = testutil::random_feature_map(2, 2, 2, rng);
    CHECK_THROWS_AS(gradcam(f, {1.0}), Error);
  }
}

TEST_CASE("upsample_heatmap") {
  SUBCASE("constants stay constant") {
    Tensor h({2, 3});
    for (double& v : h.values) v = 4.25;
    const Tensor up = upsample_heatmap(h, 11, 7);
    CHECK(up.dims[0] == 7);
    CHECK(up.dims[1] == 11);
    for (double v : up.values) REQUIRE(v == doctest::Approx(4.25));
  }

  SUBCASE("1x1 fills the target") {
    Tensor h({1, 1});
    h.values = {2.0};
    const Tensor up = upsample_heatmap(h, 4, 3);
    for (double v : up.values) REQUIRE(v == doctest::Approx(2.0));
  }

  SUBCASE("2x2 corners: the 3x3 center is the corner mean") {
    Tensor h({2, 2});
    h.values = {1.0, 3.0, 5.0, 9.0};
    const Tensor up = upsample_heatmap(h, 3, 3);
    // Center pixel samples source (0.5, 0.5): the mean of all corners.
    CHECK(up.at2(1, 1) == doctest::Approx(4.5));
    // Target corners clamp to the source corners under align-corners
    // false with a 2/3 scale: source coord (0.5)*2/3 - 0.5 = -1/6 -> clamped
    // mix of the corner alone.
    CHECK(up.at2(0, 0) == doctest::Approx(1.0));
    CHECK(up.at2(2, 2) == doctest::Approx(9.0));
  }

  SUBCASE("non-negativity is preserved") {
    Rng rng(84);
    Tensor h({4, 6});
    for (double& v : h.values) v = std::max(rng.normal(), 0.0);
    const Tensor up = upsample_heatmap(h, 13, 9);
    for (double v : up.values) REQUIRE(v >= 0.0);
  }

  SUBCASE("shrinking is rejected") {
    Tensor h({4, 4});
    CHECK_THROWS_AS(upsample_heatmap(h, 3, 4), Error);
  }
}

TEST_CASE("heatmap rendering") {
  SUBCASE("renders normalized by its own max; zero map is black") {
    Tensor h({1, 3});
    h.values = {0.0, 1.0, 2.0};
    const Image img = render_heatmap(h);
    CHECK(img.pixels[0] == 0);
    CHECK(img.pixels[1] == 128);
    CHECK(img.pixels[2] == 255);
    Tensor zero({2, 2});
    const Image black = render_heatmap(zero);
    for (uint8_t p : black.pixels) CHECK(p == 0);
  }

  SUBCASE("overlay blends at fixed 0.5") {
    Tensor h({1, 2});
    h.values = {0.0, 2.0};
    Image pano(2, 1, 3);
    for (auto& p : pano.pixels) p = 100;
    const Image out = overlay_heatmap(h, pano);
    CHECK(out.at(1, 0, 0) == 50 + 128);  // full heat: red ramp
    CHECK(out.at(0, 0, 0) == 50);
    CHECK(out.at(0, 0, 2) == 50 + 128);  // no heat: blue ramp
    Image small(1, 1, 3);
    CHECK_THROWS_AS(overlay_heatmap(h, small), Error);
  }
}

TEST_CASE("argmax_column and planted-signal localization") {
  SUBCASE("argmax column, ties break low") {
    Tensor h({2, 4});
    h.values = {0, 1, 0, 0,
                0, 0, 1, 0};
    CHECK(argmax_column(h) == 1);
  }

  SUBCASE("constructed head localizes planted actors") {
    // Signature-aligned head: gradcam of a planted class must peak inside
    // the planted block span.
    synth::SynthSpec spec;
    spec.n_samples = 20;
    spec.noise_sigma = 0.1;
    spec.signal_gain = 1.0;
    spec.seed = 20250810;
    Rng gen(spec.seed);
    const synth::SignatureSet sigs =
        synth::make_signatures(spec.n_classes, spec.feat_dim, gen);
    const synth::MimlDataset data = synth::gen_miml_dataset(spec, sigs, gen);

    MimlHead head;
    head.n_classes = spec.n_classes;
    head.feat_dim = spec.feat_dim;
    head.weights = Matrix(spec.n_classes, spec.feat_dim);
    for (int a = 0; a < spec.n_classes; ++a) {
      for (int d = 0; d < spec.feat_dim; ++d) {
        head.weights.at(a, d) = 2.0 * sigs.u.at(a, d);
      }
    }
    head.bias.assign(spec.n_classes, -0.5);

    Hyperparams hp;
    int hits = 0, total = 0;
    for (size_t i = 0; i < data.samples.size(); ++i) {
      for (const synth::Placement& p : data.truth.per_sample[i]) {
        const Tensor grads =
            feature_gradients(data.samples[i], head, hp, p.class_index);
        const Tensor heat =
            gradcam(data.samples[i].features, channel_weights(grads));
        const int col = argmax_column(heat);
        ++total;
        if (col >= p.instance_index * hp.k &&
            col < std::min(spec.grid_w, (p.instance_index + 1) * hp.k)) {
          ++hits;
        }
      }
    }
    REQUIRE(total >= 20);
    CHECK(static_cast<double>(hits) / total >= 0.9);
  }
}
