#include <doctest.h>

#include <fstream>
#include <limits>
#include <set>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "testutil.hpp"

using namespace omniact;
using namespace omniact::dataset;

TEST_CASE("manifest round trip and validation") {
  testutil::TempDir tmp;
  std::vector<ManifestEntry> entries(2);
  entries[0] = {"features/a.otsr", "boxes/a.json", {1, 0, 1}};
  entries[1] = {"features/b.otsr", "", {0, 0, 1}};
  const std::string path = tmp.file("m.json");
  write_manifest(path, entries);
  const auto back = read_manifest(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].features == "features/a.otsr");
  CHECK(back[0].boxes == "boxes/a.json");
  CHECK(back[1].boxes.empty());
  CHECK(back[1].labels == std::vector<uint8_t>{0, 0, 1});

  SUBCASE("bad labels rejected") {
    std::ofstream(tmp.file("bad.json"))
        << R"([{"features":"f.otsr","boxes":null,"labels":[0,2]}])";
    CHECK_THROWS_AS(read_manifest(tmp.file("bad.json")), Error);
  }

  SUBCASE("missing file and malformed json") {
    CHECK_THROWS_AS(read_manifest(tmp.file("none.json")), Error);
    std::ofstream(tmp.file("junk.json")) << "{not json";
    CHECK_THROWS_AS(read_manifest(tmp.file("junk.json")), Error);
  }
}

TEST_CASE("keypoints and boxes files") {
  testutil::TempDir tmp;

  SUBCASE("keypoints round trip") {
    std::vector<KeypointPair> pairs = {{0, 1.5, 2.5, 3.0, 4.0},
                                       {2, -1.0, 0.25, 9.0, 9.5}};
    write_keypoints(tmp.file("kp.json"), pairs);
    const auto back = read_keypoints(tmp.file("kp.json"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].shoulder_x == doctest::Approx(1.5));
    CHECK(back[1].frame == 2);
    CHECK(back[1].hip_y == doctest::Approx(9.5));
  }

  SUBCASE("boxes round trip") {
    std::vector<FrameBoxes> frames = {{0, {{0, 0, 4, 4}, {2, 2, 6, 8}}},
                                      {5, {{1, 1, 3, 3}}}};
    write_boxes(tmp.file("b.json"), frames);
    const auto back = read_boxes(tmp.file("b.json"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].boxes.size() == 2);
    CHECK(back[1].frame == 5);
    const auto flat = flatten_boxes(back);
    REQUIRE(flat.size() == 3);
    CHECK(flat[2].frame_index == 5);
  }
}

TEST_CASE("center_from_keypoints") {
  SUBCASE("averages per-frame estimates") {
    // Frame 0: lines through (10, 10); frame 1: lines through (14, 10).
    std::vector<KeypointPair> pairs = {
        {0, 10, 0, 10, 20},   // vertical through x=10
        {0, 0, 10, 20, 10},   // horizontal through y=10
        {1, 14, 0, 14, 20},
        {1, 0, 10, 28, 10},
    };
    size_t used = 0;
    const auto c = center_from_keypoints(pairs, &used);
    CHECK(used == 2);
    CHECK(c.x == doctest::Approx(12.0).epsilon(1e-6));
    CHECK(c.y == doctest::Approx(10.0).epsilon(1e-6));
  }

  SUBCASE("falls back to pooling when no frame stands alone") {
    std::vector<KeypointPair> pairs = {
        {0, 7, 0, 7, 20},
        {1, 0, 3, 20, 3},
    };
    size_t used = 0;
    const auto c = center_from_keypoints(pairs, &used);
    CHECK(used == 1);
    CHECK(c.x == doctest::Approx(7.0));
    CHECK(c.y == doctest::Approx(3.0));
  }

  SUBCASE("degenerate inputs propagate as errors") {
    CHECK_THROWS_AS(center_from_keypoints({}), Error);
    // All spines parallel.
    std::vector<KeypointPair> parallel = {
        {0, 0, 0, 10, 0},
        {0, 0, 5, 10, 5},
    };
    CHECK_THROWS_AS(center_from_keypoints(parallel), Error);
  }
}

TEST_CASE("metrics and prediction CSV") {
  testutil::TempDir tmp;

  SUBCASE("metrics header and rows") {
    std::vector<miml::EpochMetrics> metrics(2);
    metrics[0] = {0, 0.01, 1.5, 0.25, 0.5};
    metrics[1] = {1, 0.005, 1.25, 0.2, 0.75};
    write_metrics_csv(tmp.file("m.csv"), metrics);
    std::ifstream in(tmp.file("m.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,lr,loss_bce,loss_reg,train_map");
    std::getline(in, line);
    CHECK(line.substr(0, 2) == "0,");
  }

  SUBCASE("prediction CSV round trip preserves scores exactly") {
    Matrix scores(2, 3);
    Rng rng(111);
    for (double& v : scores.v) v = rng.normal();
    const std::vector<std::vector<uint8_t>> labels = {{1, 0, 1}, {0, 1, 0}};
    write_predictions_csv(tmp.file("p.csv"), scores, labels);
    const auto rows = read_predictions_csv(tmp.file("p.csv"));
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
      CHECK(r.score == scores.at(r.sample_id, r.class_id));
      CHECK(r.label == labels[r.sample_id][r.class_id]);
    }
    CHECK_THROWS_AS(read_predictions_csv(tmp.file("none.csv")), Error);
    std::ofstream(tmp.file("badhdr.csv")) << "a,b,c\n";
    CHECK_THROWS_AS(read_predictions_csv(tmp.file("badhdr.csv")), Error);
  }

  SUBCASE("ap table layout") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    write_ap_csv(tmp.file("ap.csv"), {0.5, nan, 1.0}, 0.75);
    std::ifstream in(tmp.file("ap.csv"));
    std::string all((std::istreambuf_iterator<char>(in)), {});
    CHECK(all.find("class,ap") == 0);
    CHECK(all.find("1,undefined") != std::string::npos);
    CHECK(all.find("mAP,0.75") != std::string::npos);
  }
}

TEST_CASE("synth dataset writer and loader") {
  testutil::TempDir tmp;
  synth::SynthSpec spec;
  spec.n_classes = 4;
  spec.feat_dim = 12;
  spec.grid_h = 4;
  spec.grid_w = 20;
  spec.k = 4;
  spec.n_instances_max = 5;
  spec.max_concurrent_actions = 3;
  spec.noise_sigma = 0.1;
  const auto paths =
      write_synth_dataset(tmp.path(), spec, 6, 3, 42, 640, 128);

  SUBCASE("manifests load with and without masks") {
    LoadOptions masked;
    masked.use_mask = true;
    masked.frame_w = 640;
    masked.frame_h = 128;
    const LoadedDataset with = load_samples(paths.train_manifest, masked);
    REQUIRE(with.samples.size() == 6);
    CHECK(with.names[0] == "train_0000");
    CHECK(with.samples[0].features.dims[0] == 12);
    CHECK_FALSE(with.samples[0].mask.empty());

    LoadOptions plain;
    plain.use_mask = false;
    const LoadedDataset without = load_samples(paths.train_manifest, plain);
    CHECK(without.samples[0].mask.empty());

    // The truth file ties placements to mask coverage: masked features are
    // nonzero only on actor blocks (noise elsewhere is zeroed).
    const TruthFile truth = read_truth(paths.train_truth);
    REQUIRE(truth.truth.per_sample.size() == 6);
    CHECK(truth.k == 4);
    CHECK(truth.frame_w == 640);
    for (size_t i = 0; i < with.samples.size(); ++i) {
      std::set<int> actor_blocks;
      for (const auto& p : truth.truth.per_sample[i]) {
        actor_blocks.insert(p.instance_index);
      }
      const auto batch = miml::split_instances(with.samples[i].features, 4);
      for (int j = 0; j < batch.n_instances; ++j) {
        if (actor_blocks.count(j)) continue;
        for (int d = 0; d < 12; ++d) {
          REQUIRE(batch.features.at(j, d) == 0.0);
        }
      }
    }
  }

  SUBCASE("test split shares signatures with the train split") {
    // Same class planted in both splits must produce positively correlated
    // pooled features; verified indirectly: a head fit on train transfers.
    // Here just check both splits exist and have the right sizes.
    LoadOptions plain;
    plain.use_mask = false;
    CHECK(load_samples(paths.train_manifest, plain).samples.size() == 6);
    CHECK(load_samples(paths.test_manifest, plain).samples.size() == 3);
  }

  SUBCASE("two writes are byte-identical") {
    testutil::TempDir tmp2;
    testutil::TempDir tmp3;
    write_synth_dataset(tmp2.path(), spec, 3, 2, 9, 640, 128);
    write_synth_dataset(tmp3.path(), spec, 3, 2, 9, 640, 128);
    for (const char* rel :
         {"train_manifest.json", "features/train_0001.otsr",
          "boxes/test_0000.json", "truth_train.json"}) {
      std::ifstream a(tmp2.path() + "/" + rel, std::ios::binary);
      std::ifstream b(tmp3.path() + "/" + rel, std::ios::binary);
      REQUIRE(a.good());
      REQUIRE(b.good());
      const std::string sa((std::istreambuf_iterator<char>(a)), {});
      const std::string sb((std::istreambuf_iterator<char>(b)), {});
      REQUIRE(sa == sb);
      REQUIRE(!sa.empty());
    }
  }
}
