#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/evalmetrics.hpp"
#include "core/rng.hpp"
#include "testutil.hpp"

using namespace omniact;
using namespace omniact::evalmetrics;

TEST_CASE("average_precision") {
  SUBCASE("positives ranked on top score 1.0") {
    const std::vector<double> s = {0.9, 0.8, 0.2, 0.1};
    const std::vector<uint8_t> y = {1, 1, 0, 0};
    CHECK(average_precision(s, y) == doctest::Approx(1.0));
  }

  SUBCASE("single positive ranked last scores 1/n") {
    const std::vector<double> s = {0.9, 0.8, 0.7, 0.1};
    const std::vector<uint8_t> y = {0, 0, 0, 1};
    CHECK(average_precision(s, y) == doctest::Approx(0.25));
  }

  SUBCASE("hand-enumerated mixed case gives 5/6") {
    const std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
    const std::vector<uint8_t> y = {1, 0, 1, 0};
    CHECK(average_precision(s, y) == doctest::Approx(5.0 / 6.0));
  }

  SUBCASE("no positives is an error") {
    const std::vector<double> s = {0.9, 0.8};
    const std::vector<uint8_t> y = {0, 0};
    CHECK_THROWS_AS(average_precision(s, y), Error);
  }

  SUBCASE("deterministic under repeated evaluation with ties") {
    const std::vector<double> s = {0.5, 0.5, 0.5, 0.2};
    const std::vector<uint8_t> y = {0, 1, 1, 0};
    const double first = average_precision(s, y);
    for (int i = 0; i < 5; ++i) CHECK(average_precision(s, y) == first);
    // Stable order: input order ranks the tied items.
    CHECK(first == doctest::Approx((1.0 / 2.0 + 2.0 / 3.0) / 2.0));
  }

  SUBCASE("invariant under strictly monotone score transforms") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(12));
      std::vector<double> s(n);
      std::vector<uint8_t> y(n);
      bool any = false;
      for (int i = 0; i < n; ++i) {
        s[i] = rng.uniform(-4, 4);
        y[i] = rng.below(2) ? 1 : 0;
        any = any || y[i];
      }
      if (!any) y[0] = 1;
      const double base = average_precision(s, y);
      std::vector<double> t(n);
      for (int i = 0; i < n; ++i) t[i] = 3.0 * s[i] - 7.0;
      CHECK(average_precision(t, y) == doctest::Approx(base).epsilon(1e-12));
      for (int i = 0; i < n; ++i) t[i] = std::exp(s[i]);
      CHECK(average_precision(t, y) == doctest::Approx(base).epsilon(1e-12));
    }
  }

  SUBCASE("matches the pairwise brute-force oracle on random lists") {
    Rng rng(102);
    for (int trial = 0; trial < 300; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(10));
      std::vector<double> s(n);
      std::vector<uint8_t> y(n);
      bool any = false;
      for (int i = 0; i < n; ++i) {
        // Coarse scores force plenty of ties.
        s[i] = static_cast<double>(rng.below(4));
        y[i] = rng.below(2) ? 1 : 0;
        any = any || y[i];
      }
      if (!any) y[rng.below(n)] = 1;
      REQUIRE(average_precision(s, y) ==
              doctest::Approx(testutil::ap_bruteforce(s, y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("per_class_ap and mean_ap") {
  SUBCASE("single class mean is its AP") {
    CHECK(mean_ap(std::vector<double>{0.7}) == doctest::Approx(0.7));
  }

  SUBCASE("mean of defined classes only") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(mean_ap(std::vector<double>{1.0, 0.5}) == doctest::Approx(0.75));
    CHECK(mean_ap(std::vector<double>{1.0, nan, 0.5}) ==
          doctest::Approx(0.75));
    CHECK_THROWS_AS(mean_ap(std::vector<double>{nan, nan}), Error);
  }

  SUBCASE("19-class mean matches the plain average") {
    Rng rng(103);
    std::vector<double> aps(19);
    double sum = 0;
    for (double& a : aps) {
      a = rng.uniform(0.3, 1.0);
      sum += a;
    }
    CHECK(mean_ap(aps) == doctest::Approx(sum / 19.0));
  }

  SUBCASE("matrix wrapper flags classes without positives") {
    Matrix scores(3, 2);
    scores.at(0, 0) = 0.9;
    scores.at(1, 0) = 0.1;
    scores.at(2, 0) = 0.5;
    const std::vector<std::vector<uint8_t>> labels = {{1, 0}, {0, 0}, {1, 0}};
    const auto aps = per_class_ap(scores, labels);
    CHECK_FALSE(std::isnan(aps[0]));
    CHECK(std::isnan(aps[1]));
  }
}

TEST_CASE("localization_hit_rate") {
  SUBCASE("perfect and inverted cases") {
    const std::vector<LocalizationCase> hit = {{3, 0, 8}, {9, 8, 16}};
    CHECK(localization_hit_rate(hit) == doctest::Approx(1.0));
    const std::vector<LocalizationCase> miss = {{9, 0, 8}, {3, 8, 16}};
    CHECK(localization_hit_rate(miss) == doctest::Approx(0.0));
  }

  SUBCASE("mixed case matches a manual count") {
    const std::vector<LocalizationCase> cases = {
        {0, 0, 8},    // hit (left edge inclusive)
        {8, 0, 8},    // miss (right edge exclusive)
        {12, 8, 16},  // hit
        {7, 8, 16},   // miss
        {15, 8, 16},  // hit
    };
    CHECK(localization_hit_rate(cases) == doctest::Approx(3.0 / 5.0));
  }

  SUBCASE("empty truth rejected") {
    CHECK_THROWS_AS(localization_hit_rate({}), Error);
  }
}
