#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "streamperc/trend_loss.hpp"

using namespace streamperc;

namespace {

GroundTruthBox gt(double x1, double y1, double x2, double y2, int cat = 1) {
  return {{x1, y1, x2, y2}, cat, std::nullopt};
}

}  // namespace

TEST_CASE("matching_iou basics") {
  SUBCASE("identical single-box frames") {
    const auto m = matching_iou({gt(0, 0, 10, 10)}, {gt(0, 0, 10, 10)});
    REQUIRE(m.size() == 1);
    CHECK(m[0] == doctest::Approx(1.0));
  }
  SUBCASE("new object with no overlap") {
    const auto m = matching_iou({gt(0, 0, 2, 2)}, {gt(50, 50, 60, 60)});
    CHECK(m.at(0) == 0.0);
  }
  SUBCASE("max over same-category boxes") {
    const auto m =
        matching_iou({gt(0, 0, 2, 2)}, {gt(1, 0, 3, 2), gt(10, 10, 11, 11)});
    CHECK(m.at(0) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("class-aware: other categories never match") {
    const auto m = matching_iou({gt(0, 0, 2, 2, 1)}, {gt(0, 0, 2, 2, 2)});
    CHECK(m.at(0) == 0.0);
  }
  SUBCASE("empty current frame gives zeros") {
    const auto m = matching_iou({gt(0, 0, 2, 2)}, {});
    CHECK(m.at(0) == 0.0);
  }
  SUBCASE("empty next frame gives empty result") {
    CHECK(matching_iou({}, {gt(0, 0, 2, 2)}).empty());
  }
}

TEST_CASE("trend_factor branches at the defaults") {
  const TrendConfig cfg;
  CHECK(trend_factor(0.5, cfg) == doctest::Approx(2.0));
  CHECK(trend_factor(0.2, cfg) == doctest::Approx(1.0 / 1.4));
  CHECK(trend_factor(1.0, cfg) == doctest::Approx(1.0));
  CHECK(trend_factor(0.3, cfg) == doctest::Approx(1.0 / 0.3));  // boundary: >= tau
}

TEST_CASE("trend_factor monotone non-increasing on [tau, 1]") {
  const TrendConfig cfg;
  double prev = trend_factor(cfg.tau, cfg);
  for (double m = cfg.tau; m <= 1.0; m += 0.01) {
    const double v = trend_factor(std::min(m, 1.0), cfg);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("trend_factor input and config validation") {
  CHECK_THROWS_AS(trend_factor(1.5, TrendConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(trend_factor(0.5, TrendConfig{0.0, 1.4}), std::invalid_argument);
  CHECK_THROWS_AS(trend_factor(0.5, TrendConfig{0.3, 0.0}), std::invalid_argument);
  // nu < 1 is allowed (ablation range), just not the default.
  CHECK(trend_factor(0.1, TrendConfig{0.3, 0.5}) == doctest::Approx(2.0));
}

TEST_CASE("normalize_weights hand cases") {
  SUBCASE("uniform weights are a fixed point") {
    const auto w = normalize_weights({1, 1}, {0.7, 2.3});
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(1.0));
  }
  SUBCASE("two-object hand evaluation") {
    const auto w = normalize_weights({2, 1}, {1, 1});
    CHECK(w[0] == doctest::Approx(4.0 / 3.0));
    CHECK(w[1] == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("all-zero losses pass through") {
    const auto w = normalize_weights({2, 5}, {0, 0});
    CHECK(w == std::vector<double>{2, 5});
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(normalize_weights({1}, {1, 2}), std::invalid_argument);
  }
}

TEST_CASE("loss-sum preservation on randomized instances") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> omega_dist(0.1, 5.0);
  std::uniform_real_distribution<double> loss_dist(0.0, 10.0);
  std::uniform_int_distribution<int> len(1, 20);
  for (int iter = 0; iter < 1000; ++iter) {
    const int n = len(rng);
    std::vector<double> omegas, losses;
    for (int i = 0; i < n; ++i) {
      omegas.push_back(omega_dist(rng));
      losses.push_back(loss_dist(rng));
    }
    double loss_sum = 0.0;
    for (double l : losses) loss_sum += l;
    if (loss_sum == 0.0) continue;
    const auto hats = normalize_weights(omegas, losses);
    double weighted = 0.0;
    for (std::size_t i = 0; i < hats.size(); ++i) weighted += hats[i] * losses[i];
    CHECK(std::abs(weighted - loss_sum) <= 1e-9 * std::max(1.0, loss_sum));
  }
}

TEST_CASE("normalization is scale invariant in omega") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> omegas{u(rng), u(rng), u(rng)};
    std::vector<double> losses{u(rng), u(rng), u(rng)};
    const double c = u(rng);
    std::vector<double> scaled = omegas;
    for (double& o : scaled) o *= c;
    const auto a = normalize_weights(omegas, losses);
    const auto b = normalize_weights(scaled, losses);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("equal matching IoUs above tau give unit weights") {
  const std::vector<GroundTruthBox> next{gt(0, 0, 10, 10), gt(20, 20, 30, 30)};
  const TrendWeights w = compute_trend_weights(next, next, {1.0, 2.0}, TrendConfig{});
  for (double v : w.omega_hat) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("fast movers get strictly larger weights than slow movers") {
  // Object 0 barely moved (mIoU high), object 1 moved a lot (mIoU just above tau).
  const std::vector<GroundTruthBox> cur{gt(0, 0, 10, 10), gt(100, 0, 110, 10)};
  const std::vector<GroundTruthBox> next{gt(1, 0, 11, 10), gt(105, 0, 115, 10)};
  const TrendWeights w = compute_trend_weights(next, cur, {1.0, 1.0}, TrendConfig{});
  CHECK(w.m_iou[0] > w.m_iou[1]);
  CHECK(w.m_iou[1] >= 0.3);
  CHECK(w.omega[1] > w.omega[0]);
  CHECK(w.omega_hat[1] > w.omega_hat[0]);
}

TEST_CASE("total_loss composition") {
  CHECK(total_loss({1, 1}, {{1, 2}, 0.5, 0.25}) == doctest::Approx(3.75));
  CHECK(total_loss({}, {{}, 1.0, 1.0}) == doctest::Approx(2.0));
  const auto w = normalize_weights({2, 1}, {1, 1});
  CHECK(total_loss(w, {{1, 1}, 0.0, 0.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(total_loss({1}, {{1, 2}, 0, 0}), std::invalid_argument);
}
