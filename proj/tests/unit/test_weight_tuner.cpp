#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mbi/text.hpp"
#include "mbi/weight_tuner.hpp"
#include "test_util.hpp"

using namespace mbi;

namespace {

double bowl(const DistanceWeights& w) {
  return -((w.patch - 30) * (w.patch - 30) + (w.hidden - 70) * (w.hidden - 70) + (w.location - 12) * (w.location - 12));
}

// worst corner of the bowl over [1, 100]^3
constexpr double kBowlRange = 71.0 * 71 + 69.0 * 69 + 88.0 * 88;

bool in_box(const DistanceWeights& w) {
  for (double x : {w.patch, w.hidden, w.location})
    if (x < kWeightLow || x > kWeightHigh) return false;
  return true;
}

TunerConfig small_config(std::uint64_t seed) {
  TunerConfig c;
  c.init_points = 8;
  c.iterations = 30;
  c.candidate_pool = 500;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(ExpectedImprovement, ZeroSpreadIsPlainImprovement) {
  EXPECT_DOUBLE_EQ(expected_improvement(1.0, 0.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(expected_improvement(2.5, 0.0, 2.0), 0.5);
}

TEST(ExpectedImprovement, AtTheIncumbentEqualsSigmaOverRootTwoPi) {
  EXPECT_NEAR(expected_improvement(0.0, 1.0, 0.0), 1.0 / std::sqrt(2 * M_PI), 1e-12);
  EXPECT_NEAR(expected_improvement(3.0, 1.0, 3.0), 0.3989422804, 1e-9);
  EXPECT_MBI_ERROR(expected_improvement(0, -1, 0), Errc::invalid_argument);
}

TEST(ExpectedImprovement, MatchesNumericalIntegration) {
  // E[max(X - best, 0)] for X ~ N(mean, std) by midpoint rule
  for (auto [mean, sd, best] : {std::tuple{0.3, 0.7, 0.5}, {2.0, 0.1, 1.0}, {-1.0, 2.0, 1.5}}) {
    double sum = 0;
    const double lo = mean - 12 * sd, h = 24 * sd / 200000;
    for (int i = 0; i < 200000; ++i) {
      const double x = lo + (i + 0.5) * h;
      const double pdf = std::exp(-0.5 * ((x - mean) / sd) * ((x - mean) / sd)) / (sd * std::sqrt(2 * M_PI));
      sum += std::max(x - best, 0.0) * pdf * h;
    }
    EXPECT_NEAR(expected_improvement(mean, sd, best), sum, 1e-7);
  }
}

TEST(GaussianProcess, InterpolatesObservationsAndWidensAway) {
  std::vector<std::vector<double>> x{{0.1, 0.1, 0.1}, {0.5, 0.5, 0.5}, {0.9, 0.2, 0.7}, {0.3, 0.8, 0.4}};
  std::vector<double> y{1.0, 3.0, -2.0, 0.5};
  GaussianProcess gp;
  gp.fit(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto p = gp.predict(x[i]);
    EXPECT_NEAR(p.mean, y[i], 0.05 * 5.0);
  }
  const std::vector<double> far{0.0, 1.0, 1.0};
  EXPECT_GT(gp.predict(far).std, gp.predict(x[1]).std);
  EXPECT_MBI_ERROR(gp.fit({}, {}), Errc::invalid_argument);
}

TEST(Tuner, ConstantObjectiveKeepsFirstPoint) {
  const auto r = tune([](const DistanceWeights&) { return 0.25; }, small_config(1));
  EXPECT_EQ(r.best_score, 0.25);
  EXPECT_EQ(r.best, r.history.front().weights);
}

TEST(Tuner, FindsBowlOptimumWithinFivePercentOfRange) {
  const auto r = tune(bowl, small_config(2));
  EXPECT_GE(r.best_score, -0.05 * kBowlRange);
  EXPECT_EQ(bowl(r.best), r.best_score);
}

TEST(TunerProperty, HistoryBoundsBudgetAndBest) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto cfg = small_config(seed);
    const auto r = tune(bowl, cfg);
    ASSERT_EQ(r.history.size(), static_cast<std::size_t>(cfg.init_points + cfg.iterations));
    double best = -INFINITY;
    for (const auto& o : r.history) {
      EXPECT_TRUE(in_box(o.weights));
      EXPECT_EQ(o.score, bowl(o.weights));
      // proposals are on a 0.001 grid
      EXPECT_NEAR(o.weights.patch * 1000, std::round(o.weights.patch * 1000), 1e-6);
      best = std::max(best, o.score);
    }
    EXPECT_EQ(r.best_score, best);
    EXPECT_TRUE(in_box(r.best));
  }
}

TEST(Tuner, DeterministicUnderSeed) {
  const auto a = tune(bowl, small_config(9)), b = tune(bowl, small_config(9));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].weights, b.history[i].weights);
  EXPECT_NE(tune(bowl, small_config(10)).history[0].weights, a.history[0].weights);
}

TEST(Tuner, LatinHypercubeCoversEveryStratum) {
  auto cfg = small_config(4);
  cfg.init_points = 10;
  const auto r = tune(bowl, cfg);
  std::vector<int> strata(10, 0);
  for (int i = 0; i < 10; ++i) {
    const double u = (r.history[i].weights.hidden - kWeightLow) / (kWeightHigh - kWeightLow);
    ++strata[std::min(9, static_cast<int>(u * 10))];
  }
  for (int s : strata) EXPECT_EQ(s, 1);
}

TEST(Tuner, ObjectiveFailureNamesTheWeights) {
  int calls = 0;
  try {
    tune(
        [&](const DistanceWeights&) -> double {
          if (++calls == 3) throw_error(Errc::io, "dataset vanished");
          return 1.0;
        },
        small_config(5));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
    const std::string what = e.what();
    EXPECT_NE(what.find("a="), std::string::npos) << what;
    EXPECT_NE(what.find("c="), std::string::npos) << what;
    EXPECT_NE(what.find("dataset vanished"), std::string::npos) << what;
  }
  EXPECT_MBI_ERROR(tune([](const DistanceWeights&) { return NAN; }, small_config(5)), Errc::invalid_argument);
}

TEST(Tuner, RejectsBadConfig) {
  auto cfg = small_config(1);
  cfg.init_points = 1;
  EXPECT_MBI_ERROR(tune(bowl, cfg), Errc::invalid_argument);
  cfg = small_config(1);
  cfg.iterations = 0;
  EXPECT_MBI_ERROR(tune(bowl, cfg), Errc::invalid_argument);
}

TEST(RandomSearch, SpendsBudgetInsideBox) {
  const auto r = random_search(bowl, 25, 3);
  ASSERT_EQ(r.history.size(), 25u);
  for (const auto& o : r.history) EXPECT_TRUE(in_box(o.weights));
}

TEST(HistoryCsv, ColumnsAndRunningBest) {
  const std::vector<Observation> h{{{1, 2, 3}, 0.5}, {{4, 5, 6}, 0.2}, {{7, 8, 9}, 0.9}};
  std::ostringstream out;
  write_history_csv(out, h, false);
  const auto lines = split(out.str(), '\n');
  ASSERT_GE(lines.size(), 4u);
  EXPECT_EQ(lines[0], "iteration,a,b,c,score,best_so_far");
  const auto row1 = split(lines[2], ',');
  ASSERT_EQ(row1.size(), 6u);
  EXPECT_EQ(row1[0], "1");
  EXPECT_DOUBLE_EQ(parse_double(row1[1]), 4.0);
  EXPECT_DOUBLE_EQ(parse_double(row1[5]), 0.5);
  EXPECT_DOUBLE_EQ(parse_double(split(lines[3], ',')[5]), 0.9);

  std::ostringstream stamped;
  write_history_csv(stamped, h, true);
  EXPECT_EQ(stamped.str().rfind("# generated", 0), 0u);
}
