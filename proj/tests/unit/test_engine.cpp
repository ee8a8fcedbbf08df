#include <gtest/gtest.h>

#include <limits>
#include <map>
#include <sstream>

#include "mbi/cim_sim.hpp"
#include "mbi/distill.hpp"
#include "mbi/engine.hpp"
#include "mbi/text.hpp"
#include "test_util.hpp"

using namespace mbi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset blob_images(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> pos(2, 20), size(3, 8), label(0, 9);
  std::uniform_real_distribution<float> u(0.3f, 1.0f);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    auto img = make_image(28, 28);
    for (int b = 0; b < 3; ++b) {
      const int y0 = pos(rng), x0 = pos(rng), h = size(rng), w = size(rng);
      const float v = u(rng);
      for (int y = y0; y < std::min(28, y0 + h); ++y)
        for (int x = x0; x < std::min(28, x0 + w); ++x) img.at(y, x) = v;
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(label(rng));
  }
  return d;
}

struct World {
  RamModel model;
  Dataset train;
  Dataset test;
  LookupTable table;
  ClusterTree tree;
  MbiConfig cfg;
};

// A random network distilled over 40 images; shared by the engine tests.
const World& world() {
  static const World w = [] {
    World w;
    w.model = random_model(GlimpseConfig{}, 5, 0.25f);
    w.train = blob_images(40, 6);
    w.test = blob_images(30, 7);
    w.table = distill(w.model, w.train.images, table_config_for(w.model.config, 99));
    ClusterOptions o;
    o.leaf_capacity = 16;
    w.tree = ClusterTree::build(w.table, o);
    w.cfg.seed = 99;
    // held-out labels are the network's own answers, so fallback is always right
    for (std::size_t i = 0; i < w.test.size(); ++i)
      w.test.labels[i] = ram_infer(w.model, w.test.images[i], start_location(w.cfg, w.table.config(), i)).prediction;
    return w;
  }();
  return w;
}

}  // namespace

TEST(MbiInfer, FixedPointRowAlwaysPredictsItsClass) {
  const TableConfig c;
  TableRow row;
  row.key.hidden.assign(64, 0);
  row.key.loc = {9, 9};
  row.key.patch.assign(48, 1);
  row.hidden_next = row.key.hidden;
  row.loc_next = row.key.loc;
  row.pred = 7;
  LookupTable t(c);
  t.add(row);
  const auto tree = ClusterTree::build(t, {});
  const MbiConfig cfg;
  const auto images = blob_images(5, 1);
  for (std::size_t i = 0; i < images.size(); ++i) {
    Rng rng(i);
    const auto out = mbi_infer(tree, t, images.images[i], {static_cast<int>(i * 5), 3}, cfg, rng);
    EXPECT_EQ(out.prediction, 7);
    EXPECT_TRUE(out.used_mbi);
    EXPECT_EQ(out.distances.size(), 5u);
    EXPECT_EQ(out.rows, std::vector<std::size_t>(5, 0));
  }
}

TEST(MbiInfer, DistillationImagesReplayTheirOwnRows) {
  // Two images can reach the same quantized key with different full-precision
  // states; the lowest row wins that tie and the trace diverges. Only images
  // whose keys are unique in the table are required to replay.
  const auto& w = world();
  std::map<std::vector<std::uint8_t>, int> key_count;
  const auto key_bytes = [&](std::size_t r) {
    const auto k = w.table.key(r);
    std::vector<std::uint8_t> b(k.hidden.begin(), k.hidden.end());
    b.push_back(static_cast<std::uint8_t>(k.loc.x));
    b.push_back(static_cast<std::uint8_t>(k.loc.y));
    b.insert(b.end(), k.patch.begin(), k.patch.end());
    return b;
  };
  for (std::size_t r = 0; r < w.table.size(); ++r) ++key_count[key_bytes(r)];
  std::size_t checked = 0;
  for (std::size_t i = 0; i < w.train.size(); ++i) {
    bool unique = true;
    for (std::size_t t = 0; t < 5; ++t) unique &= key_count[key_bytes(i * 5 + t)] == 1;
    if (!unique) continue;
    ++checked;
    Rng rng(0);
    const auto out = mbi_infer(w.tree, w.table, w.train.images[i], start_location(w.cfg, w.table.config(), i), w.cfg, rng);
    for (std::size_t t = 0; t < 5; ++t) {
      EXPECT_EQ(out.rows[t], i * 5 + t) << "image " << i;
      EXPECT_EQ(out.distances[t], 0.0);
    }
    EXPECT_EQ(out.prediction, w.table.pred(i * 5 + 4));
    EXPECT_EQ(out.prediction, ram_infer(w.model, w.train.images[i], w.table.key(i * 5).loc).prediction);
  }
  EXPECT_GE(checked, w.train.size() * 3 / 4);
}

TEST(MbiInfer, DeterministicUnderSeedWithNoise) {
  const auto& w = world();
  auto cfg = w.cfg;
  cfg.noise = {0.2, 3};
  const auto run = [&](unsigned threads) { return evaluate(w.test, mbi_runner(w.tree, w.table, cfg), threads); };
  const auto a = run(1), b = run(1), c = run(3);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.accuracy, c.accuracy);
  EXPECT_EQ(a.mean_energy, c.mean_energy);
}

TEST(MbiInfer, RejectsMismatchedInputs) {
  const auto& w = world();
  Rng rng(0);
  auto cfg = w.cfg;
  cfg.n_glimpses = 4;
  EXPECT_MBI_ERROR(mbi_infer(w.tree, w.table, w.test.images[0], {1, 1}, cfg, rng), Errc::invalid_argument);
  EXPECT_MBI_ERROR(mbi_infer(w.tree, w.table, make_image(20, 20), {1, 1}, w.cfg, rng), Errc::invalid_argument);
  const auto small = subsample(w.table, 0.5, 1);
  EXPECT_MBI_ERROR(mbi_infer(w.tree, small, w.test.images[0], {1, 1}, w.cfg, rng), Errc::invalid_argument);
}

TEST(MixedInfer, InfiniteThresholdEqualsPureLookup) {
  const auto& w = world();
  for (std::size_t i = 0; i < w.test.size(); ++i) {
    const auto start = start_location(w.cfg, w.table.config(), i);
    Rng a(i), b(i);
    const auto pure = mbi_infer(w.tree, w.table, w.test.images[i], start, w.cfg, a);
    const auto mixed = mixed_infer(w.tree, w.table, w.model, w.test.images[i], start, w.cfg, b);
    EXPECT_TRUE(mixed.used_mbi);
    EXPECT_EQ(mixed.prediction, pure.prediction);
    EXPECT_EQ(mixed.rows, pure.rows);
  }
}

TEST(MixedInfer, ZeroThresholdFallsBackToTheNetwork) {
  const auto& w = world();
  auto cfg = w.cfg;
  cfg.threshold = 0.0;
  cfg.energy.fallback = 1e-9;
  std::size_t fell_back = 0;
  for (std::size_t i = 0; i < w.test.size(); ++i) {
    const auto start = start_location(cfg, w.table.config(), i);
    Rng rng(i);
    const auto out = mixed_infer(w.tree, w.table, w.model, w.test.images[i], start, cfg, rng);
    if (out.used_mbi) {
      for (auto d : out.distances) EXPECT_EQ(d, 0.0);
      continue;
    }
    ++fell_back;
    EXPECT_EQ(out.prediction, ram_infer(w.model, w.test.images[i], start).prediction);
    EXPECT_GT(out.distances.back(), 0.0);
    EXPECT_NEAR(out.energy, out.distances.size() * glimpse_energy(w.tree, cfg.energy) + 1e-9, 1e-18);
  }
  EXPECT_GT(fell_back, 0u);
  cfg.threshold = -1;
  Rng rng(0);
  EXPECT_MBI_ERROR(mixed_infer(w.tree, w.table, w.model, w.test.images[0], {0, 0}, cfg, rng), Errc::invalid_argument);
}

TEST(Evaluate, AccuracyAndFractionEdgeCases) {
  Dataset one;
  one.images.push_back(make_image(28, 28));
  one.labels.push_back(3);
  auto fixed = [](int pred, bool mbi) {
    return [=](const Image&, std::size_t) {
      InferenceOutcome o;
      o.prediction = pred;
      o.used_mbi = mbi;
      o.energy = 2.0;
      return o;
    };
  };
  auto r = evaluate(one, fixed(3, true));
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.mbi_fraction, 1.0);
  EXPECT_EQ(r.mean_energy, 2.0);
  r = evaluate(one, fixed(4, false));
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_EQ(r.mbi_fraction, 0.0);

  auto bad = one;
  bad.labels.push_back(1);
  EXPECT_MBI_ERROR(evaluate(bad, fixed(0, true)), Errc::invalid_argument);
  EXPECT_MBI_ERROR(evaluate(Dataset{}, fixed(0, true)), Errc::invalid_argument);
}

TEST(Evaluate, RamRunnerMatchesLabelsFromTheNetwork) {
  const auto& w = world();
  const auto r = evaluate(w.test, ram_runner(w.model, w.table, w.cfg), 2);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.mbi_fraction, 0.0);
}

TEST(Evaluate, LookupEnergyIsGlimpsesTimesPerGlimpseCost) {
  const auto& w = world();
  const auto r = evaluate(w.test, mbi_runner(w.tree, w.table, w.cfg));
  const double per = energy_per_inference(1, w.tree.average_depth(), 16, 5, 4.7e-12);
  EXPECT_NEAR(r.mean_energy, 5 * per, 1e-20);
  EXPECT_EQ(r.mbi_fraction, 1.0);
}

TEST(SweepThreshold, EndpointsMonotoneAndConsistentWithMixed) {
  const auto& w = world();
  const std::vector<double> taus{0.0, 1.0, 3.0, 6.0, 10.0, 20.0, kInf};
  const auto curve = sweep_threshold(w.tree, w.table, w.model, w.test, taus, w.cfg, 2);
  ASSERT_EQ(curve.size(), taus.size());
  for (std::size_t i = 1; i < curve.size(); ++i)
    EXPECT_GE(curve[i].report.mbi_fraction, curve[i - 1].report.mbi_fraction);
  EXPECT_EQ(curve.back().report.mbi_fraction, 1.0);
  for (const auto& pt : curve) {
    auto cfg = w.cfg;
    cfg.threshold = pt.threshold;
    const auto direct = evaluate(w.test, mixed_runner(w.tree, w.table, w.model, cfg));
    EXPECT_EQ(pt.report.accuracy, direct.accuracy) << pt.threshold;
    EXPECT_EQ(pt.report.mbi_fraction, direct.mbi_fraction) << pt.threshold;
    EXPECT_NEAR(pt.report.mean_energy, direct.mean_energy, 1e-20) << pt.threshold;
  }
  const std::vector<double> unsorted{2.0, 1.0};
  EXPECT_MBI_ERROR(sweep_threshold(w.tree, w.table, w.model, w.test, unsorted, w.cfg), Errc::invalid_argument);
}

TEST(SweepFraction, RebuildsPerFractionAndFullMatchesEvaluate) {
  const auto& w = world();
  const std::vector<double> fractions{0.25, 0.5, 1.0};
  ClusterOptions o;
  o.leaf_capacity = 16;
  const auto curve = sweep_fraction(w.table, w.test, fractions, 4, o, w.cfg);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0].rows, 50u);
  EXPECT_EQ(curve[1].rows, 100u);
  EXPECT_EQ(curve[2].rows, 200u);
  const auto full = evaluate(w.test, mbi_runner(w.tree, w.table, w.cfg));
  EXPECT_EQ(curve[2].report.accuracy, full.accuracy);
  EXPECT_DOUBLE_EQ(curve[2].avg_depth, w.tree.average_depth());
}

TEST(StartLocation, PoliciesAndDistillationAgreement) {
  const auto& w = world();
  MbiConfig cfg = w.cfg;
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(start_location(cfg, w.table.config(), i), w.table.key(i * 5).loc);
  cfg.initial = InitialPolicy::center;
  EXPECT_EQ(start_location(cfg, w.table.config(), 3), (Location{14, 14}));
}

TEST(ReportCsv, ThresholdCurveColumns) {
  std::vector<ThresholdPoint> curve{{0.0, {10, 0.5, 0.2, 1e-9}}, {kInf, {10, 0.6, 1.0, 2e-9}}};
  std::ostringstream out;
  write_threshold_csv(out, curve, false);
  const auto lines = split(out.str(), '\n');
  ASSERT_GE(lines.size(), 3u);
  EXPECT_EQ(split(lines[0], ',')[0], "threshold");
  EXPECT_EQ(split(lines[2], ',')[0], "inf");
}
