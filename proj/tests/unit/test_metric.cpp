#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mbi/metric.hpp"
#include "test_util.hpp"

using namespace mbi;

namespace {

KeyVector key(std::vector<std::uint8_t> hidden, Location loc, std::vector<std::uint8_t> patch) {
  return {std::move(hidden), loc, std::move(patch)};
}

// Bit-by-bit reference for the significance-weighted metric.
double bitwise_oracle(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v, int bits) {
  double sum = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (int j = 0; j < bits; ++j) sum += std::abs(((u[i] >> j) & 1) - ((v[i] >> j) & 1)) * std::ldexp(1.0, j);
  return sum;
}

}  // namespace

TEST(Manhattan, Examples) {
  const std::vector<std::uint8_t> a{0, 1, 2, 3}, b{3, 1, 0, 3};
  EXPECT_EQ(manhattan(a, a), 0u);
  EXPECT_EQ(manhattan(a, b), 5u);
  EXPECT_EQ(manhattan({}, {}), 0u);
  EXPECT_MBI_ERROR(manhattan(a, std::vector<std::uint8_t>{1}), Errc::invalid_argument);
}

TEST(BitManhattan, WeighsDifferingBitsBySignificance) {
  const std::vector<std::uint8_t> a{1}, b{2};  // 01 vs 10: both bits differ
  EXPECT_EQ(bit_manhattan(a, b, 2), 3u);
  EXPECT_EQ(manhattan(a, b), 1u);
  const std::vector<std::uint8_t> c{0}, d{3};
  EXPECT_EQ(bit_manhattan(c, d, 2), 3u);
  EXPECT_MBI_ERROR(bit_manhattan(d, c, 1), Errc::invalid_argument);
}

TEST(Combine, WeightedAverage) {
  const ComponentDistances d{10.0, 4.0, 1.0};
  EXPECT_DOUBLE_EQ(combine(d, {1, 1, 1}), 5.0);
  EXPECT_DOUBLE_EQ(combine(d, {2, 1, 1}), 25.0 / 4.0);
  EXPECT_DOUBLE_EQ(combine(d, {1, 100, 1}), 411.0 / 102.0);
}

TEST(WeightedDistance, HandComputedBaselineKey) {
  const auto q = key({1, 0, 1}, {3, 4}, {0, 1, 2, 3});
  const auto k = key({0, 0, 1}, {5, 1}, {3, 1, 2, 0});
  const DistanceWeights w{2, 3, 5};
  const KeyBits bits{1, 5, 2};
  // patch 6, hidden 1, location 2 + 3
  const auto d = component_distances(q.view(), k.view(), MetricKind::exact_manhattan, bits);
  EXPECT_DOUBLE_EQ(d.patch, 6.0);
  EXPECT_DOUBLE_EQ(d.hidden, 1.0);
  EXPECT_DOUBLE_EQ(d.location, 5.0);
  EXPECT_DOUBLE_EQ(weighted_distance(q.view(), k.view(), w, MetricKind::exact_manhattan, bits), 40.0 / 10.0);
  // bit metric xors levels: patch (0^3) + (3^0) = 6, loc (3^5) + (4^1) = 6 + 5
  const auto b = component_distances(q.view(), k.view(), MetricKind::bit_significance, bits);
  EXPECT_DOUBLE_EQ(b.patch, 6.0);
  EXPECT_DOUBLE_EQ(b.location, 11.0);
}

TEST(DistanceWeights, Bounds) {
  EXPECT_NO_THROW((DistanceWeights{1, 100, 50}.validate()));
  EXPECT_MBI_ERROR((DistanceWeights{0.5, 1, 1}.validate()), Errc::invalid_argument);
  EXPECT_MBI_ERROR((DistanceWeights{1, 1, 101}.validate()), Errc::invalid_argument);
}

TEST(MetricProperty, IdentitySymmetryTriangleAndOracle) {
  const TableConfig c;
  const auto bits = KeyBits::from(c);
  Rng rng(31);
  std::uniform_real_distribution<double> wd(1.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    const auto x = random_key(c, rng), y = random_key(c, rng), z = random_key(c, rng);
    const DistanceWeights w{wd(rng), wd(rng), wd(rng)};
    for (auto kind : {MetricKind::exact_manhattan, MetricKind::bit_significance}) {
      const auto dxy = weighted_distance(x.view(), y.view(), w, kind, bits);
      EXPECT_EQ(weighted_distance(x.view(), x.view(), w, kind, bits), 0.0);
      EXPECT_GE(dxy, 0.0);
      EXPECT_DOUBLE_EQ(dxy, weighted_distance(y.view(), x.view(), w, kind, bits));
      EXPECT_LE(dxy, weighted_distance(x.view(), z.view(), w, kind, bits) +
                         weighted_distance(z.view(), y.view(), w, kind, bits) + 1e-9);
    }
    const auto d = component_distances(x.view(), y.view(), MetricKind::bit_significance, bits);
    EXPECT_DOUBLE_EQ(d.patch, bitwise_oracle(x.patch, y.patch, 2));
    EXPECT_DOUBLE_EQ(d.hidden, bitwise_oracle(x.hidden, y.hidden, 1));
    const std::vector<std::uint8_t> lx{static_cast<std::uint8_t>(x.loc.x), static_cast<std::uint8_t>(x.loc.y)};
    const std::vector<std::uint8_t> ly{static_cast<std::uint8_t>(y.loc.x), static_cast<std::uint8_t>(y.loc.y)};
    EXPECT_DOUBLE_EQ(d.location, bitwise_oracle(lx, ly, 5));
  }
}

TEST(MetricProperty, HammingEqualsManhattanForBinaryVectors) {
  Rng rng(32);
  std::uniform_int_distribution<int> len(0, 300);
  for (int i = 0; i < 300; ++i) {
    const auto n = static_cast<std::size_t>(len(rng));
    const auto u = test::random_levels(rng, n, 1), v = test::random_levels(rng, n, 1);
    EXPECT_EQ(hamming_words(pack_binary(u), pack_binary(v)), manhattan(u, v));
    EXPECT_EQ(bit_manhattan(u, v, 1), manhattan(u, v));
  }
}

TEST(NoisedDistance, ZeroSigmaIsExactAndDrawsNothing) {
  Rng rng(5), untouched(5);
  const ComponentDistances d{3, 2, 1};
  EXPECT_EQ(noised_distance(d, {1, 2, 3}, 0.0, rng), combine(d, {1, 2, 3}));
  EXPECT_EQ(rng(), untouched());
  EXPECT_MBI_ERROR(noised_distance(d, {}, -0.1, rng), Errc::invalid_argument);
}

TEST(NoisedDistance, MatchesIndependentFactorOracle) {
  const ComponentDistances d{12, 7, 3};
  const DistanceWeights w{2, 5, 9};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    std::normal_distribution<double> f(1.0, 0.1);
    const double fp = f(b), fh = f(b), fl = f(b);
    const double want = (2 * 12 * fp + 5 * 7 * fh + 9 * 3 * fl) / 16.0;
    EXPECT_NEAR(noised_distance(d, w, 0.1, a), want, 1e-12);
  }
}

TEST(NoisedDistance, MomentsFollowPerTermScaling) {
  const ComponentDistances d{12, 7, 3};
  const DistanceWeights w{2, 5, 9};
  const double sigma = 0.1, n = 20000;
  Rng rng(44);
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = noised_distance(d, w, sigma, rng);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  const double want_sd = sigma * std::sqrt(24.0 * 24 + 35.0 * 35 + 27.0 * 27) / 16.0;
  EXPECT_NEAR(mean, combine(d, w), 4 * want_sd / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(var), want_sd, 0.03 * want_sd);
}

TEST(ArgminRow, MatchesLinearScanOracleWithLowestIndexTies) {
  const TableConfig c;
  const auto table = random_table(c, 400, 77);
  const auto bits = KeyBits::from(c);
  Rng qrng(78);
  SearchParams params;
  params.weights = {3, 1, 2};
  for (int i = 0; i < 100; ++i) {
    const auto q = random_key(c, qrng);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t r = 0; r < table.size(); ++r) {
      const double dist = weighted_distance(q.view(), table.key(r), params.weights, params.kind, bits);
      if (dist < best_d) best_d = dist, best = r;
    }
    Rng rng(0);
    const auto m = argmin_row(table, q.view(), params, rng);
    EXPECT_EQ(m.row, best);
    EXPECT_DOUBLE_EQ(m.distance, best_d);
  }
}

TEST(ArgminRow, CandidateSubsetAndEmptyTable) {
  const TableConfig c;
  LookupTable t(c);
  Rng rng(3);
  const auto row = test::random_row(c, rng);
  t.add(row);
  t.add(row);
  t.add(test::random_row(c, rng));
  const std::vector<std::uint32_t> cand{2, 1, 0};
  const auto m = argmin_row(t, cand, row.key.view(), {}, rng);
  EXPECT_EQ(m.row, 1u);  // first of the tied rows in candidate order
  EXPECT_EQ(m.distance, 0.0);
  EXPECT_MBI_ERROR(argmin_row(LookupTable(c), row.key.view(), {}, rng), Errc::invalid_argument);
}
