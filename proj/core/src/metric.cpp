#include "mbi/metric.hpp"

#include <bit>
#include <cstdlib>
#include <limits>

#include "mbi/error.hpp"

namespace mbi {

void DistanceWeights::validate() const {
  for (double x : {patch, hidden, location})
    require(x >= 1.0 && x <= 100.0, "distance weights must lie in [1, 100]");
}

std::uint64_t manhattan(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v) {
  require(u.size() == v.size(), "manhattan: length mismatch");
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += static_cast<std::uint64_t>(std::abs(int{u[i]} - int{v[i]}));
  return sum;
}

std::uint64_t bit_manhattan(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v, int bits) {
  require(u.size() == v.size(), "bit_manhattan: length mismatch");
  require(bits >= 1 && bits <= 8, "bit_manhattan: bits must be in [1,8]");
  const unsigned limit = 1u << bits;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    require(u[i] < limit && v[i] < limit, "bit_manhattan: level exceeds bit width");
    // bit j of the xor contributes 2^j
    sum += static_cast<unsigned>(u[i] ^ v[i]);
  }
  return sum;
}

std::vector<std::uint64_t> pack_binary(std::span<const std::uint8_t> levels) {
  std::vector<std::uint64_t> words((levels.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    require(levels[i] <= 1, "pack_binary: level is not binary");
    if (levels[i]) words[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return words;
}

std::uint64_t hamming_words(std::span<const std::uint64_t> u, std::span<const std::uint64_t> v) {
  require(u.size() == v.size(), "hamming_words: length mismatch");
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += static_cast<std::uint64_t>(std::popcount(u[i] ^ v[i]));
  return sum;
}

namespace {

std::uint64_t location_distance(Location a, Location b, MetricKind kind, int bits) {
  if (kind == MetricKind::exact_manhattan)
    return static_cast<std::uint64_t>(std::abs(a.x - b.x) + std::abs(a.y - b.y));
  require(a.x >= 0 && a.y >= 0 && b.x >= 0 && b.y >= 0 && a.x < (1 << bits) && a.y < (1 << bits) &&
              b.x < (1 << bits) && b.y < (1 << bits),
          "location exceeds bit width");
  return static_cast<std::uint64_t>((a.x ^ b.x) + (a.y ^ b.y));
}

}  // namespace

ComponentDistances component_distances(const KeyView& q, const KeyView& k, MetricKind kind, const KeyBits& bits) {
  require(q.hidden.size() == k.hidden.size() && q.patch.size() == k.patch.size(), "key component shape mismatch");
  ComponentDistances d;
  if (kind == MetricKind::exact_manhattan) {
    d.hidden = static_cast<double>(manhattan(q.hidden, k.hidden));
    d.patch = static_cast<double>(manhattan(q.patch, k.patch));
  } else {
    d.hidden = static_cast<double>(bit_manhattan(q.hidden, k.hidden, bits.hidden));
    d.patch = static_cast<double>(bit_manhattan(q.patch, k.patch, bits.patch));
  }
  d.location = static_cast<double>(location_distance(q.loc, k.loc, kind, bits.loc));
  return d;
}

double combine(const ComponentDistances& d, const DistanceWeights& w) {
  return (w.patch * d.patch + w.hidden * d.hidden + w.location * d.location) / w.sum();
}

double weighted_distance(const KeyView& q, const KeyView& k, const DistanceWeights& w, MetricKind kind,
                         const KeyBits& bits) {
  return combine(component_distances(q, k, kind, bits), w);
}

double noised_distance(const ComponentDistances& d, const DistanceWeights& w, double sigma, Rng& rng) {
  require(sigma >= 0.0, "noise sigma must be non-negative");
  if (sigma == 0.0) return combine(d, w);
  std::normal_distribution<double> factor(1.0, sigma);
  ComponentDistances noisy;
  noisy.patch = d.patch * factor(rng);
  noisy.hidden = d.hidden * factor(rng);
  noisy.location = d.location * factor(rng);
  return combine(noisy, w);
}

Match argmin_row(const LookupTable& table, std::span<const std::uint32_t> candidates, const KeyView& q,
                 const SearchParams& params, Rng& rng) {
  const auto bits = KeyBits::from(table.config());
  const std::size_t n = candidates.empty() ? table.size() : candidates.size();
  require(n > 0, "argmin over an empty candidate set");
  Match best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = candidates.empty() ? i : candidates[i];
    const auto d = component_distances(q, table.key(row), params.kind, bits);
    const double dist = noised_distance(d, params.weights, params.sigma, rng);
    if (dist < best.distance) best = {row, dist};
  }
  return best;
}

Match argmin_row(const LookupTable& table, const KeyView& q, const SearchParams& params, Rng& rng) {
  return argmin_row(table, {}, q, params, rng);
}

}  // namespace mbi
