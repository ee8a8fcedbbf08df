#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mbi/random.hpp"
#include "mbi/table.hpp"

namespace mbi {

enum class MetricKind {
  exact_manhattan,   // sum |u_i - v_i| over integer levels
  bit_significance,  // sum_j |u_ij - v_ij| * 2^j, what the analog array computes
};

/// Per-component weights of the combined distance; each in [1, 100].
struct DistanceWeights {
  double patch = 1.0;
  double hidden = 1.0;
  double location = 1.0;

  double sum() const { return patch + hidden + location; }
  void validate() const;

  bool operator==(const DistanceWeights&) const = default;
};

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Bit widths needed by the bit-significance metric.
struct KeyBits {
  int hidden = 1;
  int loc = 5;
  int patch = 2;

  static KeyBits from(const TableConfig& c) { return {c.bits_hidden, c.bits_loc, c.bits_patch}; }
};

std::uint64_t manhattan(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v);
std::uint64_t bit_manhattan(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v, int bits);

/// Packs 1-bit levels into 64-bit words, element i at bit i % 64 of word i / 64.
std::vector<std::uint64_t> pack_binary(std::span<const std::uint8_t> levels);
std::uint64_t hamming_words(std::span<const std::uint64_t> u, std::span<const std::uint64_t> v);

struct ComponentDistances {
  double patch = 0.0;
  double hidden = 0.0;
  double location = 0.0;
};

/// Location distance is taken on integer pixel coordinates.
ComponentDistances component_distances(const KeyView& q, const KeyView& k, MetricKind kind, const KeyBits& bits);

/// (a*patch + b*hidden + c*location) / (a + b + c).
double combine(const ComponentDistances& d, const DistanceWeights& w);

double weighted_distance(const KeyView& q, const KeyView& k, const DistanceWeights& w, MetricKind kind,
                         const KeyBits& bits);

/// Each component term is scaled by an independent N(1, sigma^2) factor before
/// weighting. sigma == 0 draws nothing and equals combine() exactly.
double noised_distance(const ComponentDistances& d, const DistanceWeights& w, double sigma, Rng& rng);

struct Match {
  std::size_t row = 0;
  double distance = 0.0;
};

/// Metric evaluation context shared by leaf scans and brute force.
struct SearchParams {
  DistanceWeights weights;
  MetricKind kind = MetricKind::exact_manhattan;
  double sigma = 0.0;
};

/// Closest candidate row (ties: lowest position in `candidates`). An empty
/// candidate list means every table row.
Match argmin_row(const LookupTable& table, std::span<const std::uint32_t> candidates, const KeyView& q,
                 const SearchParams& params, Rng& rng);
Match argmin_row(const LookupTable& table, const KeyView& q, const SearchParams& params, Rng& rng);

}  // namespace mbi
