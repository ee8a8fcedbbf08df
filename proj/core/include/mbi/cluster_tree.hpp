#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mbi/metric.hpp"
#include "mbi/table.hpp"

namespace mbi {

struct ClusterOptions {
  int branching = 4;
  int leaf_capacity = 32;
  int max_iterations = 25;
  std::uint64_t seed = 0;
  // Routing weights. Stored keys are guaranteed to descend to their own leaf
  // when searched with these same weights.
  DistanceWeights weights;
};

/// A node of the hierarchical k-means tree. Centroids live in the
/// concatenated level space [hidden..., loc.x, loc.y, patch...].
struct ClusterNode {
  std::vector<double> centroid;
  std::vector<std::uint32_t> children;
  std::vector<std::uint32_t> rows;  // leaves only, ascending
  bool stalled = false;             // oversized leaf whose points could not be split

  bool is_leaf() const { return children.empty(); }
};

struct TreeMatch {
  Match match;
  int depth = 0;  // nodes on the first root-to-leaf path, root and leaf included
  std::size_t compared = 0;
  int leaves = 0;
};

class ClusterTree {
 public:
  ClusterTree() = default;

  /// Recursive Lloyd k-means (k-means++ seeding, weighted Manhattan assignment,
  /// mean centroids, empty clusters re-seeded with the farthest point), split
  /// until every node holds at most leaf_capacity rows.
  static ClusterTree build(const LookupTable& table, const ClusterOptions& options);

  /// Descent by nearest child centroid (weighted Manhattan on real-valued
  /// centroids, ties to the lowest child), then an exhaustive leaf scan with
  /// the requested metric kind and noise. probes > 1 backtracks to the closest
  /// unexplored branches and scans up to that many leaves; the first leaf is
  /// always the single-path one.
  TreeMatch search(const LookupTable& table, const KeyView& q, const SearchParams& params, Rng& rng,
                   int probes = 1) const;

  const std::vector<ClusterNode>& nodes() const { return nodes_; }
  const ClusterOptions& options() const { return options_; }
  std::size_t row_count() const { return row_count_; }
  int dims() const { return dims_; }
  int n_hidden() const { return n_hidden_; }

  std::size_t leaf_count() const;
  bool has_stalled_leaf() const;

  /// Mean root-to-leaf path length (in nodes) weighted by rows per leaf.
  double average_depth() const;

  /// Throws unless the leaves partition [0, row_count) exactly.
  void check_partition() const;

  std::vector<std::uint8_t> serialize() const;
  static ClusterTree deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ClusterTree load(const std::filesystem::path& path);

  /// Query in centroid coordinates.
  static std::vector<float> coordinates(const KeyView& key);

 private:
  ClusterOptions options_;
  std::vector<ClusterNode> nodes_;
  std::size_t row_count_ = 0;
  int dims_ = 0;
  int n_hidden_ = 0;
};

/// Exhaustive oracle with the same contract as ClusterTree::search.
Match search_brute(const LookupTable& table, const KeyView& q, const SearchParams& params, Rng& rng);

struct GapReport {
  std::vector<double> gaps;  // per query, (d_tree - d_brute) / max(d_brute, eps)
  std::vector<double> bin_low;
  std::vector<double> bin_high;
  std::vector<std::size_t> counts;

  /// Fraction of queries whose gap is <= threshold.
  double fraction_at_most(double threshold) const;
};

/// Histogram of normalized key-matching error between tree and brute-force
/// search over [0, 1]; gaps above 1 land in the last bin.
GapReport gap_histogram(const ClusterTree& tree, const LookupTable& table, std::span<const KeyVector> queries,
                        const SearchParams& params, int bins = 10, int probes = 1);

}  // namespace mbi
