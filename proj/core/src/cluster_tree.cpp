#include "mbi/cluster_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "mbi/error.hpp"

namespace mbi {

namespace {

double routing_distance(const float* p, const double* c, int n_hidden, int dims, const DistanceWeights& w) {
  double hidden = 0.0, loc = 0.0, patch = 0.0;
  for (int i = 0; i < n_hidden; ++i) hidden += std::abs(p[i] - c[i]);
  for (int i = n_hidden; i < n_hidden + 2; ++i) loc += std::abs(p[i] - c[i]);
  for (int i = n_hidden + 2; i < dims; ++i) patch += std::abs(p[i] - c[i]);
  return (w.patch * patch + w.hidden * hidden + w.location * loc) / w.sum();
}

struct Points {
  std::vector<float> coords;
  int dims = 0;
  int n_hidden = 0;

  const float* at(std::size_t row) const { return coords.data() + row * static_cast<std::size_t>(dims); }
};

Points to_points(const LookupTable& table) {
  Points p;
  p.dims = table.config().key_elements();
  p.n_hidden = table.config().n_hidden;
  p.coords.reserve(table.size() * static_cast<std::size_t>(p.dims));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto c = ClusterTree::coordinates(table.key(i));
    p.coords.insert(p.coords.end(), c.begin(), c.end());
  }
  return p;
}

std::vector<double> mean_of(const Points& pts, std::span<const std::uint32_t> rows) {
  std::vector<double> m(static_cast<std::size_t>(pts.dims), 0.0);
  for (auto r : rows) {
    const float* p = pts.at(r);
    for (int d = 0; d < pts.dims; ++d) m[d] += p[d];
  }
  for (auto& v : m) v /= static_cast<double>(rows.size());
  return m;
}

struct Clustering {
  std::vector<std::vector<double>> centroids;
  std::vector<std::vector<std::uint32_t>> members;
};

class KMeans {
 public:
  KMeans(const Points& pts, const ClusterOptions& opt) : pts_(pts), opt_(opt) {}

  Clustering run(std::span<const std::uint32_t> rows, Rng& rng) const {
    auto centroids = seed_plus_plus(rows, rng);
    std::vector<int> assign = assign_all(rows, centroids);
    for (int it = 0; it < opt_.max_iterations; ++it) {
      update(rows, assign, centroids);
      auto next = assign_all(rows, centroids);
      const bool stable = next == assign;
      assign = std::move(next);
      if (stable) break;
    }
    Clustering out;
    std::vector<std::vector<std::uint32_t>> members(centroids.size());
    for (std::size_t i = 0; i < rows.size(); ++i) members[assign[i]].push_back(rows[i]);
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      if (members[k].empty()) continue;
      out.centroids.push_back(std::move(centroids[k]));
      out.members.push_back(std::move(members[k]));
    }
    return out;
  }

 private:
  double dist(std::uint32_t row, const std::vector<double>& c) const {
    return routing_distance(pts_.at(row), c.data(), pts_.n_hidden, pts_.dims, opt_.weights);
  }

  int nearest(std::uint32_t row, const std::vector<std::vector<double>>& centroids) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      const double d = dist(row, centroids[k]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    return best;
  }

  std::vector<int> assign_all(std::span<const std::uint32_t> rows,
                              const std::vector<std::vector<double>>& centroids) const {
    std::vector<int> a(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) a[i] = nearest(rows[i], centroids);
    return a;
  }

  std::vector<std::vector<double>> seed_plus_plus(std::span<const std::uint32_t> rows, Rng& rng) const {
    std::vector<std::vector<double>> centroids;
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    const auto first = rows[pick(rng)];
    centroids.emplace_back(pts_.at(first), pts_.at(first) + pts_.dims);
    std::vector<double> nearest_d(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) nearest_d[i] = dist(rows[i], centroids[0]);
    while (static_cast<int>(centroids.size()) < opt_.branching) {
      const double total = std::accumulate(nearest_d.begin(), nearest_d.end(), 0.0);
      if (total <= 0.0) break;  // fewer distinct points than branches
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      std::size_t chosen = rows.size() - 1;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        target -= nearest_d[i];
        if (target < 0.0 && nearest_d[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      if (nearest_d[chosen] <= 0.0) {
        chosen = static_cast<std::size_t>(std::max_element(nearest_d.begin(), nearest_d.end()) - nearest_d.begin());
      }
      const auto r = rows[chosen];
      centroids.emplace_back(pts_.at(r), pts_.at(r) + pts_.dims);
      for (std::size_t i = 0; i < rows.size(); ++i) nearest_d[i] = std::min(nearest_d[i], dist(rows[i], centroids.back()));
    }
    return centroids;
  }

  void update(std::span<const std::uint32_t> rows, const std::vector<int>& assign,
              std::vector<std::vector<double>>& centroids) const {
    const std::size_t k = centroids.size();
    std::vector<std::vector<double>> sums(k, std::vector<double>(static_cast<std::size_t>(pts_.dims), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const float* p = pts_.at(rows[i]);
      auto& s = sums[assign[i]];
      for (int d = 0; d < pts_.dims; ++d) s[d] += p[d];
      ++counts[assign[i]];
    }
    std::vector<bool> taken(rows.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
        centroids[c] = std::move(sums[c]);
        continue;
      }
      // re-seed an empty cluster with the point farthest from its own centroid
      double worst = -1.0;
      std::size_t worst_i = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (taken[i] || counts[assign[i]] == 0) continue;
        const double d = dist(rows[i], centroids[assign[i]]);
        if (d > worst) {
          worst = d;
          worst_i = i;
        }
      }
      if (worst > 0.0) {
        taken[worst_i] = true;
        centroids[c].assign(pts_.at(rows[worst_i]), pts_.at(rows[worst_i]) + pts_.dims);
      }
    }
  }

  const Points& pts_;
  const ClusterOptions& opt_;
};

}  // namespace

std::vector<float> ClusterTree::coordinates(const KeyView& key) {
  std::vector<float> c;
  c.reserve(key.hidden.size() + 2 + key.patch.size());
  for (auto v : key.hidden) c.push_back(static_cast<float>(v));
  c.push_back(static_cast<float>(key.loc.x));
  c.push_back(static_cast<float>(key.loc.y));
  for (auto v : key.patch) c.push_back(static_cast<float>(v));
  return c;
}

ClusterTree ClusterTree::build(const LookupTable& table, const ClusterOptions& options) {
  require(!table.empty(), "cannot build a cluster tree over an empty table");
  require(options.branching >= 2, "branching must be at least 2");
  require(options.leaf_capacity >= 1, "leaf capacity must be at least 1");
  require(options.max_iterations >= 1, "need at least one Lloyd iteration");
  options.weights.validate();
  require(table.size() <= std::numeric_limits<std::uint32_t>::max(), "table too large for 32-bit row ids");

  ClusterTree tree;
  tree.options_ = options;
  tree.row_count_ = table.size();
  tree.dims_ = table.config().key_elements();
  tree.n_hidden_ = table.config().n_hidden;

  const Points pts = to_points(table);
  const KMeans kmeans(pts, tree.options_);

  struct Pending {
    std::int64_t parent;
    std::vector<double> centroid;
    std::vector<std::uint32_t> rows;
  };
  std::vector<std::uint32_t> all(table.size());
  std::iota(all.begin(), all.end(), 0u);
  std::vector<Pending> stack;
  stack.push_back({-1, mean_of(pts, all), std::move(all)});

  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    const auto index = static_cast<std::uint32_t>(tree.nodes_.size());
    if (p.parent >= 0) tree.nodes_[static_cast<std::size_t>(p.parent)].children.push_back(index);
    tree.nodes_.push_back(ClusterNode{std::move(p.centroid), {}, {}, false});

    if (static_cast<int>(p.rows.size()) <= options.leaf_capacity) {
      tree.nodes_[index].rows = std::move(p.rows);
      continue;
    }
    auto rng = stream_rng(options.seed, index);
    auto clusters = kmeans.run(p.rows, rng);
    if (clusters.members.size() < 2) {
      tree.nodes_[index].rows = std::move(p.rows);
      tree.nodes_[index].stalled = true;
      continue;
    }
    // reverse push keeps children contiguous in pre-order, in cluster order
    for (std::size_t k = clusters.members.size(); k-- > 0;)
      stack.push_back({index, std::move(clusters.centroids[k]), std::move(clusters.members[k])});
  }
  return tree;
}

TreeMatch ClusterTree::search(const LookupTable& table, const KeyView& q, const SearchParams& params, Rng& rng,
                              int probes) const {
  require(!nodes_.empty(), "search on an unbuilt cluster tree");
  require(probes >= 1, "probes must be at least 1");
  require(table.size() == row_count_, "cluster tree was built over a different table");
  require(static_cast<int>(q.hidden.size()) == n_hidden_ &&
              static_cast<int>(q.hidden.size() + 2 + q.patch.size()) == dims_,
          "query shape does not match the cluster tree");
  const auto coords = coordinates(q);
  auto route = [&](std::uint32_t n) {
    return routing_distance(coords.data(), nodes_[n].centroid.data(), n_hidden_, dims_, params.weights);
  };

  // (distance, node) of branches passed over on the way down; ties pop lower node ids first
  using Branch = std::pair<double, std::uint32_t>;
  std::priority_queue<Branch, std::vector<Branch>, std::greater<>> pending;
  TreeMatch out;
  std::uint32_t node = 0;
  int depth = 1;
  while (true) {
    while (!nodes_[node].is_leaf()) {
      const auto& children = nodes_[node].children;
      std::uint32_t best = children.front();
      double best_d = std::numeric_limits<double>::infinity();
      std::vector<Branch> seen;
      for (auto c : children) {
        const double d = route(c);
        seen.emplace_back(d, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      out.compared += children.size();
      if (probes > 1)
        for (const auto& b : seen)
          if (b.second != best) pending.push(b);
      node = best;
      ++depth;
    }
    const auto m = argmin_row(table, nodes_[node].rows, q, params, rng);
    if (out.leaves == 0) {
      out.depth = depth;
      out.match = m;
    } else if (m.distance < out.match.distance) {
      out.match = m;
    }
    out.compared += nodes_[node].rows.size();
    if (++out.leaves >= probes || pending.empty()) break;
    node = pending.top().second;
    pending.pop();
  }
  return out;
}

std::size_t ClusterTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

bool ClusterTree::has_stalled_leaf() const {
  return std::any_of(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.stalled; });
}

double ClusterTree::average_depth() const {
  require(!nodes_.empty(), "average_depth on an unbuilt cluster tree");
  double weighted = 0.0;
  std::size_t rows = 0;
  std::vector<std::pair<std::size_t, int>> stack{{0, 1}};
  while (!stack.empty()) {
    const auto [n, depth] = stack.back();
    stack.pop_back();
    if (nodes_[n].is_leaf()) {
      weighted += static_cast<double>(nodes_[n].rows.size()) * depth;
      rows += nodes_[n].rows.size();
    } else {
      for (auto c : nodes_[n].children) stack.emplace_back(c, depth + 1);
    }
  }
  return rows ? weighted / static_cast<double>(rows) : 1.0;
}

void ClusterTree::check_partition() const {
  std::vector<int> seen(row_count_, 0);
  for (const auto& n : nodes_) {
    if (!n.is_leaf()) {
      require(n.rows.empty(), "internal node holds rows");
      require(n.children.size() >= 2, "internal node with fewer than two children");
      continue;
    }
    for (auto r : n.rows) {
      require(r < row_count_, "leaf row id out of range");
      ++seen[r];
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    require(seen[i] == 1, "row " + std::to_string(i) + " appears in " + std::to_string(seen[i]) + " leaves");
}

Match search_brute(const LookupTable& table, const KeyView& q, const SearchParams& params, Rng& rng) {
  require(!table.empty(), "brute-force search over an empty table");
  return argmin_row(table, q, params, rng);
}

double GapReport::fraction_at_most(double threshold) const {
  if (gaps.empty()) return 1.0;
  const auto n = std::count_if(gaps.begin(), gaps.end(), [&](double g) { return g <= threshold; });
  return static_cast<double>(n) / static_cast<double>(gaps.size());
}

GapReport gap_histogram(const ClusterTree& tree, const LookupTable& table, std::span<const KeyVector> queries,
                        const SearchParams& params, int bins, int probes) {
  require(bins >= 1, "need at least one histogram bin");
  constexpr double kEps = 1e-12;
  GapReport report;
  report.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b < bins; ++b) {
    report.bin_low.push_back(static_cast<double>(b) / bins);
    report.bin_high.push_back(static_cast<double>(b + 1) / bins);
  }
  Rng rng(0);
  for (const auto& q : queries) {
    const auto view = q.view();
    const double d_tree = tree.search(table, view, params, rng, probes).match.distance;
    const double d_brute = search_brute(table, view, params, rng).distance;
    const double gap = (d_tree - d_brute) / std::max(d_brute, kEps);
    report.gaps.push_back(gap);
    const auto bin = std::clamp(static_cast<int>(std::floor(gap * bins)), 0, bins - 1);
    ++report.counts[static_cast<std::size_t>(bin)];
  }
  return report;
}

}  // namespace mbi
