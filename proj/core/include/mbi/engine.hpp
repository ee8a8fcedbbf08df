#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "mbi/cluster_tree.hpp"
#include "mbi/idx.hpp"
#include "mbi/metric.hpp"
#include "mbi/ram_runtime.hpp"
#include "mbi/table.hpp"

namespace mbi {

enum class InitialPolicy {
  seeded_uniform,  // the same per-image draw distillation uses
  center,
};

struct EnergyParams {
  double avg_levels = 0.0;     // 0: measured from the tree
  double keys_per_leaf = 0.0;  // 0: the tree's leaf capacity
  double splits = 5.0;
  double e_compare = 4.7e-12;
  double fallback = 0.0;  // charged per image that falls back to the network
};

struct MbiConfig {
  int n_glimpses = 5;
  DistanceWeights weights;
  MetricKind kind = MetricKind::exact_manhattan;
  NoiseModel noise;
  // Weighted match distance above which an image abandons lookups.
  double threshold = std::numeric_limits<double>::infinity();
  InitialPolicy initial = InitialPolicy::seeded_uniform;
  std::uint64_t seed = 0;  // initial-location seed; match the table's seed to mirror distillation
  EnergyParams energy;

  SearchParams search() const { return {weights, kind, noise.sigma}; }
};

struct InferenceOutcome {
  int prediction = 0;
  std::vector<double> distances;  // one per glimpse answered from the table
  std::vector<std::size_t> rows;  // matched row per glimpse
  bool used_mbi = true;
  double energy = 0.0;

  double max_distance() const;
};

/// Glimpse sensor geometry recorded in a table config.
GlimpseConfig glimpse_config_for(const TableConfig& config);

Location start_location(const MbiConfig& cfg, const TableConfig& table, std::size_t image_index);

/// Lookup energy of one glimpse under the tree's geometry.
double glimpse_energy(const ClusterTree& tree, const EnergyParams& e);

/// Zero hidden state, then n_glimpses lookups feeding each matched row's
/// hidden_next and loc_next into the next query; the prediction is the last
/// matched row's class.
InferenceOutcome mbi_infer(const ClusterTree& tree, const LookupTable& table, const Image& image, Location initial,
                           const MbiConfig& cfg, Rng& rng);

/// mbi_infer, except that the first match farther than cfg.threshold abandons
/// the lookups and the image is classified by the network from `initial`.
InferenceOutcome mixed_infer(const ClusterTree& tree, const LookupTable& table, const RamModel& model,
                             const Image& image, Location initial, const MbiConfig& cfg, Rng& rng);

struct EvalReport {
  std::size_t images = 0;
  double accuracy = 0.0;
  double mbi_fraction = 0.0;
  double mean_energy = 0.0;
};

using InferFn = std::function<InferenceOutcome(const Image&, std::size_t index)>;

/// Runs infer over every image (fanned out over `threads`) and aggregates in
/// image order.
EvalReport evaluate(const Dataset& data, const InferFn& infer, unsigned threads = 1);

/// Per-image glue: start location from cfg, noise stream keyed by image index.
InferFn mbi_runner(const ClusterTree& tree, const LookupTable& table, const MbiConfig& cfg);
InferFn mixed_runner(const ClusterTree& tree, const LookupTable& table, const RamModel& model, const MbiConfig& cfg);
InferFn ram_runner(const RamModel& model, const LookupTable& table, const MbiConfig& cfg);

struct ThresholdPoint {
  double threshold = 0.0;
  EvalReport report;
};

/// One report per threshold. Lookups and the network run once per image; each
/// threshold then compares against the image's largest match distance, so the
/// MBI fraction is exactly non-decreasing in the threshold.
std::vector<ThresholdPoint> sweep_threshold(const ClusterTree& tree, const LookupTable& table, const RamModel& model,
                                            const Dataset& data, std::span<const double> thresholds,
                                            const MbiConfig& cfg, unsigned threads = 1);

struct FractionPoint {
  double fraction = 0.0;
  std::size_t rows = 0;
  double avg_depth = 0.0;
  EvalReport report;
};

/// Subsamples the table at each fraction, rebuilds the tree with the search
/// weights, and evaluates pure lookup inference.
std::vector<FractionPoint> sweep_fraction(const LookupTable& table, const Dataset& data,
                                          std::span<const double> fractions, std::uint64_t seed,
                                          const ClusterOptions& tree_options, const MbiConfig& cfg,
                                          unsigned threads = 1);

void write_eval_csv(std::ostream& out, const char* mode, const EvalReport& r, bool timestamp);
void write_threshold_csv(std::ostream& out, const std::vector<ThresholdPoint>& curve, bool timestamp);
void write_fraction_csv(std::ostream& out, const std::vector<FractionPoint>& curve, bool timestamp);

}  // namespace mbi
