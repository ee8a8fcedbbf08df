#include "mbi/engine.hpp"

#include <algorithm>

#include "mbi/cim_sim.hpp"
#include "mbi/csv.hpp"
#include "mbi/distill.hpp"
#include "mbi/error.hpp"
#include "mbi/parallel.hpp"

namespace mbi {

double InferenceOutcome::max_distance() const {
  return distances.empty() ? 0.0 : *std::max_element(distances.begin(), distances.end());
}

GlimpseConfig glimpse_config_for(const TableConfig& c) {
  GlimpseConfig g;
  g.patch_size = c.patch_size;
  g.glimpse_scale = c.glimpse_scale;
  g.n_patches = c.n_patches;
  g.n_glimpses = c.n_glimpses;
  g.hidden_size = c.n_hidden;
  g.image_height = c.image_height;
  g.image_width = c.image_width;
  g.channels = c.channels;
  g.n_classes = c.n_classes;
  g.patch_quant_bits = c.bits_patch;
  return g;
}

Location start_location(const MbiConfig& cfg, const TableConfig& table, std::size_t image_index) {
  if (cfg.initial == InitialPolicy::center) return {table.image_width / 2, table.image_height / 2};
  return initial_location(glimpse_config_for(table), cfg.seed, image_index);
}

double glimpse_energy(const ClusterTree& tree, const EnergyParams& e) {
  const double levels = e.avg_levels > 0.0 ? e.avg_levels : tree.average_depth();
  const double keys = e.keys_per_leaf > 0.0 ? e.keys_per_leaf : tree.options().leaf_capacity;
  return energy_per_inference(1.0, levels, keys, e.splits, e.e_compare);
}

namespace {

// Runs lookups until done or until a match exceeds `threshold`.
InferenceOutcome lookup_loop(const ClusterTree& tree, const LookupTable& table, const Image& image, Location loc,
                             const MbiConfig& cfg, double threshold, Rng& rng) {
  require(!table.empty() && tree.row_count() == table.size(), "lookup needs a non-empty table and its tree");
  const auto& tc = table.config();
  require(cfg.n_glimpses == tc.n_glimpses,
          "glimpse count " + std::to_string(cfg.n_glimpses) + " does not match the table's " +
              std::to_string(tc.n_glimpses));
  require(image.height == tc.image_height && image.width == tc.image_width && image.channels == tc.channels,
          "image shape does not match the table");
  const auto glimpse = glimpse_config_for(tc);
  const auto params = cfg.search();
  const double per_glimpse = glimpse_energy(tree, cfg.energy);

  InferenceOutcome out;
  KeyVector q;
  q.hidden.assign(static_cast<std::size_t>(tc.n_hidden), 0);
  q.loc = loc;
  for (int t = 0; t < cfg.n_glimpses; ++t) {
    q.patch = quantize_patch(extract_patches(image, q.loc, glimpse), tc.bits_patch).levels;
    const auto m = tree.search(table, q.view(), params, rng).match;
    out.distances.push_back(m.distance);
    out.rows.push_back(m.row);
    out.energy += per_glimpse;
    if (m.distance > threshold) {
      out.used_mbi = false;
      return out;
    }
    const auto next = table.hidden_next(m.row);
    q.hidden.assign(next.begin(), next.end());
    q.loc = table.loc_next(m.row);
    out.prediction = table.pred(m.row);
  }
  return out;
}

}  // namespace

InferenceOutcome mbi_infer(const ClusterTree& tree, const LookupTable& table, const Image& image, Location initial,
                           const MbiConfig& cfg, Rng& rng) {
  return lookup_loop(tree, table, image, initial, cfg, std::numeric_limits<double>::infinity(), rng);
}

InferenceOutcome mixed_infer(const ClusterTree& tree, const LookupTable& table, const RamModel& model,
                             const Image& image, Location initial, const MbiConfig& cfg, Rng& rng) {
  require(!(cfg.threshold < 0.0), "threshold must be non-negative");
  check_compatible(model.config, table.config());
  auto out = lookup_loop(tree, table, image, initial, cfg, cfg.threshold, rng);
  if (!out.used_mbi) {
    out.prediction = ram_infer(model, image, initial).prediction;
    out.energy += cfg.energy.fallback;
  }
  return out;
}

EvalReport evaluate(const Dataset& data, const InferFn& infer, unsigned threads) {
  require(data.images.size() == data.labels.size(), "image/label count mismatch");
  require(!data.images.empty(), "cannot evaluate an empty dataset");
  std::vector<InferenceOutcome> outcomes(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { outcomes[i] = infer(data.images[i], i); });
  EvalReport r;
  r.images = data.size();
  std::size_t correct = 0, mbi = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    correct += outcomes[i].prediction == data.labels[i];
    mbi += outcomes[i].used_mbi;
    r.mean_energy += outcomes[i].energy;
  }
  const auto n = static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.mbi_fraction = static_cast<double>(mbi) / n;
  r.mean_energy /= n;
  return r;
}

InferFn mbi_runner(const ClusterTree& tree, const LookupTable& table, const MbiConfig& cfg) {
  return [&tree, &table, cfg](const Image& image, std::size_t i) {
    auto rng = stream_rng(cfg.noise.seed, i);
    return mbi_infer(tree, table, image, start_location(cfg, table.config(), i), cfg, rng);
  };
}

InferFn mixed_runner(const ClusterTree& tree, const LookupTable& table, const RamModel& model, const MbiConfig& cfg) {
  return [&tree, &table, &model, cfg](const Image& image, std::size_t i) {
    auto rng = stream_rng(cfg.noise.seed, i);
    return mixed_infer(tree, table, model, image, start_location(cfg, table.config(), i), cfg, rng);
  };
}

InferFn ram_runner(const RamModel& model, const LookupTable& table, const MbiConfig& cfg) {
  return [&model, &table, cfg](const Image& image, std::size_t i) {
    InferenceOutcome out;
    out.prediction = ram_infer(model, image, start_location(cfg, table.config(), i)).prediction;
    out.used_mbi = false;
    out.energy = cfg.energy.fallback;
    return out;
  };
}

std::vector<ThresholdPoint> sweep_threshold(const ClusterTree& tree, const LookupTable& table, const RamModel& model,
                                            const Dataset& data, std::span<const double> thresholds,
                                            const MbiConfig& cfg, unsigned threads) {
  require(data.images.size() == data.labels.size(), "image/label count mismatch");
  require(!data.images.empty(), "cannot sweep an empty dataset");
  require(std::is_sorted(thresholds.begin(), thresholds.end()), "thresholds must be sorted");
  check_compatible(model.config, table.config());

  struct PerImage {
    InferenceOutcome lookup;
    int ram_prediction = 0;
  };
  std::vector<PerImage> per(data.size());
  const auto mbi = mbi_runner(tree, table, cfg);
  const auto ram = ram_runner(model, table, cfg);
  parallel_for(data.size(), threads, [&](std::size_t i) {
    per[i].lookup = mbi(data.images[i], i);
    per[i].ram_prediction = ram(data.images[i], i).prediction;
  });

  std::vector<ThresholdPoint> curve;
  const auto n = static_cast<double>(data.size());
  for (double tau : thresholds) {
    require(!(tau < 0.0), "threshold must be non-negative");
    ThresholdPoint pt{tau, {}};
    pt.report.images = data.size();
    std::size_t correct = 0, used = 0;
    for (std::size_t i = 0; i < per.size(); ++i) {
      const auto& o = per[i].lookup;
      // energy up to and including the first glimpse above tau
      std::size_t charged = o.distances.size();
      for (std::size_t t = 0; t < o.distances.size(); ++t)
        if (o.distances[t] > tau) {
          charged = t + 1;
          break;
        }
      const bool ok = o.max_distance() <= tau;
      const double per_glimpse = o.distances.empty() ? 0.0 : o.energy / static_cast<double>(o.distances.size());
      pt.report.mean_energy += per_glimpse * static_cast<double>(charged) + (ok ? 0.0 : cfg.energy.fallback);
      const int pred = ok ? o.prediction : per[i].ram_prediction;
      correct += pred == data.labels[i];
      used += ok;
    }
    pt.report.accuracy = static_cast<double>(correct) / n;
    pt.report.mbi_fraction = static_cast<double>(used) / n;
    pt.report.mean_energy /= n;
    curve.push_back(pt);
  }
  return curve;
}

std::vector<FractionPoint> sweep_fraction(const LookupTable& table, const Dataset& data,
                                          std::span<const double> fractions, std::uint64_t seed,
                                          const ClusterOptions& tree_options, const MbiConfig& cfg,
                                          unsigned threads) {
  require(std::is_sorted(fractions.begin(), fractions.end()), "fractions must be sorted");
  std::vector<FractionPoint> curve;
  for (double f : fractions) {
    const auto part = subsample(table, f, seed);
    auto options = tree_options;
    options.weights = cfg.weights;
    const auto tree = ClusterTree::build(part, options);
    curve.push_back({f, part.size(), tree.average_depth(), evaluate(data, mbi_runner(tree, part, cfg), threads)});
  }
  return curve;
}

void write_eval_csv(std::ostream& out, const char* mode, const EvalReport& r, bool timestamp) {
  CsvWriter csv(out, timestamp);
  csv.header({"mode", "images", "accuracy", "mbi_fraction", "mean_energy_j"});
  csv << mode << r.images << r.accuracy << r.mbi_fraction << r.mean_energy;
  csv.end_row();
}

void write_threshold_csv(std::ostream& out, const std::vector<ThresholdPoint>& curve, bool timestamp) {
  CsvWriter csv(out, timestamp);
  csv.header({"threshold", "images", "accuracy", "mbi_fraction", "mean_energy_j"});
  for (const auto& p : curve) {
    csv << p.threshold << p.report.images << p.report.accuracy << p.report.mbi_fraction << p.report.mean_energy;
    csv.end_row();
  }
}

void write_fraction_csv(std::ostream& out, const std::vector<FractionPoint>& curve, bool timestamp) {
  CsvWriter csv(out, timestamp);
  csv.header({"fraction", "rows", "avg_depth", "images", "accuracy", "mbi_fraction", "mean_energy_j"});
  for (const auto& p : curve) {
    csv << p.fraction << p.rows << p.avg_depth << p.report.images << p.report.accuracy << p.report.mbi_fraction
        << p.report.mean_energy;
    csv.end_row();
  }
}

}  // namespace mbi
