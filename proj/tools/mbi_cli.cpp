#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbi/cim_sim.hpp"
#include "mbi/cluster_tree.hpp"
#include "mbi/csv.hpp"
#include "mbi/distill.hpp"
#include "mbi/engine.hpp"
#include "mbi/error.hpp"
#include "mbi/idx.hpp"
#include "mbi/ram_runtime.hpp"
#include "mbi/table.hpp"
#include "mbi/weight_tuner.hpp"

using namespace mbi;

namespace {

struct Global {
  unsigned threads = 1;
  bool no_timestamp = false;
};

template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_error(Errc::io, "cannot write " + path);
  fn(out);
  if (!out) throw_error(Errc::io, "write failed for " + path);
}

struct DataArgs {
  std::string images;
  std::string labels;
  std::size_t limit = 0;

  void add(CLI::App* app, std::size_t default_limit = 0) {
    limit = default_limit;
    app->add_option("--images", images, "IDX image file")->required()->check(CLI::ExistingFile);
    app->add_option("--labels", labels, "IDX label file")->required()->check(CLI::ExistingFile);
    app->add_option("--limit", limit, "Use only the first N images (0 = all)")->capture_default_str();
  }
  Dataset load() const { return take(parse_idx(images, labels), limit); }
};

struct ModelArgs {
  std::string manifest;
  std::string blob;

  void add(CLI::App* app, bool required) {
    auto* m = app->add_option("--model", manifest, "Weights manifest")->check(CLI::ExistingFile);
    auto* b = app->add_option("--weights", blob, "Weights blob")->check(CLI::ExistingFile);
    if (required) {
      m->required();
      b->required();
    } else {
      m->needs(b);
      b->needs(m);
    }
  }
  bool given() const { return !manifest.empty(); }
  RamModel load() const { return load_model(manifest, blob); }
};

struct TreeArgs {
  ClusterOptions options;

  void add(CLI::App* app) {
    app->add_option("--branching", options.branching, "Children per internal node")
        ->check(CLI::Range(2, 1 << 16))
        ->capture_default_str();
    app->add_option("--leaf-capacity", options.leaf_capacity, "Maximum rows per leaf")
        ->check(CLI::Range(1, 1 << 30))
        ->capture_default_str();
    app->add_option("--max-iterations", options.max_iterations, "Lloyd iteration cap")
        ->check(CLI::Range(1, 1 << 20))
        ->capture_default_str();
    app->add_option("--tree-seed", options.seed, "Clustering seed")->capture_default_str();
  }
};

const std::map<std::string, MetricKind> kMetricNames{{"exact", MetricKind::exact_manhattan},
                                                     {"bit", MetricKind::bit_significance}};
const std::map<std::string, InitialPolicy> kInitialNames{{"uniform", InitialPolicy::seeded_uniform},
                                                         {"center", InitialPolicy::center}};

void add_weights(CLI::App* app, DistanceWeights& w) {
  app->add_option("-a,--weight-patch", w.patch, "Patch distance weight")->check(CLI::Range(1.0, 100.0))->capture_default_str();
  app->add_option("-b,--weight-hidden", w.hidden, "Hidden-state distance weight")
      ->check(CLI::Range(1.0, 100.0))
      ->capture_default_str();
  app->add_option("-c,--weight-location", w.location, "Location distance weight")
      ->check(CLI::Range(1.0, 100.0))
      ->capture_default_str();
}

void add_energy(CLI::App* app, EnergyParams& e) {
  app->add_option("--avg-levels", e.avg_levels, "Tree levels per lookup (0 = measured)")->capture_default_str();
  app->add_option("--keys-per-leaf", e.keys_per_leaf, "Keys compared per leaf (0 = leaf capacity)")
      ->capture_default_str();
  app->add_option("--splits", e.splits, "Arrays per key comparison")->capture_default_str();
  app->add_option("--e-compare", e.e_compare, "Joules per array comparison")->capture_default_str();
  app->add_option("--fallback-energy", e.fallback, "Joules charged per network fallback")->capture_default_str();
}

struct InferArgs {
  MbiConfig cfg;
  std::string table_path;
  std::string tree_path;
  TreeArgs tree;

  void add(CLI::App* app, bool with_threshold) {
    app->add_option("--table", table_path, "Lookup table file")->required()->check(CLI::ExistingFile);
    app->add_option("--tree", tree_path, "Cluster tree file (built on the fly when omitted)")
        ->check(CLI::ExistingFile);
    tree.add(app);
    add_weights(app, cfg.weights);
    app->add_option("--metric", cfg.kind, "Leaf distance metric: exact | bit")
        ->transform(CLI::CheckedTransformer(kMetricNames, CLI::ignore_case));
    app->add_option("--sigma", cfg.noise.sigma, "Noise std of each distance term")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--noise-seed", cfg.noise.seed, "Noise stream seed")->capture_default_str();
    app->add_option("--initial", cfg.initial, "Initial location: uniform | center")
        ->transform(CLI::CheckedTransformer(kInitialNames, CLI::ignore_case));
    app->add_option("--location-seed", cfg.seed, "Initial-location seed (default: the table's seed)");
    if (with_threshold)
      app->add_option("--tau", cfg.threshold, "Match-distance threshold for network fallback (inf = never)");
    add_energy(app, cfg.energy);
  }

  struct Loaded {
    LookupTable table;
    ClusterTree tree;
  };

  Loaded load(const CLI::App* app) {
    Loaded l{load_table(table_path), {}};
    cfg.n_glimpses = l.table.config().n_glimpses;
    if (app->count("--location-seed") == 0) cfg.seed = l.table.config().seed;
    if (!tree_path.empty()) {
      l.tree = ClusterTree::load(tree_path);
      if (l.tree.row_count() != l.table.size())
        throw_error(Errc::size_mismatch, "tree indexes " + std::to_string(l.tree.row_count()) +
                                             " rows but the table has " + std::to_string(l.table.size()));
      if (!(l.tree.options().weights == cfg.weights))
        std::cerr << "warning: tree was built with different weights; stored keys may not route to their own leaf\n";
    } else {
      auto options = tree.options;
      options.weights = cfg.weights;
      l.tree = ClusterTree::build(l.table, options);
    }
    return l;
  }
};

std::vector<double> parse_list(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) {
    if (s == "inf" || s == "infinity")
      out.push_back(std::numeric_limits<double>::infinity());
    else {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
      }
      if (used == 0 || used != s.size()) throw CLI::ValidationError("list", "not a number: " + s);
      out.push_back(v);
    }
  }
  return out;
}

void print_energy(std::ostream& os, double joules) {
  os << "energy_per_inference = " << std::fixed << std::setprecision(2) << joules * 1e9 << " nJ\n"
     << std::defaultfloat;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memorization-based inference: distill, index, tune and evaluate lookup tables"};
  app.set_config("--config", "", "Key=value / TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  Global global;
  app.add_option("--threads", global.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--no-timestamp", global.no_timestamp, "Omit the generated-at line from CSV output");
  const auto stamp = [&] { return !global.no_timestamp; };

  // distill
  auto* distill_cmd = app.add_subcommand("distill", "Run the network over images and record one row per glimpse");
  ModelArgs distill_model;
  DataArgs distill_data;
  std::string distill_out;
  std::uint64_t distill_seed = 0;
  bool distill_dedup = false;
  distill_model.add(distill_cmd, true);
  distill_data.add(distill_cmd);
  distill_cmd->add_option("--seed", distill_seed, "Initial-location seed")->capture_default_str();
  distill_cmd->add_flag("--dedup", distill_dedup, "Drop exact duplicate rows");
  distill_cmd->add_option("-o,--out", distill_out, "Output table")->required();
  distill_cmd->callback([&] {
    const auto model = distill_model.load();
    const auto data = distill_data.load();
    auto table = distill(model, data.images, table_config_for(model.config, distill_seed), global.threads);
    if (distill_dedup) table = deduplicate(table);
    save(table, distill_out);
    std::cout << "rows=" << table.size() << " bits=" << table_size_bits(table) << '\n';
  });

  // subsample
  auto* sub_cmd = app.add_subcommand("subsample", "Keep a uniform random fraction of table rows");
  std::string sub_table, sub_out;
  double sub_fraction = 1.0;
  std::uint64_t sub_seed = 0;
  sub_cmd->add_option("--table", sub_table, "Input table")->required()->check(CLI::ExistingFile);
  sub_cmd->add_option("--fraction", sub_fraction, "Fraction of rows to keep")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  sub_cmd->add_option("--seed", sub_seed, "Sampling seed")->capture_default_str();
  sub_cmd->add_option("-o,--out", sub_out, "Output table")->required();
  sub_cmd->callback([&] {
    const auto part = subsample(load_table(sub_table), sub_fraction, sub_seed);
    save(part, sub_out);
    std::cout << "rows=" << part.size() << '\n';
  });

  // index
  auto* index_cmd = app.add_subcommand("index", "Build the hierarchical k-means tree over a table");
  std::string index_table, index_out;
  TreeArgs index_tree;
  index_cmd->add_option("--table", index_table, "Lookup table file")->required()->check(CLI::ExistingFile);
  index_tree.add(index_cmd);
  add_weights(index_cmd, index_tree.options.weights);
  index_cmd->add_option("-o,--out", index_out, "Output tree")->required();
  index_cmd->callback([&] {
    const auto tree = ClusterTree::build(load_table(index_table), index_tree.options);
    tree.save(index_out);
    std::cout << "nodes=" << tree.nodes().size() << " leaves=" << tree.leaf_count()
              << " avg_depth=" << tree.average_depth() << (tree.has_stalled_leaf() ? " stalled" : "") << '\n';
  });

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Bayesian optimization of the distance weights");
  InferArgs tune_args;
  DataArgs tune_data;
  TunerConfig tuner;
  std::string tune_history;
  tune_cmd->add_option("--table", tune_args.table_path, "Lookup table file")->required()->check(CLI::ExistingFile);
  tune_args.tree.add(tune_cmd);
  tune_cmd->add_option("--metric", tune_args.cfg.kind, "Leaf distance metric: exact | bit")
      ->transform(CLI::CheckedTransformer(kMetricNames, CLI::ignore_case));
  tune_cmd->add_option("--initial", tune_args.cfg.initial, "Initial location: uniform | center")
      ->transform(CLI::CheckedTransformer(kInitialNames, CLI::ignore_case));
  tune_data.add(tune_cmd, 1000);
  tune_cmd->add_option("--init-points", tuner.init_points, "Latin-hypercube points")->capture_default_str();
  tune_cmd->add_option("--iterations", tuner.iterations, "EI proposals")->capture_default_str();
  tune_cmd->add_option("--candidates", tuner.candidate_pool, "Random candidates per proposal")->capture_default_str();
  tune_cmd->add_option("--seed", tuner.seed, "Tuner seed")->capture_default_str();
  tune_cmd->add_option("--history", tune_history, "History CSV (default stdout)");
  tune_cmd->callback([&] {
    const auto table = load_table(tune_args.table_path);
    const auto data = tune_data.load();
    auto cfg = tune_args.cfg;
    cfg.n_glimpses = table.config().n_glimpses;
    cfg.seed = table.config().seed;
    const auto objective = [&](const DistanceWeights& w) {
      auto options = tune_args.tree.options;
      options.weights = w;
      const auto tree = ClusterTree::build(table, options);
      auto run = cfg;
      run.weights = w;
      return evaluate(data, mbi_runner(tree, table, run), global.threads).accuracy;
    };
    const auto result = tune(objective, tuner);
    emit(tune_history, [&](std::ostream& os) { write_history_csv(os, result.history, stamp()); });
    std::cerr << "best a=" << result.best.patch << " b=" << result.best.hidden << " c=" << result.best.location
              << " accuracy=" << result.best_score << '\n';
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy, lookup fraction and energy over a dataset");
  InferArgs eval_args;
  DataArgs eval_data;
  ModelArgs eval_model;
  std::string eval_mode = "mbi", eval_out;
  eval_args.add(eval_cmd, true);
  eval_data.add(eval_cmd);
  eval_model.add(eval_cmd, false);
  eval_cmd->add_option("--mode", eval_mode, "mbi | mixed | ram")->check(CLI::IsMember({"mbi", "mixed", "ram"}));
  eval_cmd->add_option("-o,--out", eval_out, "Report CSV (default stdout)");
  eval_cmd->callback([&] {
    if (eval_mode != "mbi" && !eval_model.given())
      throw CLI::RequiredError("--model/--weights (needed by --mode " + eval_mode + ")");
    const auto data = eval_data.load();
    const auto l = eval_args.load(eval_cmd);
    std::optional<RamModel> model;
    if (eval_model.given()) model = eval_model.load();
    EvalReport r;
    if (eval_mode == "mbi")
      r = evaluate(data, mbi_runner(l.tree, l.table, eval_args.cfg), global.threads);
    else if (eval_mode == "mixed")
      r = evaluate(data, mixed_runner(l.tree, l.table, *model, eval_args.cfg), global.threads);
    else
      r = evaluate(data, ram_runner(*model, l.table, eval_args.cfg), global.threads);
    emit(eval_out, [&](std::ostream& os) { write_eval_csv(os, eval_mode.c_str(), r, stamp()); });
  });

  // sweep-threshold
  auto* sweep_t_cmd = app.add_subcommand("sweep-threshold", "Mixed inference over a list of thresholds");
  InferArgs sweep_t_args;
  DataArgs sweep_t_data;
  ModelArgs sweep_t_model;
  std::vector<std::string> sweep_t_taus{"0", "1", "2", "3", "4", "5", "6", "8", "10", "15", "20", "inf"};
  std::string sweep_t_out;
  sweep_t_args.add(sweep_t_cmd, false);
  sweep_t_data.add(sweep_t_cmd);
  sweep_t_model.add(sweep_t_cmd, true);
  sweep_t_cmd->add_option("--taus", sweep_t_taus, "Sorted thresholds (inf allowed)")->delimiter(',')->capture_default_str();
  sweep_t_cmd->add_option("-o,--out", sweep_t_out, "Curve CSV (default stdout)");
  sweep_t_cmd->callback([&] {
    const auto data = sweep_t_data.load();
    const auto l = sweep_t_args.load(sweep_t_cmd);
    const auto model = sweep_t_model.load();
    const auto taus = parse_list(sweep_t_taus);
    const auto curve = sweep_threshold(l.tree, l.table, model, data, taus, sweep_t_args.cfg, global.threads);
    emit(sweep_t_out, [&](std::ostream& os) { write_threshold_csv(os, curve, stamp()); });
  });

  // sweep-fraction
  auto* sweep_f_cmd = app.add_subcommand("sweep-fraction", "Lookup accuracy over table subsample fractions");
  InferArgs sweep_f_args;
  DataArgs sweep_f_data;
  std::vector<std::string> sweep_f_fractions{"0.15", "0.25", "0.5", "0.75", "1"};
  std::uint64_t sweep_f_seed = 0;
  std::string sweep_f_out;
  sweep_f_args.add(sweep_f_cmd, false);
  sweep_f_data.add(sweep_f_cmd);
  sweep_f_cmd->add_option("--fractions", sweep_f_fractions, "Sorted table fractions")->delimiter(',')->capture_default_str();
  sweep_f_cmd->add_option("--seed", sweep_f_seed, "Subsampling seed")->capture_default_str();
  sweep_f_cmd->add_option("-o,--out", sweep_f_out, "Curve CSV (default stdout)");
  sweep_f_cmd->callback([&] {
    const auto data = sweep_f_data.load();
    const auto table = load_table(sweep_f_args.table_path);
    auto cfg = sweep_f_args.cfg;
    cfg.n_glimpses = table.config().n_glimpses;
    if (sweep_f_cmd->count("--location-seed") == 0) cfg.seed = table.config().seed;
    const auto fractions = parse_list(sweep_f_fractions);
    const auto curve = sweep_fraction(table, data, fractions, sweep_f_seed, sweep_f_args.tree.options, cfg,
                                      global.threads);
    emit(sweep_f_out, [&](std::ostream& os) { write_fraction_csv(os, curve, stamp()); });
  });

  // gap-hist
  auto* gap_cmd = app.add_subcommand("gap-hist", "Tree vs brute-force matching gap over random queries");
  InferArgs gap_args;
  int gap_queries = 500, gap_bins = 10, gap_probes = 1;
  std::uint64_t gap_seed = 0;
  std::string gap_out;
  gap_args.add(gap_cmd, false);
  gap_cmd->add_option("--queries", gap_queries, "Random queries")->check(CLI::PositiveNumber)->capture_default_str();
  gap_cmd->add_option("--query-seed", gap_seed, "Query seed")->capture_default_str();
  gap_cmd->add_option("--bins", gap_bins, "Histogram bins over [0, 1]")->check(CLI::PositiveNumber)->capture_default_str();
  gap_cmd->add_option("--probes", gap_probes, "Leaves scanned per query")->check(CLI::PositiveNumber)->capture_default_str();
  gap_cmd->add_option("-o,--out", gap_out, "Histogram CSV (default stdout)");
  gap_cmd->callback([&] {
    const auto l = gap_args.load(gap_cmd);
    Rng rng(mix_seed(gap_seed));
    std::vector<KeyVector> queries;
    for (int i = 0; i < gap_queries; ++i) queries.push_back(random_key(l.table.config(), rng));
    const auto report = gap_histogram(l.tree, l.table, queries, gap_args.cfg.search(), gap_bins, gap_probes);
    emit(gap_out, [&](std::ostream& os) {
      CsvWriter csv(os, stamp());
      csv.header({"bin_low", "bin_high", "count"});
      for (std::size_t b = 0; b < report.counts.size(); ++b) {
        csv << report.bin_low[b] << report.bin_high[b] << report.counts[b];
        csv.end_row();
      }
    });
    std::cerr << "fraction_gap_le_0.10=" << report.fraction_at_most(0.10) << '\n';
  });

  // energy
  auto* energy_cmd = app.add_subcommand("energy", "Lookup energy per inference and its breakdown");
  double e_glimpses = 5, e_levels = 3.5, e_keys = 32, e_splits = 5;
  CimConfig cim;
  std::string energy_out;
  energy_cmd->add_option("--glimpses", e_glimpses, "Glimpses per inference")->capture_default_str();
  energy_cmd->add_option("--levels", e_levels, "Average tree levels per lookup")->capture_default_str();
  energy_cmd->add_option("--keys", e_keys, "Keys compared per leaf")->capture_default_str();
  energy_cmd->add_option("--splits", e_splits, "Arrays per key comparison")->capture_default_str();
  energy_cmd->add_option("--e-compare", cim.e_compare, "Joules per array comparison")->capture_default_str();
  energy_cmd->add_option("--frac-adc", cim.fractions.adc, "ADC share")->capture_default_str();
  energy_cmd->add_option("--frac-peripheral", cim.fractions.peripheral, "Peripheral share")->capture_default_str();
  energy_cmd->add_option("--frac-precharge", cim.fractions.precharge, "Precharge share")->capture_default_str();
  energy_cmd->add_option("--frac-logic", cim.fractions.logic, "Digital logic share")->capture_default_str();
  energy_cmd->add_option("-o,--out", energy_out, "Breakdown CSV (printed after the summary when omitted)");
  energy_cmd->callback([&] {
    cim.validate();
    const double e = energy_per_inference(e_glimpses, e_levels, e_keys, e_splits, cim.e_compare);
    print_energy(std::cout, e);
    emit(energy_out, [&](std::ostream& os) { write_energy_csv(os, energy_breakdown(cim.fractions, e), stamp()); });
  });

  // infer-one
  auto* one_cmd = app.add_subcommand("infer-one", "Classify one image and print every lookup");
  InferArgs one_args;
  DataArgs one_data;
  ModelArgs one_model;
  std::size_t one_index = 0;
  one_args.add(one_cmd, true);
  one_data.add(one_cmd);
  one_model.add(one_cmd, false);
  one_cmd->add_option("--index", one_index, "Image index")->capture_default_str();
  one_cmd->callback([&] {
    const auto data = one_data.load();
    if (one_index >= data.size())
      throw CLI::ValidationError("--index", std::to_string(one_index) + " is past the " +
                                                std::to_string(data.size()) + " loaded images");
    const auto l = one_args.load(one_cmd);
    const auto& cfg = one_args.cfg;
    auto rng = stream_rng(cfg.noise.seed, one_index);
    const auto start = start_location(cfg, l.table.config(), one_index);
    InferenceOutcome o;
    if (one_model.given())
      o = mixed_infer(l.tree, l.table, one_model.load(), data.images[one_index], start, cfg, rng);
    else
      o = mbi_infer(l.tree, l.table, data.images[one_index], start, cfg, rng);
    CsvWriter csv(std::cout, stamp());
    csv.header({"glimpse", "row", "distance"});
    for (std::size_t t = 0; t < o.rows.size(); ++t) {
      csv << t << o.rows[t] << o.distances[t];
      csv.end_row();
    }
    std::cout << "prediction=" << o.prediction << " label=" << data.labels[one_index]
              << " used_mbi=" << (o.used_mbi ? 1 : 0) << " energy_j=" << o.energy << '\n';
  });

  // synth-table
  auto* synth_cmd = app.add_subcommand("synth-table", "Write a table of uniformly random baseline rows");
  std::size_t synth_rows = 10000;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth_cmd->add_option("--rows", synth_rows, "Row count")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Row seed")->capture_default_str();
  synth_cmd->add_option("-o,--out", synth_out, "Output table")->required();
  synth_cmd->callback([&] {
    TableConfig c;
    c.seed = synth_seed;
    save(random_table(c, synth_rows, synth_seed), synth_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
