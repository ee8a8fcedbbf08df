#include <benchmark/benchmark.h>

#include <map>

#include "mbi/cim_sim.hpp"
#include "mbi/cluster_tree.hpp"
#include "mbi/metric.hpp"
#include "mbi/table.hpp"

namespace {

using namespace mbi;

const TableConfig kConfig = TableConfig::baseline();

void BM_WeightedDistance(benchmark::State& state) {
  const auto kind = static_cast<MetricKind>(state.range(0));
  Rng rng(1);
  const auto a = random_key(kConfig, rng), b = random_key(kConfig, rng);
  const auto bits = KeyBits::from(kConfig);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_distance(a.view(), b.view(), {}, kind, bits));
}
BENCHMARK(BM_WeightedDistance)
    ->Arg(static_cast<int>(MetricKind::exact_manhattan))
    ->Arg(static_cast<int>(MetricKind::bit_significance));

struct World {
  LookupTable table;
  ClusterTree tree;
  std::vector<KeyVector> queries;

  explicit World(std::size_t rows) : table(random_table(kConfig, rows, 3)) {
    ClusterOptions o;
    o.seed = 3;
    tree = ClusterTree::build(table, o);
    Rng rng(4);
    for (int i = 0; i < 64; ++i) queries.push_back(random_key(kConfig, rng));
  }
};

const World& world(std::size_t rows) {
  static std::map<std::size_t, World> cache;
  auto it = cache.find(rows);
  if (it == cache.end()) it = cache.emplace(rows, World(rows)).first;
  return it->second;
}

void BM_TreeSearch(benchmark::State& state) {
  const auto& w = world(static_cast<std::size_t>(state.range(0)));
  const int probes = static_cast<int>(state.range(1));
  Rng rng(5);
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(w.tree.search(w.table, w.queries[i++ % w.queries.size()].view(), {}, rng, probes));
}
BENCHMARK(BM_TreeSearch)->Args({10000, 1})->Args({10000, 8})->Args({100000, 1})->Unit(benchmark::kMicrosecond);

void BM_BruteSearch(benchmark::State& state) {
  const auto& w = world(static_cast<std::size_t>(state.range(0)));
  Rng rng(5);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(search_brute(w.table, w.queries[i++ % w.queries.size()].view(), {}, rng));
}
BENCHMARK(BM_BruteSearch)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_TreeBuild(benchmark::State& state) {
  const auto table = random_table(kConfig, static_cast<std::size_t>(state.range(0)), 3);
  ClusterOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(ClusterTree::build(table, o));
}
BENCHMARK(BM_TreeBuild)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_CimCompare(benchmark::State& state) {
  const CimConfig cfg;
  Rng rng(6);
  std::uniform_int_distribution<int> level(0, 3);
  std::vector<std::uint8_t> key(16), query(16);
  for (auto& v : key) v = static_cast<std::uint8_t>(level(rng));
  for (auto& v : query) v = static_cast<std::uint8_t>(level(rng));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_compare(key, query, 2, cfg, rng));
}
BENCHMARK(BM_CimCompare);

}  // namespace

BENCHMARK_MAIN();
