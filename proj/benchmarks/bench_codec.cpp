#include <benchmark/benchmark.h>

#include "mbi/quantization.hpp"
#include "mbi/table.hpp"

namespace {

using namespace mbi;

void BM_PackUnpack(benchmark::State& state) {
  const QuantSpec spec{static_cast<int>(state.range(0)), 0.0, 1.0};
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(256);
  for (auto& v : values) v = u(rng);
  const auto qv = quantize_vector(values, spec);
  for (auto _ : state) {
    const auto bytes = pack(qv);
    benchmark::DoNotOptimize(unpack(bytes, spec, qv.size()));
  }
}
BENCHMARK(BM_PackUnpack)->Arg(1)->Arg(2)->Arg(5);

void BM_TableRoundTrip(benchmark::State& state) {
  const auto table = random_table(TableConfig::baseline(), static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(deserialize(serialize(table)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TableRoundTrip)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
