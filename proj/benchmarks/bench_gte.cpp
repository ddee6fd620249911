#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "gte/dgp.hpp"
#include "gte/estimators.hpp"
#include "gte/mechanism.hpp"

namespace {

using namespace gte;

void BM_ClearAuction(benchmark::State& state) {
  const auto market = gen_auction_market({.n = static_cast<std::size_t>(state.range(0)), .seed = 1, .covariate_dim = 3});
  const auto bids = market.data.bids();
  const std::vector<double> g(bids.size(), 1.0 / static_cast<double>(bids.size()));
  const auto spec = with_resolved_box(market.spec, bids);
  for (auto _ : state) {
    benchmark::DoNotOptimize(clear_market(spec, bids, g, spec.capacities, default_tolerance(g)).cutoffs);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ClearAuction)->RangeMultiplier(4)->Range(1 << 8, 1 << 16)->Complexity();

void BM_ClearSchool(benchmark::State& state) {
  const auto market = gen_school_market({.n = static_cast<std::size_t>(state.range(0)), .seed = 1});
  const auto bids = market.data.bids();
  const std::vector<double> g(bids.size(), 1.0 / static_cast<double>(bids.size()));
  const auto spec = with_resolved_box(market.spec, bids);
  for (auto _ : state) {
    benchmark::DoNotOptimize(clear_market(spec, bids, g, spec.capacities, default_tolerance(g)).cutoffs);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ClearSchool)->RangeMultiplier(4)->Range(1 << 8, 1 << 14)->Complexity();

void BM_EstimateAuction(benchmark::State& state) {
  const auto market = gen_auction_market({.n = static_cast<std::size_t>(state.range(0)), .seed = 2});
  const EstimatorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_gte_ldml(market.spec, market.data, std::uint64_t{3}, cfg).tau);
}
BENCHMARK(BM_EstimateAuction)->Arg(500)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_EstimateSchool(benchmark::State& state) {
  const auto market = gen_school_market({.n = static_cast<std::size_t>(state.range(0)), .seed = 2});
  const EstimatorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_gte_ldml(market.spec, market.data, std::uint64_t{3}, cfg).tau);
}
BENCHMARK(BM_EstimateSchool)->Arg(500)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
