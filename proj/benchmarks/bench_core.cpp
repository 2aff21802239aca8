#include <benchmark/benchmark.h>

#include "mtraffic/estimate.hpp"
#include "mtraffic/markov.hpp"
#include "mtraffic/random.hpp"
#include "mtraffic/spectral.hpp"
#include "mtraffic/traffic.hpp"

using namespace mtraffic;

namespace {

RoadNetwork graph_of(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  return random_strongly_connected_graph(n, 2 * n, 11);
}

void BM_Stationary(benchmark::State& state) {
  const RoadNetwork g = graph_of(state);
  const MarkovKernel p = random_dirichlet_kernel(g, 12);
  StationaryOptions o;
  o.method = state.range(1) == 0 ? StationaryMethod::DenseSolve : StationaryMethod::PowerCesaro;
  for (auto _ : state) benchmark::DoNotOptimize(stationary(p, o).pi.data());
}
BENCHMARK(BM_Stationary)->Args({200, 0})->Args({200, 1})->Args({1000, 0})->Args({1000, 1})->Unit(benchmark::kMillisecond);

void BM_LagrangeSolve(benchmark::State& state) {
  const RoadNetwork g = graph_of(state);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.vertex_count()));
  CounterRng rng(13, 0);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = static_cast<double>(rng() % 200) - 100.0;
  b.array() -= b.mean();
  LagrangeOptions o;
  o.method = state.range(1) == 0 ? LagrangeMethod::Dense : LagrangeMethod::FixedPoint;
  const LagrangeSolver solver(g, o);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(b).lambda.data());
}
BENCHMARK(BM_LagrangeSolve)->Args({200, 0})->Args({200, 1})->Args({1000, 0})->Args({1000, 1})->Unit(benchmark::kMicrosecond);

void BM_CollectStats(benchmark::State& state) {
  const RoadNetwork g = random_strongly_connected_graph(1000, 2000, 14);
  const MarkovKernel p = random_dirichlet_kernel(g, 15);
  std::vector<double> cdf(g.vertex_count());
  for (std::size_t v = 0; v < cdf.size(); ++v) cdf[v] = static_cast<double>(v + 1) / static_cast<double>(cdf.size());
  CounterRng rng(16, 0);
  std::vector<WeightedTrajectory> corpus(static_cast<std::size_t>(state.range(0)));
  for (auto& t : corpus) t.vertices = sample_trajectory(p, cdf, 40, rng);
  const auto threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(collect_stats(corpus, g, threads).stats.n);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CollectStats)->Args({10000, 1})->Args({10000, 4})->Unit(benchmark::kMillisecond);

void BM_SimulateStep(benchmark::State& state) {
  const RoadNetwork g = random_strongly_connected_graph(1000, 2000, 17);
  const MarkovKernel p = random_dirichlet_kernel(g, 18);
  TrafficConfig init(g.vertex_count(), 0);
  init[0] = static_cast<std::uint64_t>(state.range(0));
  TrafficSimulator sim(p, init, 19, static_cast<unsigned>(state.range(1)));
  for (auto _ : state) sim.step();
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateStep)->Args({100000, 1})->Args({100000, 4})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
