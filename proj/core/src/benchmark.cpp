#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include "mtraffic/error.hpp"
#include "mtraffic/estimate.hpp"

namespace mtraffic {

std::vector<VertexId> sample_trajectory(const MarkovKernel& p, std::span<const double> pi_cdf,
                                        std::size_t n, CounterRng& rng) {
  std::vector<VertexId> out;
  out.reserve(n);
  if (n == 0) return out;
  auto pick = [](std::span<const double> cdf, double x) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                             static_cast<std::ptrdiff_t>(cdf.size()) - 1));
  };
  VertexId u = static_cast<VertexId>(pick(pi_cdf, rng.uniform()));
  out.push_back(u);
  const TransitionPattern& pat = p.pattern();
  for (std::size_t t = 1; t < n; ++t) {
    const double x = rng.uniform();
    double run = 0.0;
    std::size_t chosen = pat.row_end(u) - 1;
    for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) {
      if (p.values()[i] <= 0.0) continue;
      run += p.values()[i];
      chosen = i;
      if (x < run) break;
    }
    u = pat.column(chosen);
    out.push_back(u);
  }
  return out;
}

namespace {

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

BenchmarkCell run_benchmark_cell(const MarkovKernel& p, const LagrangeSolver& solver, std::size_t k,
                                 std::size_t n, const BenchmarkOptions& options, std::size_t cell_index) {
  if (k == 0 || n < 2) throw Error(ErrorCode::InvalidInput, "need k >= 1 and n >= 2");
  if (options.reps == 0) throw Error(ErrorCode::InvalidInput, "need at least one replication");
  const StationaryDistribution st = stationary(p, options.stationary);
  const TwoDimStationary q = q_from_p(p, st.pi);
  std::vector<double> cdf(static_cast<std::size_t>(st.pi.size()));
  std::partial_sum(st.pi.data(), st.pi.data() + st.pi.size(), cdf.begin());

  std::vector<double> ml_bias(options.reps);
  std::vector<double> wls_bias(options.reps);
  auto replicate = [&](std::size_t r) {
    CounterRng rng(options.seed, cell_index * options.reps + r);
    SufficientStats stats(p.pattern_ptr());
    for (std::size_t i = 0; i < k; ++i) {
      const auto traj = sample_trajectory(p, cdf, n, rng);
      accumulate(stats, traj);
    }
    const EstimatorOutput ml = estimate_ml(stats, options.stationary);
    ml_bias[r] = g_distance(ml.q_hat.q, q.q);
    const EstimatorOutput wls = estimate_wls_raw(stats, solver);
    wls_bias[r] = g_distance(wls.q_raw, q.q);
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(options.reps)));
  if (workers == 1) {
    for (std::size_t r = 0; r < options.reps; ++r) replicate(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < options.reps; r += workers) replicate(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  BenchmarkCell cell;
  cell.k = k;
  cell.n = n;
  cell.reps = options.reps;
  mean_sd(ml_bias, cell.ml_mean, cell.ml_sd);
  mean_sd(wls_bias, cell.wls_mean, cell.wls_sd);
  return cell;
}

std::vector<BenchmarkCell> run_benchmark(const RoadNetwork& g, const MarkovKernel& p,
                                         std::span<const std::size_t> ks, std::span<const std::size_t> ns,
                                         const BenchmarkOptions& options) {
  if (p.state_count() != g.vertex_count()) throw Error(ErrorCode::SizeMismatch, "kernel does not match graph");
  const LagrangeSolver solver(g, options.wls.solver);
  std::vector<BenchmarkCell> cells;
  std::size_t index = 0;
  for (std::size_t k : ks) {
    for (std::size_t n : ns) cells.push_back(run_benchmark_cell(p, solver, k, n, options, index++));
  }
  return cells;
}

void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkCell> cells) {
  out << "k,n,method,mean_bias,sd_bias\n";
  for (const BenchmarkCell& c : cells) {
    out << c.k << ',' << c.n << ",ml," << c.ml_mean << ',' << c.ml_sd << '\n';
    out << c.k << ',' << c.n << ",wls," << c.wls_mean << ',' << c.wls_sd << '\n';
  }
}

MarkovKernel random_dirichlet_kernel(const RoadNetwork& g, std::uint64_t seed) {
  PatternPtr pattern = make_pattern(g);
  std::vector<double> values(pattern->size());
  for (StateId u = 0; u < pattern->state_count(); ++u) {
    CounterRng rng(seed, u);
    double sum = 0.0;
    for (std::size_t i = pattern->row_begin(u); i < pattern->row_end(u); ++i) {
      values[i] = -std::log1p(-rng.uniform());  // Exp(1), i.e. Gamma(1)
      sum += values[i];
    }
    for (std::size_t i = pattern->row_begin(u); i < pattern->row_end(u); ++i) values[i] /= sum;
  }
  return {pattern, std::move(values), 1e-9};
}

RoadNetwork random_strongly_connected_graph(std::size_t n, std::size_t extra_edges, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InvalidInput, "need at least two vertices");
  const std::size_t max_edges = n * (n - 1);
  if (n + extra_edges > max_edges) throw Error(ErrorCode::InvalidInput, "too many edges requested");
  CounterRng rng(seed, 0);
  std::vector<VertexId> order(n);
  std::iota(order.begin(), order.end(), VertexId{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::set<std::pair<VertexId, VertexId>> edges;
  for (std::size_t i = 0; i < n; ++i) edges.emplace(order[i], order[(i + 1) % n]);
  const std::size_t target = n + extra_edges;
  while (edges.size() < target) {
    const auto u = static_cast<VertexId>(rng() % n);
    const auto v = static_cast<VertexId>(rng() % n);
    if (u != v) edges.emplace(u, v);
  }
  std::vector<Edge> list;
  list.reserve(edges.size());
  for (const auto& [u, v] : edges) list.push_back({u, v});
  return RoadNetwork::build(n, list);
}

}  // namespace mtraffic
