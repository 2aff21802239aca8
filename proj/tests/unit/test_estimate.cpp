#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "mtraffic/error.hpp"
#include "toy.hpp"

using namespace mtraffic;
using doctest::Approx;

namespace {

Eigen::MatrixXd dense(const TransitionPattern& pattern, const std::vector<double>& values) {
  const auto n = static_cast<Eigen::Index>(pattern.state_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < values.size(); ++i) m(pattern.row(i), pattern.column(i)) = values[i];
  return m;
}

SufficientStats toy_stats(const RoadNetwork& g) { return collect_stats(toy::corpus(g), g).stats; }

// Closed walks 1 -> 2 -> 1, so every vertex starts and ends equally often.
std::vector<WeightedTrajectory> balanced(const RoadNetwork& g) {
  const VertexId a = *g.find_vertex(1);
  const VertexId b = *g.find_vertex(2);
  return {{{a, b, a}, 3}, {{b, a, b}, 3}};
}

}  // namespace

TEST_CASE("sufficient statistics of the toy corpus") {
  const RoadNetwork g = toy::network();
  const SufficientStats s = toy_stats(g);
  CHECK(s.n == 3350);
  CHECK(s.k == 1000);
  const Eigen::MatrixXd n = dense(*s.pattern, std::vector<double>(s.n_matrix.begin(), s.n_matrix.end()));
  CHECK(n.row(1) == Eigen::RowVectorXd((Eigen::RowVectorXd(5) << 450, 0, 200, 150, 0).finished()));
  const Eigen::VectorXd diff = s.start_minus_end();
  CHECK(diff == Eigen::VectorXd((Eigen::VectorXd(5) << -200, 0, 250, -100, 50).finished()));
}

TEST_CASE("single trajectory") {
  const RoadNetwork g = toy::network();
  const std::vector<WeightedTrajectory> one{{{0, 1}, 1}};
  const SufficientStats s = collect_stats(one, g).stats;
  CHECK(s.n == 2);
  CHECK(s.k == 1);
  CHECK(s.s == std::vector<std::uint64_t>{1, 0, 0, 0, 0});
  CHECK(s.e == std::vector<std::uint64_t>{0, 1, 0, 0, 0});
  CHECK(s.n_matrix[*s.pattern->position(0, 1)] == 1);
  CHECK(std::accumulate(s.n_matrix.begin(), s.n_matrix.end(), std::uint64_t{0}) == 1);

  const NaiveEstimate naive = estimate_naive(s);
  CHECK(naive.q[*s.pattern->position(0, 1)] == 1.0);
  CHECK(naive.marginal_gap(0) == -1.0);
  CHECK(naive.marginal_gap(1) == 1.0);
}

TEST_CASE("invalid trajectories are skipped") {
  const RoadNetwork g = toy::network();
  const std::vector<WeightedTrajectory> corpus{{{0, 1}, 1}, {{0, 2}, 5}, {{3}, 2}};
  const CollectResult r = collect_stats(corpus, g);
  CHECK(r.stats.k == 1);
  REQUIRE(r.skipped.size() == 2);
  CHECK(r.skipped[0].reason == SkipReason::InvalidTransition);
  CHECK(r.skipped[0].from == 1);
  CHECK(r.skipped[0].to == 3);
  CHECK(r.skipped[1].reason == SkipReason::TooShort);
}

TEST_CASE("parallel collection matches serial") {
  const RoadNetwork g = toy::network();
  const auto corpus = toy::corpus(g);
  const SufficientStats serial = collect_stats(corpus, g, 1).stats;
  for (unsigned t : {2u, 3u, 8u}) CHECK(collect_stats(corpus, g, t).stats == serial);
}

TEST_CASE("naive estimator") {
  const RoadNetwork g = toy::network();
  const SufficientStats s = toy_stats(g);
  CHECK(estimate_naive(s).q[*s.pattern->position(0, 1)] == Approx(250.0 / 2350));
}

TEST_CASE("maximum likelihood estimator") {
  const RoadNetwork g = toy::network();
  const EstimatorOutput ml = estimate_ml(toy_stats(g));
  const Eigen::MatrixXd p = ml.p_hat.dense();
  CHECK(p(1, 0) == Approx(0.5625));
  CHECK(p(1, 2) == Approx(0.25));
  CHECK(p(1, 3) == Approx(0.1875));
  const std::vector<double> pi{0.224, 0.398, 0.1, 0.174, 0.104};
  for (std::size_t v = 0; v < 5; ++v) CHECK(std::abs(ml.pi_hat(static_cast<Eigen::Index>(v)) - pi[v]) < 1e-3);

  const RoadNetwork cyc = toy::from_pairs({{1, 2}, {2, 3}, {3, 1}});
  const std::vector<WeightedTrajectory> loop{{{0, 1, 2, 0}, 1}};
  const EstimatorOutput c = estimate_ml(collect_stats(loop, cyc).stats);
  CHECK(c.p_hat(0, 1) == 1.0);
  CHECK(c.p_hat(1, 2) == 1.0);
  CHECK(c.p_hat(2, 0) == 1.0);
  CHECK((c.pi_hat.array() - 1.0 / 3).abs().maxCoeff() < 1e-12);
}

TEST_CASE("weighted least squares estimator") {
  const RoadNetwork g = toy::network();
  const SufficientStats s = toy_stats(g);
  const EstimatorOutput w = estimate_wls(s, g);
  CHECK(w.n_eff == 2350.0);
  const Eigen::MatrixXd m = dense(*s.pattern, w.m_hat);
  const std::vector<double> row2{350, 0, 333.33, 166.66, 0};
  for (int j = 0; j < 5; ++j) CHECK(std::abs(m(1, j) - row2[static_cast<std::size_t>(j)]) < 1e-2);
  const std::vector<double> pi{0.149, 0.362, 0.142, 0.213, 0.135};
  for (std::size_t v = 0; v < 5; ++v) CHECK(std::abs(w.pi_hat(static_cast<Eigen::Index>(v)) - pi[v]) < 1e-2);
  CHECK(std::abs(w.p_hat(3, 1) - 0.37) < 1e-2);
  CHECK(std::abs(w.p_hat(3, 4) - 0.63) < 1e-2);
  CHECK(w.diagnostics.rows.empty());
}

TEST_CASE("balanced corpus needs no correction") {
  const RoadNetwork g = toy::network();
  const SufficientStats s = collect_stats(balanced(g), g).stats;
  const EstimatorOutput w = estimate_wls(s, g);
  CHECK(w.lambda.cwiseAbs().maxCoeff() < 1e-12);
  const NaiveEstimate naive = estimate_naive(s);
  for (std::size_t i = 0; i < s.n_matrix.size(); ++i) {
    CHECK(w.m_hat[i] == Approx(static_cast<double>(s.n_matrix[i])));
    CHECK(w.q_raw[i] == Approx(naive.q[i]));
  }
  CHECK(sse_decomposition(std::vector<double>(s.n_matrix.begin(), s.n_matrix.end()), s).bias == 0.0);
}

TEST_CASE("row repair policies") {
  const RoadNetwork g = toy::network();
  const SufficientStats s = toy_stats(g);
  WlsOptions strict;
  strict.min_row_count = 1000;
  const EstimatorOutput w = estimate_wls(s, g, strict);
  CHECK(w.diagnostics.rows.size() == 5);
  CHECK((w.p_hat.dense() - estimate_ml(s).p_hat.dense()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(w.diagnostics.resolved_stationary);

  WlsOptions clamp;
  clamp.repair = RepairPolicy::Clamp;
  const EstimatorOutput c = estimate_wls(s, g, clamp);
  for (double v : c.p_hat.values()) CHECK(v >= 0.0);
}

TEST_CASE("the WLS solution minimizes the weighted squared error") {
  const RoadNetwork g = toy::network();
  const auto corpus = toy::corpus(g);
  const SufficientStats s = collect_stats(corpus, g).stats;
  const EstimatorOutput w = estimate_wls(s, g);
  std::vector<std::vector<std::uint64_t>> per;
  std::vector<double> weights;
  for (const auto& t : corpus) {
    std::vector<std::uint64_t> counts;
    REQUIRE_FALSE(trajectory_counts(*s.pattern, t.vertices, counts).has_value());
    std::uint64_t norm_sq = 0;
    for (auto c : counts) norm_sq += c * c;
    for (std::uint64_t i = 0; i < t.count; ++i) {
      per.push_back(counts);
      weights.push_back(wls_weight(s, norm_sq));
    }
  }
  CHECK(std::accumulate(weights.begin(), weights.end(), 0.0) == Approx(1.0));
  const double best = sse(w.m_hat, weights, per);
  CHECK(best == Approx(sse_decomposition(w.m_hat, s).total()).epsilon(1e-9));

  // Flow around the cycle 2 -> 3 -> 4 -> 2 traded against waiting keeps every marginal.
  const auto& pat = *s.pattern;
  const std::vector<std::pair<StateId, StateId>> plus{{1, 2}, {2, 3}, {3, 1}};
  for (double eps : {-5.0, -0.1, 0.1, 5.0}) {
    std::vector<double> m = w.m_hat;
    for (const auto& [u, v] : plus) {
      m[*pat.position(u, v)] += eps;
      m[pat.diagonal(u)] -= eps;
    }
    CHECK(sse(m, weights, per) >= best);
  }

  const std::vector<WeightedTrajectory> single{{{0, 1, 2}, 1}};
  const SufficientStats s1 = collect_stats(single, g).stats;
  CHECK(wls_weight(s1, 2) == Approx(1.0));
}

TEST_CASE("estimators reject empty input") {
  const RoadNetwork g = toy::network();
  const SufficientStats empty(make_pattern(g));
  CHECK_THROWS_AS(estimate_naive(empty), Error);
  CHECK_THROWS_AS(estimate_wls(empty, g), Error);
}

TEST_CASE("corpus files") {
  const RoadNetwork g = toy::network();
  std::istringstream in("# toy\n1 2 3 4 *150\n5 2 1\n1 9 2\n");
  const CorpusFile f = read_corpus(in, g);
  // Unknown lines stay in place as empty entries, so indices follow the input.
  REQUIRE(f.trajectories.size() == 3);
  CHECK(f.trajectories[0].count == 150);
  CHECK(f.trajectories[1].count == 1);
  CHECK(f.trajectories[2].vertices.empty());
  REQUIRE(f.skipped.size() == 1);
  CHECK(f.skipped[0].reason == SkipReason::UnknownVertex);
  CHECK(f.skipped[0].from == 9);
  CHECK(f.skipped[0].index == 2);
  std::ostringstream out;
  write_corpus(out, f.trajectories, g);
  CHECK(out.str() == "1 2 3 4 *150\n5 2 1\n");
}

TEST_CASE("benchmark is reproducible") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  BenchmarkOptions o;
  o.reps = 1;
  o.seed = 9;
  const std::vector<std::size_t> ks{100};
  const std::vector<std::size_t> ns{5};
  const auto a = run_benchmark(g, p, ks, ns, o);
  const auto b = run_benchmark(g, p, ks, ns, o);
  REQUIRE(a.size() == 1);
  CHECK(a[0].ml_mean == b[0].ml_mean);
  CHECK(a[0].wls_mean == b[0].wls_mean);
  CHECK(a[0].ml_sd == 0.0);
  o.threads = 3;
  o.reps = 6;
  const auto c = run_benchmark(g, p, ks, ns, o);
  o.threads = 1;
  const auto d = run_benchmark(g, p, ks, ns, o);
  CHECK(c[0].ml_mean == d[0].ml_mean);
  CHECK(c[0].wls_sd == d[0].wls_sd);
}

TEST_CASE("random generators") {
  const RoadNetwork g = random_strongly_connected_graph(50, 60, 4);
  CHECK(g.edge_count() == 110);
  CHECK(is_strongly_connected(g));
  const MarkovKernel p = random_dirichlet_kernel(g, 5);
  for (StateId u = 0; u < 50; ++u) {
    const auto row = p.row_values(u);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == Approx(1.0));
  }
  CHECK_THROWS_AS(random_strongly_connected_graph(3, 10, 1), Error);
}
