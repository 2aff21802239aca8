#include <algorithm>
#include <cmath>
#include <utility>

#include "cli.hpp"
#include "mtraffic/estimate.hpp"
#include "mtraffic/markov.hpp"
#include "mtraffic/road_graph.hpp"
#include "mtraffic/spectral.hpp"

namespace mtraffic::cli {

namespace {

using Row = std::vector<double>;
using Table = std::vector<Row>;

RoadNetwork toy_network() {
  const std::vector<std::pair<ExternalId, ExternalId>> edges = {{1, 2}, {2, 1}, {2, 3}, {2, 4},
                                                                {3, 4}, {4, 2}, {4, 5}, {5, 2}};
  return RoadNetwork::from_external_edges(edges);
}

std::vector<WeightedTrajectory> toy_corpus(const RoadNetwork& g) {
  const std::vector<std::pair<std::vector<ExternalId>, std::uint64_t>> raw = {
      {{1, 2, 3, 4}, 150}, {{1, 2, 4, 5}, 100}, {{3, 4, 5}, 200}, {{5, 2, 1}, 250},
      {{5, 2, 3}, 50},     {{3, 4, 2, 1}, 100}, {{5, 2, 4}, 50},  {{4, 2, 1}, 100}};
  std::vector<WeightedTrajectory> out;
  for (const auto& [ids, count] : raw) {
    WeightedTrajectory t;
    t.count = count;
    for (ExternalId id : ids) t.vertices.push_back(*g.find_vertex(id));
    out.push_back(std::move(t));
  }
  return out;
}

Row flatten(const Eigen::MatrixXd& m) {
  Row out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

Row flatten(const Table& t) {
  Row out;
  for (const Row& r : t) out.insert(out.end(), r.begin(), r.end());
  return out;
}

Row to_row(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

template <class T>
Row to_row(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

Eigen::MatrixXd dense_counts(const SufficientStats& stats) {
  const auto n = static_cast<Eigen::Index>(stats.pattern->state_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < stats.n_matrix.size(); ++i) {
    m(stats.pattern->row(i), stats.pattern->column(i)) = static_cast<double>(stats.n_matrix[i]);
  }
  return m;
}

Eigen::MatrixXd dense_aligned(const TransitionPattern& pattern, const std::vector<double>& values) {
  const auto n = static_cast<Eigen::Index>(pattern.state_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < values.size(); ++i) m(pattern.row(i), pattern.column(i)) = values[i];
  return m;
}

class Checker {
 public:
  explicit Checker(std::string perturb) : perturb_(std::move(perturb)) {}

  void check(const std::string& name, Row computed, const Row& expected, double tol) {
    check(name, std::move(computed), expected, Row(expected.size(), tol));
  }

  // Entry-wise tolerances, for tables printed with mixed precision.
  void check(const std::string& name, Row computed, const Row& expected, const Row& tols) {
    if (name == perturb_ && !computed.empty()) computed[0] += 1.0;
    ToyCheck c;
    c.name = name;
    c.tolerance = *std::max_element(tols.begin(), tols.end());
    c.passed = computed.size() == expected.size();
    for (std::size_t i = 0; c.passed && i < computed.size(); ++i) {
      const double err = std::abs(computed[i] - expected[i]);
      c.max_error = std::max(c.max_error, err);
      if (!(err <= tols[i])) c.passed = false;
    }
    if (computed.size() != expected.size()) c.max_error = INFINITY;
    checks_.push_back(std::move(c));
  }

  std::vector<ToyCheck> take() { return std::move(checks_); }

 private:
  std::string perturb_;
  std::vector<ToyCheck> checks_;
};

// Tolerance of a printed value: one unit in its last printed digit.
Row print_tolerance(const Table& t) {
  Row out;
  for (const Row& r : t) {
    for (double x : r) {
      const double scaled3 = std::abs(x) * 1000.0;
      const bool three_digits = std::abs(scaled3 - std::round(scaled3 / 10.0) * 10.0) > 1e-6;
      out.push_back(x == 0.0 || x == 1.0 ? 1e-12 : (three_digits ? 1e-3 : 1e-2));
    }
  }
  return out;
}

}  // namespace

std::vector<ToyCheck> run_toy_checks(const std::string& perturb) {
  Checker ck(perturb);
  const RoadNetwork g = toy_network();

  {
    const IntMatrix a4 = adjacency_power(g, 4);
    const Table expected = {{2, 2, 2, 2, 1}, {2, 5, 2, 4, 2}, {1, 2, 1, 2, 1}, {2, 4, 2, 3, 2}, {2, 2, 2, 2, 1}};
    ck.check("A4", flatten(Eigen::MatrixXd(a4.cast<double>())), flatten(expected), 0.0);
  }
  ck.check("in_degree", to_row(g.in_degrees()), {1, 3, 1, 2, 1}, 0.0);
  ck.check("out_degree", to_row(g.out_degrees()), {1, 3, 1, 2, 1}, 0.0);

  const LaplacianPair lp = laplacians(g);
  {
    const Table expected = {
        {2, -2, 0, 0, 0}, {-2, 6, -1, -2, -1}, {0, -1, 2, -1, 0}, {0, -2, -1, 4, -1}, {0, -1, 0, -1, 2}};
    ck.check("L", flatten(lp.laplacian), flatten(expected), 0.0);
  }
  {
    // Closed form: 1 on the diagonal, -w_uv / sqrt(d_u d_v) off it.
    const double s12 = std::sqrt(12.0);
    const double s24 = std::sqrt(24.0);
    const double s8 = std::sqrt(8.0);
    const Table exact = {{1, -2 / s12, 0, 0, 0},
                         {-2 / s12, 1, -1 / s12, -2 / s24, -1 / s12},
                         {0, -1 / s12, 1, -1 / s8, 0},
                         {0, -2 / s24, -1 / s8, 1, -1 / s8},
                         {0, -1 / s12, 0, -1 / s8, 1}};
    ck.check("L_tilde_exact", flatten(lp.normalized), flatten(exact), 1e-3);
  }
  {
    const Table printed = {{1, -0.577, 0, 0, 0},
                           {-0.577, 1, -0.288, -0.41, -0.288},
                           {0, -0.288, 1, -0.35, 0},
                           {0, -0.41, -0.35, 1, -0.35},
                           {0, -0.288, 0, -0.35, 1}};
    ck.check("L_tilde", flatten(lp.normalized), flatten(printed), print_tolerance(printed));
  }

  const SpectralDecomposition dec = eigendecompose(lp.laplacian);
  const SpectralDecomposition dec_t = eigendecompose(lp.normalized);
  ck.check("eig_L", to_row(dec.eigenvalues), {0, 1.72, 2, 4.46, 7.82}, 1e-2);
  ck.check("eig_L_tilde", to_row(dec_t.eigenvalues), {0, 0.77, 1, 1.5, 1.73}, 1e-2);
  ck.check("kappa", {contraction_rate(dec_t)}, {0.73}, 1e-2);

  {
    const Table p = {{.5, .5, 0, 0, 0}, {.25, .25, .25, .25, 0}, {0, 0, .5, .5, 0}, {0, .25, 0, .5, .25},
                     {0, .5, 0, 0, .5}};
    Eigen::MatrixXd dense(5, 5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) dense(i, j) = p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const MarkovKernel kernel = MarkovKernel::from_dense(make_pattern(g), dense);
    ck.check("pi", to_row(stationary(kernel).pi), {1 / 7.0, 2 / 7.0, 1 / 7.0, 2 / 7.0, 1 / 7.0}, 1e-10);
  }

  const auto corpus = toy_corpus(g);
  const SufficientStats stats = collect_stats(corpus, g).stats;
  ck.check("n", {static_cast<double>(stats.n)}, {3350}, 0.0);
  ck.check("k", {static_cast<double>(stats.k)}, {1000}, 0.0);
  {
    const Table expected = {{0, 250, 0, 0, 0},
                            {450, 0, 200, 150, 0},
                            {0, 0, 0, 450, 0},
                            {0, 200, 0, 0, 300},
                            {0, 350, 0, 0, 0}};
    ck.check("N", flatten(dense_counts(stats)), flatten(expected), 0.0);
  }
  ck.check("s", to_row(stats.s), {250, 0, 300, 100, 350}, 0.0);
  ck.check("e", to_row(stats.e), {450, 0, 50, 200, 300}, 0.0);
  ck.check("s_minus_e", to_row(stats.start_minus_end()), {-200, 0, 250, -100, 50}, 0.0);

  LagrangeOptions lopts;
  lopts.method = LagrangeMethod::Dense;
  const LagrangeSolver solver(g, lopts);
  const EstimatorOutput wls = estimate_wls(stats, solver);
  ck.check("lambda", to_row(wls.lambda), {-116.66, -16.66, 116.66, 0, 16.66}, 1e-2);
  ck.check("n_eff", {wls.n_eff}, {2350}, 1e-9);
  {
    const Eigen::MatrixXd m = dense_aligned(*stats.pattern, wls.m_hat);
    const Table r = {{0, 100, 0, 0, 0},
                     {-100, 0, 133.33, 16.66, 0},
                     {0, 0, 0, -116.66, 0},
                     {0, -16.66, 0, 0, 16.66},
                     {0, -33.33, 0, 0, 0}};
    ck.check("R", flatten(Eigen::MatrixXd(m - dense_counts(stats))), flatten(r), 1e-2);
    const Table nr = {{0, 350, 0, 0, 0},
                      {350, 0, 333.33, 166.66, 0},
                      {0, 0, 0, 333.33, 0},
                      {0, 183.33, 0, 0, 316.66},
                      {0, 316.66, 0, 0, 0}};
    ck.check("N_plus_R", flatten(m), flatten(nr), 1e-2);
  }
  {
    const Table q = {{0, 0.149, 0, 0, 0},
                     {0.149, 0, 0.142, 0.07, 0},
                     {0, 0, 0, 0.142, 0},
                     {0, 0.078, 0, 0, 0.135},
                     {0, 0.135, 0, 0, 0}};
    ck.check("Q_wls", flatten(wls.q_hat.dense()), flatten(q), 1e-2);
  }
  ck.check("pi_wls", to_row(wls.pi_hat), {0.149, 0.362, 0.142, 0.213, 0.135}, 1e-2);
  {
    const Table p = {{0, 1, 0, 0, 0},
                     {0.41, 0, 0.39, 0.2, 0},
                     {0, 0, 0, 1, 0},
                     {0, 0.37, 0, 0, 0.63},
                     {0, 1, 0, 0, 0}};
    ck.check("P_wls", flatten(wls.p_hat.dense()), flatten(p), 1e-2);
  }

  const EstimatorOutput ml = estimate_ml(stats);
  {
    const Table p = {{0, 1, 0, 0, 0},
                     {0.5625, 0, 0.25, 0.1875, 0},
                     {0, 0, 0, 1, 0},
                     {0, 0.4, 0, 0, 0.6},
                     {0, 1, 0, 0, 0}};
    ck.check("P_ml", flatten(ml.p_hat.dense()), flatten(p), 1e-2);
  }
  ck.check("pi_ml", to_row(ml.pi_hat), {0.224, 0.398, 0.1, 0.174, 0.104}, 1e-2);
  return ck.take();
}

}  // namespace mtraffic::cli
