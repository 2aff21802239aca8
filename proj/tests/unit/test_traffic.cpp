#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mtraffic/error.hpp"
#include "mtraffic/traffic.hpp"
#include "toy.hpp"

using namespace mtraffic;
using doctest::Approx;

TEST_CASE("multinomial laws") {
  const Eigen::VectorXd pi = toy::pi();
  CHECK(multinomial_pmf(pi, TrafficConfig{0, 2, 0, 0, 0}) == Approx(4.0 / 49));
  for (std::size_t v = 0; v < 5; ++v) {
    TrafficConfig f(5, 0);
    f[v] = 1;
    CHECK(multinomial_pmf(pi, f) == Approx(pi(static_cast<Eigen::Index>(v))));
  }
  double total = 0.0;
  for (const auto& f : enumerate_configs(5, 2)) total += multinomial_pmf(pi, f);
  CHECK(std::abs(total - 1.0) < 1e-12);

  const RoadNetwork g = toy::network();
  const TwoDimStationary q = q_from_p(toy::fig3(g), pi);
  std::vector<std::uint64_t> h(q.q.size(), 0);
  h[*q.pattern->position(0, 1)] = 1;
  CHECK(multinomial_edge_pmf(q, h) == Approx(1.0 / 14));
  double sum1 = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    std::vector<std::uint64_t> one(h.size(), 0);
    one[i] = 1;
    sum1 += multinomial_edge_pmf(q, one);
  }
  CHECK(sum1 == Approx(1.0));
  std::vector<std::uint64_t> two(h.size(), 0);
  two[*q.pattern->position(3, 3)] = 2;
  CHECK(multinomial_edge_pmf(q, two) == Approx(1.0 / 49));
}

TEST_CASE("configuration counts") {
  CHECK(config_count(5, 2) == 15);
  CHECK(enumerate_configs(5, 2).size() == 15);
  const auto c = enumerate_configs(3, 2);
  CHECK(std::is_sorted(c.begin(), c.end()));
}

TEST_CASE("transport matrices") {
  const RoadNetwork g = toy::network();
  const PatternPtr pattern = make_pattern(g);
  const TrafficConfig f{1, 4, 2, 2, 1};
  const TrafficConfig to{1, 2, 1, 4, 2};
  const auto all = enumerate_transport_matrices(*pattern, f, to);
  REQUIRE_FALSE(all.empty());
  bool found = false;
  for (const auto& t : all) {
    std::vector<std::uint64_t> rows(5, 0);
    std::vector<std::uint64_t> cols(5, 0);
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
      rows[pattern->row(i)] += t.entries[i];
      cols[pattern->column(i)] += t.entries[i];
    }
    CHECK(rows == std::vector<std::uint64_t>(f.begin(), f.end()));
    CHECK(cols == std::vector<std::uint64_t>(to.begin(), to.end()));
    bool row2 = true;
    for (StateId v = 0; v < 4; ++v) row2 = row2 && t.entries[*pattern->position(1, v)] == 1;
    found = found || row2;
  }
  CHECK(found);

  const TrafficConfig stay{0, 3, 0, 0, 0};
  const auto one = enumerate_transport_matrices(*pattern, stay, stay);
  REQUIRE(one.size() == 1);
  CHECK(one[0].entries[pattern->diagonal(1)] == 3);

  CHECK(enumerate_transport_matrices(*pattern, TrafficConfig{1, 0, 0, 0, 0}, TrafficConfig{0, 0, 1, 0, 0}).empty());
  CHECK_THROWS_AS(enumerate_transport_matrices(*pattern, TrafficConfig{1, 0}, TrafficConfig{1, 0}), Error);
}

TEST_CASE("configuration kernel") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  const ConfigKernel r1 = config_kernel(p, 1);
  REQUIRE(r1.configs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const auto u = static_cast<StateId>(std::find(r1.configs[i].begin(), r1.configs[i].end(), 1u) - r1.configs[i].begin());
      const auto v = static_cast<StateId>(std::find(r1.configs[j].begin(), r1.configs[j].end(), 1u) - r1.configs[j].begin());
      CHECK(r1.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == Approx(p(u, v)));
    }
  }
  const ConfigKernel r2 = config_kernel(p, 2);
  CHECK(r2.matrix.rows() == 15);
  CHECK((r2.matrix.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  const Eigen::VectorXd rho = config_stationary(r2, toy::pi());
  CHECK((r2.matrix.transpose() * rho - rho).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((config_kernel_power(r2, 1) - r2.matrix).norm() == 0.0);
  CHECK(r2.index_of(TrafficConfig{0, 0, 0, 0, 2}).has_value());
  CHECK_THROWS_AS(config_kernel(p, 40, 100), Error);
}

TEST_CASE("simulation of a deterministic cycle") {
  const RoadNetwork cyc = toy::from_pairs({{1, 2}, {2, 3}, {3, 1}});
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
  const MarkovKernel k = MarkovKernel::from_dense(make_pattern(cyc), p);
  std::vector<TrafficConfig> seen;
  simulate(k, TrafficConfig{1, 0, 0}, 6, 3, [&](std::size_t, const TrafficConfig& c) { seen.push_back(c); });
  REQUIRE(seen.size() == 7);
  for (std::size_t t = 0; t < seen.size(); ++t) {
    TrafficConfig expected(3, 0);
    expected[t % 3] = 1;
    CHECK(seen[t] == expected);
  }
}

TEST_CASE("simulation is reproducible across thread counts") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  auto run = [&](unsigned threads) {
    TrafficSimulator sim(p, TrafficConfig{0, 5000, 0, 0, 0}, 42, threads);
    for (int i = 0; i < 30; ++i) sim.step();
    return std::vector<StateId>(sim.positions().begin(), sim.positions().end());
  };
  const auto a = run(1);
  CHECK(a == run(1));
  CHECK(a == run(3));
}

TEST_CASE("simulation converges to the stationary law") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  TrafficConfig last;
  simulate(p, TrafficConfig{0, 10000, 0, 0, 0}, 500, 42, [&](std::size_t, const TrafficConfig& c) { last = c; });
  for (std::size_t v = 0; v < 5; ++v) {
    CHECK(std::abs(static_cast<double>(last[v]) / 10000.0 - toy::pi()(static_cast<Eigen::Index>(v))) < 0.01);
  }
}

TEST_CASE("chi-squared statistic") {
  const Eigen::VectorXd pi = toy::pi();
  CHECK(chi_squared(TrafficConfig{1000, 2000, 1000, 2000, 1000}, pi).statistic == 0.0);
  const ChiSquared x = chi_squared(TrafficConfig{1001, 1999, 1000, 2000, 1000}, pi);
  CHECK(x.statistic == Approx(1.0 / 1000 + 1.0 / 2000));
  CHECK(x.df == 4);

  const std::vector<std::uint32_t> groups{0, 0, 1, 1, 1};
  CHECK(chi_squared(TrafficConfig{1001, 1999, 1000, 2000, 1000}, pi, groups).statistic == Approx(0.0));

  Eigen::VectorXd degenerate = pi;
  degenerate(4) = 0.0;
  degenerate /= degenerate.sum();
  CHECK_THROWS_AS(chi_squared(TrafficConfig{1, 1, 1, 1, 1}, degenerate), Error);
  CHECK_NOTHROW(chi_squared(TrafficConfig{1, 1, 1, 1, 0}, degenerate));
}

TEST_CASE("chi-squared series starts high and settles") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  std::vector<double> series;
  simulate(p, TrafficConfig{0, 10000, 0, 0, 0}, 200, 7,
           [&](std::size_t, const TrafficConfig& c) { series.push_back(chi_squared(c, toy::pi()).statistic); });
  double tail = 0.0;
  for (std::size_t t = 100; t < series.size(); ++t) tail = std::max(tail, series[t]);
  CHECK(series[0] > 100.0 * tail);
}

TEST_CASE("counts csv") {
  const RoadNetwork g = toy::network();
  std::ostringstream out;
  write_counts_csv(out, 3, TrafficConfig{0, 2, 0, 1, 0}, g);
  CHECK(out.str() == "3,2,2\n3,4,1\n");
}
