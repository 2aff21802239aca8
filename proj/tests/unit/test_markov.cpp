#include <sstream>

#include "doctest.h"
#include "mtraffic/error.hpp"
#include "toy.hpp"

using namespace mtraffic;
using doctest::Approx;

namespace {

Edge ext(const RoadNetwork& g, ExternalId a, ExternalId b) { return {*g.find_vertex(a), *g.find_vertex(b)}; }

}  // namespace

TEST_CASE("kernel validation") {
  const RoadNetwork g = toy::network();
  Eigen::MatrixXd p = toy::fig3_dense();
  CHECK(validate_kernel(p, g.digraph(), KernelMode::Compatible).ok());

  Eigen::MatrixXd off = p;
  off(0, 0) = 0.4;
  off(0, 2) = 0.1;
  const auto d = validate_kernel(off, g.digraph(), KernelMode::Subordinated);
  REQUIRE(d.off_support.size() == 1);
  CHECK(d.off_support[0].row == 0);
  CHECK(d.off_support[0].col == 2);

  Eigen::MatrixXd sub = p;
  sub(1, 1) += sub(1, 2);
  sub(1, 2) = 0.0;
  CHECK(validate_kernel(sub, g.digraph(), KernelMode::Subordinated).ok());
  CHECK_FALSE(validate_kernel(sub, g.digraph(), KernelMode::Compatible).ok());

  CHECK_THROWS_AS(MarkovKernel::from_dense(make_pattern(g), off), Error);
}

TEST_CASE("stationary law of the toy kernel") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  for (StationaryMethod m : {StationaryMethod::DenseSolve, StationaryMethod::PowerCesaro}) {
    StationaryOptions o;
    o.method = m;
    CHECK((stationary(p, o).pi - toy::pi()).cwiseAbs().maxCoeff() < 1e-10);
  }
  const RoadNetwork two = toy::from_pairs({{1, 2}, {2, 1}});
  Eigen::MatrixXd u(2, 2);
  u << .5, .5, .5, .5;
  const Eigen::VectorXd pi2 = stationary(MarkovKernel::from_dense(make_pattern(two), u)).pi;
  CHECK(pi2(0) == Approx(0.5));
  CHECK(pi2(1) == Approx(0.5));
}

TEST_CASE("periodic chains still have a Cesaro limit") {
  const RoadNetwork cyc = toy::from_pairs({{1, 2}, {2, 3}, {3, 1}});
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
  StationaryOptions o;
  o.method = StationaryMethod::PowerCesaro;
  const Eigen::VectorXd pi = stationary(MarkovKernel::from_dense(make_pattern(cyc), p), o).pi;
  CHECK((pi.array() - 1.0 / 3).abs().maxCoeff() < 1e-10);
}

TEST_CASE("reducible kernels") {
  const RoadNetwork g = toy::network();
  Eigen::MatrixXd p = toy::fig3_dense();
  p(4, 4) = 1.0;
  p(4, 1) = 0.0;
  const MarkovKernel k = MarkovKernel::from_dense(make_pattern(g), p);
  CHECK_THROWS_AS(stationary(k), Error);
  const StationaryDistribution s = stationary_with_fallback(k, toy::pi());
  CHECK(s.pi(4) == Approx(1.0));
}

TEST_CASE("two-dimensional stationary law") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  const TwoDimStationary q = q_from_p(p, toy::pi());
  CHECK(q(0, 1) == Approx(1.0 / 14));
  CHECK(q(3, 3) == Approx(1.0 / 7));
  CHECK(q(1, 0) == Approx(1.0 / 14));
  CHECK((q.row_marginal() - q.column_marginal()).cwiseAbs().maxCoeff() < 1e-15);

  const KernelAndStationary back = p_from_q(q);
  CHECK((back.kernel.dense() - toy::fig3_dense()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.pi - toy::pi()).cwiseAbs().maxCoeff() < 1e-12);

  const RoadNetwork two = toy::from_pairs({{1, 2}, {2, 1}});
  Eigen::MatrixXd u(2, 2);
  u << .5, .5, .5, .5;
  const MarkovKernel ku = MarkovKernel::from_dense(make_pattern(two), u);
  const TwoDimStationary qu = q_from_p(ku, stationary(ku).pi);
  for (double x : qu.q) CHECK(x == Approx(0.25));
  CHECK((p_from_q(qu).kernel.dense() - u).norm() < 1e-15);
}

TEST_CASE("affine combination") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p1 = toy::fig3(g);
  Eigen::MatrixXd d2 = toy::fig3_dense();
  d2.row(1) << 0.1, 0.6, 0.2, 0.1, 0;
  const MarkovKernel p2 = MarkovKernel::from_dense(make_pattern(g), d2);
  const TwoDimStationary q1 = q_from_p(p1, stationary(p1).pi);
  const TwoDimStationary q2 = q_from_p(p2, stationary(p2).pi);
  CHECK(affine_combine(q1, q2, 1.0).q == q1.q);
  CHECK(affine_combine(q1, q2, 0.0).q == q2.q);
  const TwoDimStationary mid = affine_combine(q1, q2, 0.5);
  CHECK((mid.marginal - 0.5 * (q1.marginal + q2.marginal)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((mid.row_marginal() - mid.column_marginal()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("edge kernel on the minimal line digraph") {
  const RoadNetwork g = toy::network();
  LineDigraph line = minimal_line_digraph(g);
  const PatternPtr pattern = make_pattern(line);
  std::vector<double> values(pattern->size(), 0.0);
  auto set = [&](Edge a, Edge b, double v) { values[*pattern->position(*line.find_vertex(a), *line.find_vertex(b))] = v; };
  set(ext(g, 1, 2), ext(g, 1, 2), .5);
  set(ext(g, 1, 2), ext(g, 2, 3), .25);
  set(ext(g, 1, 2), ext(g, 2, 4), .25);
  set(ext(g, 2, 3), ext(g, 2, 3), .5);
  set(ext(g, 2, 3), ext(g, 3, 4), .5);
  set(ext(g, 3, 4), ext(g, 3, 4), .5);
  set(ext(g, 3, 4), ext(g, 4, 2), .25);
  set(ext(g, 3, 4), ext(g, 4, 5), .25);
  set(ext(g, 4, 2), ext(g, 2, 3), .25);
  set(ext(g, 4, 2), ext(g, 4, 2), .5);
  set(ext(g, 4, 2), ext(g, 2, 1), .25);
  set(ext(g, 2, 1), ext(g, 1, 2), .5);
  set(ext(g, 2, 1), ext(g, 2, 1), .5);
  set(ext(g, 2, 4), ext(g, 2, 4), .5);
  set(ext(g, 2, 4), ext(g, 4, 5), .5);
  set(ext(g, 4, 5), ext(g, 4, 5), .5);
  set(ext(g, 4, 5), ext(g, 5, 2), .5);
  set(ext(g, 5, 2), ext(g, 2, 3), .25);
  set(ext(g, 5, 2), ext(g, 2, 1), .125);
  set(ext(g, 5, 2), ext(g, 2, 4), .125);
  set(ext(g, 5, 2), ext(g, 5, 2), .5);
  const EdgeMarkovKernel ek = make_edge_kernel(line, values);
  const Eigen::VectorXd pi = stationary(ek.kernel).pi;
  CHECK(pi(*line.find_vertex(ext(g, 1, 2))) == Approx(1.0 / 12).epsilon(1e-10));
  CHECK(pi(*line.find_vertex(ext(g, 2, 3))) == Approx(1.0 / 6).epsilon(1e-10));

  values[*pattern->position(*line.find_vertex(ext(g, 5, 2)), *line.find_vertex(ext(g, 5, 2)))] = 0.6;
  CHECK_THROWS_AS(make_edge_kernel(line, values), Error);
}

TEST_CASE("kernel files") {
  const RoadNetwork g = toy::network();
  const MarkovKernel p = toy::fig3(g);
  std::ostringstream out;
  write_kernel(out, p, g);
  std::istringstream in(out.str());
  const KernelFile back = read_kernel(in, g);
  CHECK(back.defaulted_rows.empty());
  CHECK((back.kernel.dense() - p.dense()).norm() == 0.0);

  std::istringstream partial("1 2 1\n");
  const KernelFile filled = read_kernel(partial, g);
  CHECK(filled.defaulted_rows.size() == 4);
  CHECK(filled.kernel(0, 1) == 1.0);
}
