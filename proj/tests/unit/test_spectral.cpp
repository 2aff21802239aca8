#include <cmath>

#include "doctest.h"
#include "mtraffic/error.hpp"
#include "mtraffic/spectral.hpp"
#include "toy.hpp"

using namespace mtraffic;
using doctest::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Eigen::VectorXd zero_sum(Eigen::VectorXd v) {
  v.array() -= v.mean();
  return v;
}

}  // namespace

TEST_CASE("toy laplacians") {
  const LaplacianPair lp = laplacians(toy::network());
  const Eigen::VectorXd row2 = vec({-2, 6, -1, -2, -1});
  CHECK((lp.laplacian.row(1).transpose() - row2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lp.normalized(0, 1) == Approx(-0.577).epsilon(1e-3));
  CHECK((lp.laplacian - lp.laplacian.transpose()).norm() == 0.0);

  const LaplacianPair two = laplacians(toy::from_pairs({{1, 2}, {2, 1}}));
  Eigen::Matrix2d expected;
  expected << 2, -2, -2, 2;
  CHECK((two.laplacian - expected).norm() == 0.0);
}

TEST_CASE("eigenvalues") {
  const LaplacianPair lp = laplacians(toy::network());
  const auto l = eigendecompose(lp.laplacian).eigenvalues;
  const auto lt = eigendecompose(lp.normalized).eigenvalues;
  const Eigen::VectorXd el = vec({0, 1.72, 2, 4.46, 7.82});
  const Eigen::VectorXd elt = vec({0, 0.77, 1, 1.5, 1.73});
  CHECK((l - el).cwiseAbs().maxCoeff() < 1e-2);
  CHECK((lt - elt).cwiseAbs().maxCoeff() < 1e-2);
  CHECK((eigendecompose(Eigen::MatrixXd::Identity(4, 4)).eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("subspace inverse") {
  const LaplacianPair lp = laplacians(toy::network());
  const SpectralDecomposition d = eigendecompose(lp.laplacian);
  const Eigen::VectorXd lambda = zero_sum(subspace_inverse_apply(d, vec({-200, 0, 250, -100, 50})));
  const Eigen::VectorXd expected = zero_sum(vec({-116.66, -16.66, 116.66, 0, 16.66}));
  CHECK((lambda - expected).cwiseAbs().maxCoeff() < 1e-2);
  CHECK(subspace_inverse_apply(d, Eigen::VectorXd::Zero(5)).norm() == 0.0);
  const Eigen::VectorXd a2 = d.eigenvectors.col(1);
  CHECK((subspace_inverse_apply(d, d.eigenvalues(1) * a2) - a2).norm() < 1e-12);
  try {
    subspace_inverse_apply(d, Eigen::VectorXd::Ones(5));
    FAIL("expected NotInSubspace");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotInSubspace);
  }
}

TEST_CASE("lagrange solvers agree on the toy example") {
  const RoadNetwork g = toy::network();
  const Eigen::VectorXd b = vec({-200, 0, 250, -100, 50});
  const Eigen::VectorXd expected = zero_sum(vec({-116.66, -16.66, 116.66, 0, 16.66}));
  for (LagrangeMethod m : {LagrangeMethod::Dense, LagrangeMethod::FixedPoint, LagrangeMethod::Auto}) {
    LagrangeOptions o;
    o.method = m;
    const LagrangeVector v = lagrange_solve(g, b, o);
    CHECK((zero_sum(v.lambda) - expected).cwiseAbs().maxCoeff() < 1e-2);
    CHECK(v.residual < 1e-6);
  }
  CHECK(lagrange_solve(g, Eigen::VectorXd::Zero(5)).lambda.norm() == 0.0);
}

TEST_CASE("fixed-point convergence rate is bounded by kappa") {
  const RoadNetwork g = toy::network();
  const Eigen::VectorXd b = vec({-200, 0, 250, -100, 50});
  const double kappa = contraction_rate(eigendecompose(laplacians(g).normalized));
  LagrangeOptions loose;
  loose.method = LagrangeMethod::FixedPoint;
  loose.tol = 1e-3;
  LagrangeOptions tight = loose;
  tight.tol = 1e-9;
  const auto it_loose = lagrange_solve(g, b, loose).iterations;
  const auto it_tight = lagrange_solve(g, b, tight).iterations;
  // Six more decimal digits take at most log(1e-6)/log(kappa) extra sweeps, plus slack.
  CHECK(static_cast<double>(it_tight - it_loose) <= std::log(1e-6) / std::log(kappa) + 5.0);
}

TEST_CASE("contraction rate") {
  CHECK(contraction_rate(eigendecompose(laplacians(toy::network()).normalized)) == Approx(0.73).epsilon(0.015));
  const RoadNetwork k3 = toy::from_pairs({{1, 2}, {2, 1}, {2, 3}, {3, 2}, {1, 3}, {3, 1}});
  CHECK(contraction_rate(eigendecompose(laplacians(k3).normalized)) == Approx(0.5));
}

TEST_CASE("bipartite detection") {
  CHECK_FALSE(underlying_bipartite(toy::network()));
  CHECK(underlying_bipartite(toy::from_pairs({{1, 2}, {2, 3}, {3, 4}, {4, 1}})));
}
