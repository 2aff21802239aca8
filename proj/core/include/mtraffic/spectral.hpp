#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mtraffic/road_graph.hpp"

namespace mtraffic {

/// L = D - A - A^T and its normalized form D^{-1/2} L D^{-1/2}.
struct LaplacianPair {
  Eigen::MatrixXd laplacian;
  Eigen::MatrixXd normalized;
  Eigen::VectorXd degree;  // d_v = deg+(v) + deg-(v)
};

/// Throws IsolatedVertex when some vertex has no incident edge.
LaplacianPair laplacians(const RoadNetwork& g);

/// Unnormalized Laplacian only; isolated vertices are allowed.
Eigen::MatrixXd laplacian(const RoadNetwork& g);

/// D^{-1/2}(A + A^T)D^{-1/2} in sparse form. Throws IsolatedVertex.
Eigen::SparseMatrix<double> normalized_adjacency(const RoadNetwork& g);

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns; largest-magnitude entry of each is positive
};

/// Throws NotSymmetric if |m - m^T| exceeds 1e-10 anywhere.
SpectralDecomposition eigendecompose(const Eigen::MatrixXd& m);

/// Applies the inverse of the matrix restricted to the complement of its null space.
///
/// `rank`, when set, keeps only that many of the smallest non-zero eigenpairs.
/// Throws NotInSubspace when b has a component in the null space.
Eigen::VectorXd subspace_inverse_apply(const SpectralDecomposition& decomp, const Eigen::VectorXd& b,
                                       std::optional<std::size_t> rank = std::nullopt);

/// max{|1 - t_2|, |1 - t_n|} for the spectrum of the normalized Laplacian.
/// Throws DegenerateGraph for fewer than three vertices.
double contraction_rate(const SpectralDecomposition& decomp_tilde);

std::string decomposition_to_json(const SpectralDecomposition& decomp);

enum class LagrangeMethod { Auto, Dense, FixedPoint };

std::string_view to_string(LagrangeMethod m) noexcept;

struct LagrangeOptions {
  LagrangeMethod method = LagrangeMethod::Auto;
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  /// Auto picks Dense up to this many vertices.
  std::size_t dense_limit = 2000;
  std::optional<std::size_t> rank;
  /// Weight kept on the previous iterate in the fixed-point update, in [0, 1).
  /// Zero is the plain iteration. Auto switches to 0.5 when the undirected
  /// underlying graph is bipartite, where the plain iteration oscillates.
  double damping = 0.0;
};

struct LagrangeVector {
  Eigen::VectorXd lambda;
  double residual = 0.0;  // ||L lambda - (s - e)||_2
  LagrangeMethod method = LagrangeMethod::Dense;
  std::size_t iterations = 0;
};

/// Solves L lambda = s - e with 1^T lambda = 0, reusing per-graph work across calls.
class LagrangeSolver {
 public:
  explicit LagrangeSolver(const RoadNetwork& g, LagrangeOptions options = {});

  /// Throws Unbalanced, NoConvergence, SizeMismatch.
  [[nodiscard]] LagrangeVector solve(const Eigen::VectorXd& s_minus_e) const;

  [[nodiscard]] LagrangeMethod method() const noexcept { return method_; }

 private:
  LagrangeVector solve_dense(const Eigen::VectorXd& b) const;
  LagrangeVector solve_fixed_point(const Eigen::VectorXd& b) const;

  LagrangeOptions options_;
  LagrangeMethod method_;
  double damping_ = 0.0;
  Eigen::MatrixXd laplacian_;
  SpectralDecomposition decomp_;
  Eigen::SparseMatrix<double> adjacency_tilde_;
  Eigen::VectorXd inv_sqrt_degree_;
};

LagrangeVector lagrange_solve(const RoadNetwork& g, const Eigen::VectorXd& s_minus_e,
                              const LagrangeOptions& options = {});

/// True when the graph with edge directions ignored is bipartite.
bool underlying_bipartite(const RoadNetwork& g);

}  // namespace mtraffic
