#include "mtraffic/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "json.hpp"
#include "mtraffic/error.hpp"

namespace mtraffic {

namespace {

Eigen::VectorXd total_degree(const RoadNetwork& g) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(g.vertex_count()));
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    d(v) = static_cast<double>(g.in_degree(v) + g.out_degree(v));
  }
  return d;
}

Eigen::VectorXd checked_inv_sqrt(const RoadNetwork& g, const Eigen::VectorXd& d) {
  Eigen::VectorXd out(d.size());
  for (Eigen::Index v = 0; v < d.size(); ++v) {
    if (d(v) == 0.0) {
      throw Error(ErrorCode::IsolatedVertex,
                  std::to_string(g.external_id(static_cast<VertexId>(v))));
    }
    out(v) = 1.0 / std::sqrt(d(v));
  }
  return out;
}

}  // namespace

Eigen::MatrixXd laplacian(const RoadNetwork& g) {
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : g.edges()) {
    l(e.from, e.to) -= 1.0;
    l(e.to, e.from) -= 1.0;
    l(e.from, e.from) += 1.0;
    l(e.to, e.to) += 1.0;
  }
  return l;
}

LaplacianPair laplacians(const RoadNetwork& g) {
  LaplacianPair p;
  p.degree = total_degree(g);
  const Eigen::VectorXd s = checked_inv_sqrt(g, p.degree);
  p.laplacian = laplacian(g);
  p.normalized = s.asDiagonal() * p.laplacian * s.asDiagonal();
  return p;
}

Eigen::SparseMatrix<double> normalized_adjacency(const RoadNetwork& g) {
  const Eigen::VectorXd s = checked_inv_sqrt(g, total_degree(g));
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * g.edge_count());
  for (const Edge& e : g.edges()) {
    const double w = s(e.from) * s(e.to);
    triplets.emplace_back(e.from, e.to, w);
    triplets.emplace_back(e.to, e.from, w);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());  // a 2-cycle sums to weight 2
  return a;
}

SpectralDecomposition eigendecompose(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorCode::NotSymmetric, "asymmetry exceeds 1e-10");
  }
  SpectralDecomposition out;
  if (m.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "symmetric eigensolver failed");
  }
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < out.eigenvectors.cols(); ++j) {
    Eigen::Index arg = 0;
    out.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.eigenvectors(arg, j) < 0) out.eigenvectors.col(j) *= -1.0;
  }
  return out;
}

Eigen::VectorXd subspace_inverse_apply(const SpectralDecomposition& decomp, const Eigen::VectorXd& b,
                                       std::optional<std::size_t> rank) {
  const Eigen::Index n = decomp.eigenvalues.size();
  if (b.size() != n) throw Error(ErrorCode::SizeMismatch, "vector length differs from matrix order");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n == 0) return x;
  const double scale = std::max(1.0, decomp.eigenvalues.cwiseAbs().maxCoeff());
  const double zero_tol = 1e-9 * scale;
  const double b_scale = std::max(1.0, b.cwiseAbs().maxCoeff());

  std::size_t used = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double tau = decomp.eigenvalues(j);
    const double coeff = decomp.eigenvectors.col(j).dot(b);
    if (std::abs(tau) <= zero_tol) {
      if (std::abs(coeff) > 1e-9 * b_scale * std::sqrt(static_cast<double>(n))) {
        throw Error(ErrorCode::NotInSubspace, "right-hand side has a null-space component");
      }
      continue;
    }
    if (rank && used >= *rank) continue;
    x += (coeff / tau) * decomp.eigenvectors.col(j);
    ++used;
  }
  return x;
}

double contraction_rate(const SpectralDecomposition& decomp_tilde) {
  const Eigen::Index n = decomp_tilde.eigenvalues.size();
  if (n < 3) throw Error(ErrorCode::DegenerateGraph, "contraction rate needs at least 3 vertices");
  return std::max(std::abs(1.0 - decomp_tilde.eigenvalues(1)),
                  std::abs(1.0 - decomp_tilde.eigenvalues(n - 1)));
}

std::string decomposition_to_json(const SpectralDecomposition& decomp) {
  nlohmann::ordered_json out;
  out["eigenvalues"] = std::vector<double>(decomp.eigenvalues.data(),
                                           decomp.eigenvalues.data() + decomp.eigenvalues.size());
  auto vectors = nlohmann::json::array();
  for (Eigen::Index j = 0; j < decomp.eigenvectors.cols(); ++j) {
    Eigen::VectorXd col = decomp.eigenvectors.col(j);
    vectors.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  out["eigenvectors"] = std::move(vectors);
  return out.dump(2);
}

std::string_view to_string(LagrangeMethod m) noexcept {
  switch (m) {
    case LagrangeMethod::Auto: return "auto";
    case LagrangeMethod::Dense: return "dense";
    case LagrangeMethod::FixedPoint: return "fixed-point";
  }
  return "unknown";
}

bool underlying_bipartite(const RoadNetwork& g) {
  const std::size_t n = g.vertex_count();
  std::vector<int> colour(n, -1);
  std::queue<VertexId> queue;
  for (VertexId root = 0; root < n; ++root) {
    if (colour[root] >= 0) continue;
    colour[root] = 0;
    queue.push(root);
    while (!queue.empty()) {
      VertexId u = queue.front();
      queue.pop();
      auto visit = [&](VertexId w) {
        if (colour[w] < 0) {
          colour[w] = 1 - colour[u];
          queue.push(w);
          return true;
        }
        return colour[w] != colour[u];
      };
      for (VertexId w : g.out_neighbors(u)) {
        if (!visit(w)) return false;
      }
      for (VertexId w : g.in_neighbors(u)) {
        if (!visit(w)) return false;
      }
    }
  }
  return true;
}

LagrangeSolver::LagrangeSolver(const RoadNetwork& g, LagrangeOptions options)
    : options_(options), method_(options.method), damping_(options.damping) {
  if (!(options_.damping >= 0.0 && options_.damping < 1.0)) {
    throw Error(ErrorCode::InvalidInput, "damping must lie in [0, 1)");
  }
  if (method_ == LagrangeMethod::Auto) {
    if (g.vertex_count() <= options_.dense_limit) {
      method_ = LagrangeMethod::Dense;
    } else {
      method_ = LagrangeMethod::FixedPoint;
      if (damping_ == 0.0 && underlying_bipartite(g)) damping_ = 0.5;
    }
  }
  laplacian_ = laplacian(g);
  if (method_ == LagrangeMethod::Dense) {
    decomp_ = eigendecompose(laplacian_);
  } else {
    adjacency_tilde_ = normalized_adjacency(g);
    inv_sqrt_degree_ = checked_inv_sqrt(g, total_degree(g));
  }
}

LagrangeVector LagrangeSolver::solve(const Eigen::VectorXd& s_minus_e) const {
  if (s_minus_e.size() != laplacian_.rows()) {
    throw Error(ErrorCode::SizeMismatch, "s - e length differs from vertex count");
  }
  const double total = s_minus_e.sum();
  if (std::abs(total) > 1e-9 * std::max(1.0, s_minus_e.cwiseAbs().sum())) {
    throw Error(ErrorCode::Unbalanced, "entries of s - e sum to " + std::to_string(total));
  }
  LagrangeVector out =
      method_ == LagrangeMethod::Dense ? solve_dense(s_minus_e) : solve_fixed_point(s_minus_e);
  if (out.lambda.size() > 0) {
    out.lambda.array() -= out.lambda.mean();
  }
  out.residual = (laplacian_ * out.lambda - s_minus_e).norm();
  return out;
}

LagrangeVector LagrangeSolver::solve_dense(const Eigen::VectorXd& b) const {
  LagrangeVector out;
  out.method = LagrangeMethod::Dense;
  out.lambda = subspace_inverse_apply(decomp_, b, options_.rank);
  return out;
}

LagrangeVector LagrangeSolver::solve_fixed_point(const Eigen::VectorXd& b) const {
  LagrangeVector out;
  out.method = LagrangeMethod::FixedPoint;
  const Eigen::VectorXd c = inv_sqrt_degree_.cwiseProduct(b);
  // Kernel direction of the normalized Laplacian: D^{1/2} 1, normalized.
  Eigen::VectorXd kernel = inv_sqrt_degree_.cwiseInverse();
  kernel /= kernel.norm();

  const double keep = damping_;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd next(b.size());
  double change = 0.0;
  for (std::size_t it = 1; it <= options_.max_iter; ++it) {
    next.noalias() = adjacency_tilde_ * x;
    next += c;
    if (keep > 0.0) next = keep * x + (1.0 - keep) * next;
    next -= kernel.dot(next) * kernel;
    change = (next - x).cwiseAbs().maxCoeff();
    x.swap(next);
    if (change < options_.tol) {
      out.iterations = it;
      out.lambda = inv_sqrt_degree_.cwiseProduct(x);
      return out;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "fixed-point iteration: last change " + std::to_string(change) + " after " +
                  std::to_string(options_.max_iter) + " iterations");
}

LagrangeVector lagrange_solve(const RoadNetwork& g, const Eigen::VectorXd& s_minus_e,
                              const LagrangeOptions& options) {
  return LagrangeSolver(g, options).solve(s_minus_e);
}

}  // namespace mtraffic
