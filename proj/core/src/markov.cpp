#include "mtraffic/markov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/LU>

#include "mtraffic/error.hpp"

namespace mtraffic {

TransitionPattern::TransitionPattern(const Digraph& g) {
  const std::size_t n = g.vertex_count();
  offsets_.assign(n + 1, 0);
  diagonal_.resize(n);
  columns_.reserve(g.arc_count() + n);
  rows_.reserve(g.arc_count() + n);
  for (StateId u = 0; u < n; ++u) {
    bool placed = false;
    for (StateId v : g.successors(u)) {
      if (!placed && u < v) {
        diagonal_[u] = columns_.size();
        columns_.push_back(u);
        rows_.push_back(u);
        placed = true;
      }
      columns_.push_back(v);
      rows_.push_back(u);
    }
    if (!placed) {
      diagonal_[u] = columns_.size();
      columns_.push_back(u);
      rows_.push_back(u);
    }
    offsets_[u + 1] = columns_.size();
  }
}

std::optional<std::size_t> TransitionPattern::position(StateId u, StateId v) const {
  if (u >= state_count() || v >= state_count()) return std::nullopt;
  auto cols = columns(u);
  auto it = std::lower_bound(cols.begin(), cols.end(), v);
  if (it == cols.end() || *it != v) return std::nullopt;
  return offsets_[u] + static_cast<std::size_t>(it - cols.begin());
}

PatternPtr make_pattern(const Digraph& g) { return std::make_shared<const TransitionPattern>(g); }

void flush_tiny(std::span<double> values) noexcept {
  for (double& x : values) {
    if (std::abs(x) < 1e-15) x = 0.0;
  }
}

MarkovKernel::MarkovKernel(PatternPtr pattern, std::vector<double> values, double row_tol)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
  if (!pattern_) throw Error(ErrorCode::InvalidKernel, "kernel without a pattern");
  if (values_.size() != pattern_->size()) {
    throw Error(ErrorCode::SizeMismatch, "kernel values do not match the support size");
  }
  for (StateId u = 0; u < pattern_->state_count(); ++u) {
    double sum = 0.0;
    for (std::size_t k = pattern_->row_begin(u); k < pattern_->row_end(u); ++k) {
      if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
        throw Error(ErrorCode::InvalidKernel, "row " + std::to_string(u) + " has entry " +
                                                  std::to_string(values_[k]));
      }
      sum += values_[k];
    }
    if (std::abs(sum - 1.0) > row_tol) {
      throw Error(ErrorCode::InvalidKernel,
                  "row " + std::to_string(u) + " sums to " + std::to_string(sum));
    }
    for (std::size_t k = pattern_->row_begin(u); k < pattern_->row_end(u); ++k) values_[k] /= sum;
  }
  flush_tiny(values_);
}

MarkovKernel MarkovKernel::from_dense(PatternPtr pattern, const Eigen::MatrixXd& p, double row_tol) {
  const auto n = static_cast<Eigen::Index>(pattern->state_count());
  if (p.rows() != n || p.cols() != n) throw Error(ErrorCode::SizeMismatch, "kernel matrix order");
  std::vector<double> values(pattern->size());
  for (StateId u = 0; u < n; ++u) {
    for (StateId v = 0; v < n; ++v) {
      const double x = p(u, v);
      if (auto pos = pattern->position(u, v)) {
        values[*pos] = x;
      } else if (x != 0.0) {
        throw Error(ErrorCode::InvalidKernel,
                    "mass off the support at (" + std::to_string(u) + "," + std::to_string(v) + ")");
      }
    }
  }
  return {std::move(pattern), std::move(values), row_tol};
}

double MarkovKernel::operator()(StateId u, StateId v) const {
  auto pos = pattern_->position(u, v);
  return pos ? values_[*pos] : 0.0;
}

Eigen::MatrixXd MarkovKernel::dense() const {
  const auto n = static_cast<Eigen::Index>(state_count());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < values_.size(); ++k) p(pattern_->row(k), pattern_->column(k)) = values_[k];
  return p;
}

Eigen::VectorXd MarkovKernel::left_multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (StateId u = 0; u < state_count(); ++u) {
    const double xu = x(u);
    if (xu == 0.0) continue;
    for (std::size_t k = pattern_->row_begin(u); k < pattern_->row_end(u); ++k) {
      y(pattern_->column(k)) += xu * values_[k];
    }
  }
  return y;
}

Digraph MarkovKernel::positive_support() const {
  std::vector<std::pair<StateId, StateId>> arcs;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (values_[k] > 0.0 && pattern_->row(k) != pattern_->column(k)) {
      arcs.emplace_back(pattern_->row(k), pattern_->column(k));
    }
  }
  return Digraph::from_arcs(state_count(), std::move(arcs));
}

KernelDiagnostics validate_kernel(const Eigen::MatrixXd& p, const Digraph& g, KernelMode mode,
                                  double row_tol) {
  KernelDiagnostics d;
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  if (p.rows() != n || p.cols() != n) {
    d.row_sum_violations.push_back({0, std::nan("")});
    return d;
  }
  for (StateId u = 0; u < n; ++u) {
    const double sum = p.row(u).sum();
    if (!(std::abs(sum - 1.0) <= row_tol)) d.row_sum_violations.push_back({u, sum});
    for (StateId v = 0; v < n; ++v) {
      const double x = p(u, v);
      if (x < 0.0) d.negative.push_back({u, v, x});
      const bool on_support = u == v || g.has_arc(u, v);
      if (!on_support && x != 0.0) d.off_support.push_back({u, v, x});
      if (mode == KernelMode::Compatible && u != v && g.has_arc(u, v) && x == 0.0) {
        d.zero_on_edge.push_back({u, v, x});
      }
    }
  }
  return d;
}

EdgeMarkovKernel make_edge_kernel(LineDigraph line, std::vector<double> values, double row_tol) {
  MarkovKernel kernel(make_pattern(line), std::move(values), row_tol);
  if (auto z = line.ideal_vertex()) {
    const TransitionPattern& pat = kernel.pattern();
    for (std::size_t k = 0; k < pat.size(); ++k) {
      const double x = kernel.values()[k];
      if (x == 0.0) continue;
      const Edge& e = line.vertex(pat.row(k));
      const Edge& f = line.vertex(pat.column(k));
      std::string what;
      if (pat.row(k) == pat.column(k) && (e.from == *z || e.to == *z)) {
        what = "waiting on an edge at the ideal vertex";
      } else if (pat.row(k) != pat.column(k) && e.from == f.to && (e.to == *z || e.from == *z)) {
        what = "reversal through the ideal vertex";
      }
      if (!what.empty()) {
        throw Error(ErrorCode::InvalidKernel, what + " has probability " + std::to_string(x));
      }
    }
  }
  return {std::move(line), std::move(kernel)};
}

std::string_view to_string(StationaryMethod m) noexcept {
  switch (m) {
    case StationaryMethod::Auto: return "auto";
    case StationaryMethod::PowerCesaro: return "power-cesaro";
    case StationaryMethod::DenseSolve: return "dense-solve";
  }
  return "unknown";
}

namespace {

double balance_residual(const MarkovKernel& p, const Eigen::VectorXd& pi) {
  return (p.left_multiply(pi) - pi).lpNorm<1>();
}

Eigen::VectorXd dense_solve(const MarkovKernel& p) {
  const auto n = static_cast<Eigen::Index>(p.state_count());
  Eigen::MatrixXd a = p.dense().transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi = a.partialPivLu().solve(rhs);
  return pi;
}

StationaryDistribution power_cesaro(const MarkovKernel& p, const StationaryOptions& options,
                                    std::size_t period_len) {
  const auto n = static_cast<Eigen::Index>(p.state_count());
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd sum = x;
  Eigen::VectorXd average = x;
  // Ring of the last `period_len` iterates; their mean converges geometrically
  // even for periodic chains.
  std::vector<Eigen::VectorXd> window(period_len, x);
  Eigen::VectorXd window_sum = x * static_cast<double>(period_len);
  Eigen::VectorXd window_mean = x;

  StationaryDistribution out;
  out.method = StationaryMethod::PowerCesaro;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    x = p.left_multiply(x);
    sum += x;
    Eigen::VectorXd next_average = sum / static_cast<double>(it + 1);
    const double avg_change = (next_average - average).lpNorm<1>();
    average.swap(next_average);

    Eigen::VectorXd& slot = window[it % period_len];
    window_sum += x - slot;
    slot = x;
    Eigen::VectorXd next_window = window_sum / static_cast<double>(period_len);
    const double window_change = (next_window - window_mean).lpNorm<1>();
    window_mean.swap(next_window);

    if (it >= period_len && window_change < options.tol) {
      out.pi = window_mean;
      out.iterations = it;
      return out;
    }
    if (avg_change < options.tol) {
      out.pi = average;
      out.iterations = it;
      return out;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "power iteration did not settle within " + std::to_string(options.max_iter) + " steps");
}

StationaryDistribution solve_irreducible(const MarkovKernel& p, const StationaryOptions& options,
                                         const Digraph& support) {
  StationaryMethod method = options.method;
  if (method == StationaryMethod::Auto) {
    method = p.state_count() <= options.dense_limit ? StationaryMethod::DenseSolve
                                                    : StationaryMethod::PowerCesaro;
  }
  StationaryDistribution out;
  if (p.state_count() == 1) {
    out.pi = Eigen::VectorXd::Ones(1);
    out.method = method;
    return out;
  }
  if (method == StationaryMethod::DenseSolve) {
    out.pi = dense_solve(p);
    out.method = method;
  } else {
    out = power_cesaro(p, options, period(support));
  }
  flush_tiny({out.pi.data(), static_cast<std::size_t>(out.pi.size())});
  out.pi /= out.pi.sum();
  out.residual = balance_residual(p, out.pi);
  return out;
}

}  // namespace

StationaryDistribution stationary(const MarkovKernel& p, const StationaryOptions& options) {
  if (p.state_count() == 0) throw Error(ErrorCode::InvalidInput, "empty kernel");
  const Digraph support = p.positive_support();
  if (!is_strongly_connected(support)) {
    throw Error(ErrorCode::NotStronglyConnected, "kernel support is not strongly connected");
  }
  return solve_irreducible(p, options, support);
}

StationaryDistribution stationary_with_fallback(const MarkovKernel& p, const Eigen::VectorXd& initial,
                                                const StationaryOptions& options) {
  if (p.state_count() == 0) throw Error(ErrorCode::InvalidInput, "empty kernel");
  const Digraph support = p.positive_support();
  const SccResult scc = strongly_connected_components(support);
  if (scc.count == 1) return solve_irreducible(p, options, support);

  const std::size_t n = p.state_count();
  std::vector<char> closed(scc.count, 1);
  for (const auto& [u, v] : support.arcs()) {
    if (scc.component[u] != scc.component[v]) closed[scc.component[u]] = 0;
  }

  std::vector<std::uint32_t> classes;
  for (std::uint32_t c = 0; c < scc.count; ++c) {
    if (closed[c]) classes.push_back(c);
  }

  // Stationary law of each closed class, embedded in the full state space.
  std::vector<Eigen::VectorXd> per_class;
  for (std::uint32_t c : classes) {
    std::vector<StateId> members;
    std::vector<StateId> local(n, 0);
    for (StateId v = 0; v < n; ++v) {
      if (scc.component[v] == c) {
        local[v] = static_cast<StateId>(members.size());
        members.push_back(v);
      }
    }
    std::vector<std::pair<StateId, StateId>> arcs;
    for (StateId v : members) {
      for (StateId w : support.successors(v)) arcs.emplace_back(local[v], local[w]);
    }
    Digraph sub = Digraph::from_arcs(members.size(), arcs);
    PatternPtr pattern = make_pattern(sub);
    std::vector<double> values(pattern->size(), 0.0);
    for (StateId v : members) {
      for (std::size_t k = p.pattern().row_begin(v); k < p.pattern().row_end(v); ++k) {
        const StateId w = p.pattern().column(k);
        if (p.values()[k] > 0.0) values[*pattern->position(local[v], local[w])] = p.values()[k];
      }
    }
    MarkovKernel restricted(pattern, std::move(values), 1e-9);
    StationaryDistribution part = solve_irreducible(restricted, options, sub);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < members.size(); ++i) full(members[i]) = part.pi(static_cast<Eigen::Index>(i));
    per_class.push_back(std::move(full));
  }

  std::vector<double> weights(classes.size(), 0.0);
  if (classes.size() == 1) {
    weights[0] = 1.0;
  } else {
    Eigen::VectorXd x = initial;
    if (x.size() != static_cast<Eigen::Index>(n) || !(x.sum() > 0.0)) {
      x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    }
    x /= x.sum();
    std::vector<char> in_closed(n, 0);
    for (StateId v = 0; v < n; ++v) in_closed[v] = closed[scc.component[v]];
    for (std::size_t it = 0; it < options.max_iter; ++it) {
      double transient = 0.0;
      for (StateId v = 0; v < n; ++v) {
        if (!in_closed[v]) transient += x(v);
      }
      if (transient < 1e-14) break;
      x = p.left_multiply(x);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      for (StateId v = 0; v < n; ++v) {
        if (scc.component[v] == classes[i]) weights[i] += x(v);
      }
      total += weights[i];
    }
    for (double& w : weights) w /= total;
  }

  StationaryDistribution out;
  out.pi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < classes.size(); ++i) out.pi += weights[i] * per_class[i];
  flush_tiny({out.pi.data(), n});
  out.pi /= out.pi.sum();
  out.residual = balance_residual(p, out.pi);
  out.method = options.method == StationaryMethod::Auto ? StationaryMethod::DenseSolve : options.method;
  out.reducible = true;
  out.closed_classes = classes.size();
  return out;
}

double TwoDimStationary::operator()(StateId u, StateId v) const {
  auto pos = pattern->position(u, v);
  return pos ? q[*pos] : 0.0;
}

Eigen::MatrixXd TwoDimStationary::dense() const {
  const auto n = static_cast<Eigen::Index>(pattern->state_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < q.size(); ++k) m(pattern->row(k), pattern->column(k)) = q[k];
  return m;
}

Eigen::VectorXd TwoDimStationary::row_marginal() const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pattern->state_count()));
  for (std::size_t k = 0; k < q.size(); ++k) r(pattern->row(k)) += q[k];
  return r;
}

Eigen::VectorXd TwoDimStationary::column_marginal() const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pattern->state_count()));
  for (std::size_t k = 0; k < q.size(); ++k) c(pattern->column(k)) += q[k];
  return c;
}

TwoDimStationary q_from_p(const MarkovKernel& p, const Eigen::VectorXd& pi) {
  if (pi.size() != static_cast<Eigen::Index>(p.state_count())) {
    throw Error(ErrorCode::SizeMismatch, "pi length differs from state count");
  }
  TwoDimStationary out;
  out.pattern = p.pattern_ptr();
  out.q.resize(p.values().size());
  for (std::size_t k = 0; k < out.q.size(); ++k) out.q[k] = pi(p.pattern().row(k)) * p.values()[k];
  flush_tiny(out.q);
  out.marginal = pi;
  const double gap = (out.column_marginal() - pi).cwiseAbs().maxCoeff();
  if (gap > 1e-8) {
    throw Error(ErrorCode::MarginalMismatch,
                "column marginal differs from pi by " + std::to_string(gap));
  }
  return out;
}

KernelAndStationary p_from_q(const TwoDimStationary& q) {
  const TransitionPattern& pat = *q.pattern;
  Eigen::VectorXd pi = q.row_marginal();
  std::vector<double> values(q.q.size());
  for (StateId u = 0; u < pat.state_count(); ++u) {
    if (!(pi(u) > 0.0)) throw Error(ErrorCode::ZeroMarginal, std::to_string(u));
    for (std::size_t k = pat.row_begin(u); k < pat.row_end(u); ++k) values[k] = q.q[k] / pi(u);
  }
  return {MarkovKernel(q.pattern, std::move(values), 1e-9), std::move(pi)};
}

TwoDimStationary affine_combine(const TwoDimStationary& q1, const TwoDimStationary& q2, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidInput, "lambda outside [0,1]");
  if (q1.pattern != q2.pattern && !(*q1.pattern == *q2.pattern)) {
    throw Error(ErrorCode::GraphMismatch, "distributions live on different graphs");
  }
  TwoDimStationary out;
  out.pattern = q1.pattern;
  out.q.resize(q1.q.size());
  for (std::size_t k = 0; k < out.q.size(); ++k) out.q[k] = lambda * q1.q[k] + (1.0 - lambda) * q2.q[k];
  out.marginal = lambda * q1.marginal + (1.0 - lambda) * q2.marginal;
  return out;
}

std::vector<double> uniform_row(const TransitionPattern& pattern, StateId u) {
  const std::size_t width = pattern.row_end(u) - pattern.row_begin(u);
  std::vector<double> row(width, 0.0);
  if (width == 1) {
    row[0] = 1.0;
    return row;
  }
  const double share = 1.0 / static_cast<double>(width - 1);
  for (std::size_t i = 0; i < width; ++i) {
    if (pattern.row_begin(u) + i != pattern.diagonal(u)) row[i] = share;
  }
  return row;
}

}  // namespace mtraffic
