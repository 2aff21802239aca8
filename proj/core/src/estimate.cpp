#include "mtraffic/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "mtraffic/error.hpp"

namespace mtraffic {

SufficientStats::SufficientStats(PatternPtr p) : pattern(std::move(p)) {
  if (pattern) {
    n_matrix.assign(pattern->size(), 0);
    s.assign(pattern->state_count(), 0);
    e.assign(pattern->state_count(), 0);
  }
}

void SufficientStats::merge(const SufficientStats& other) {
  if (!(pattern == other.pattern || (pattern && other.pattern && *pattern == *other.pattern))) {
    throw Error(ErrorCode::GraphMismatch, "statistics were collected on different graphs");
  }
  for (std::size_t i = 0; i < n_matrix.size(); ++i) n_matrix[i] += other.n_matrix[i];
  for (std::size_t v = 0; v < s.size(); ++v) {
    s[v] += other.s[v];
    e[v] += other.e[v];
  }
  n += other.n;
  k += other.k;
  for (const auto& [norm_sq, count] : other.norm_sq_counts) norm_sq_counts[norm_sq] += count;
}

std::vector<std::uint64_t> SufficientStats::out_totals() const {
  std::vector<std::uint64_t> t(s.size(), 0);
  for (std::size_t i = 0; i < n_matrix.size(); ++i) t[pattern->row(i)] += n_matrix[i];
  return t;
}

std::vector<std::uint64_t> SufficientStats::in_totals() const {
  std::vector<std::uint64_t> t(s.size(), 0);
  for (std::size_t i = 0; i < n_matrix.size(); ++i) t[pattern->column(i)] += n_matrix[i];
  return t;
}

std::vector<std::uint64_t> SufficientStats::occupancy() const {
  std::vector<std::uint64_t> t = out_totals();
  for (std::size_t v = 0; v < t.size(); ++v) t[v] += e[v];
  return t;
}

Eigen::VectorXd SufficientStats::start_minus_end() const {
  Eigen::VectorXd d(static_cast<Eigen::Index>(s.size()));
  for (std::size_t v = 0; v < s.size(); ++v) {
    d(static_cast<Eigen::Index>(v)) = static_cast<double>(s[v]) - static_cast<double>(e[v]);
  }
  return d;
}

double SufficientStats::norm_sum() const {
  double total = 0.0;
  for (const auto& [norm_sq, count] : norm_sq_counts) {
    total += static_cast<double>(count) * std::sqrt(static_cast<double>(norm_sq));
  }
  return total;
}

bool SufficientStats::operator==(const SufficientStats& other) const {
  return n_matrix == other.n_matrix && s == other.s && e == other.e && n == other.n &&
         k == other.k && norm_sq_counts == other.norm_sq_counts;
}

std::string_view to_string(SkipReason r) noexcept {
  switch (r) {
    case SkipReason::InvalidTransition: return "InvalidTransition";
    case SkipReason::TooShort: return "TooShort";
    case SkipReason::UnknownVertex: return "UnknownVertex";
  }
  return "unknown";
}

std::optional<std::size_t> trajectory_counts(const TransitionPattern& pattern,
                                             std::span<const VertexId> vertices,
                                             std::vector<std::uint64_t>& counts) {
  counts.assign(pattern.size(), 0);
  for (std::size_t j = 0; j + 1 < vertices.size(); ++j) {
    auto pos = pattern.position(vertices[j], vertices[j + 1]);
    if (!pos) return j;
    ++counts[*pos];
  }
  return std::nullopt;
}

namespace {

// Positions of the consecutive pairs, or the index of the first invalid step.
std::optional<std::size_t> pair_positions(const TransitionPattern& pattern,
                                          std::span<const VertexId> vertices,
                                          std::vector<std::size_t>& positions) {
  positions.clear();
  for (std::size_t j = 0; j + 1 < vertices.size(); ++j) {
    auto pos = pattern.position(vertices[j], vertices[j + 1]);
    if (!pos) return j;
    positions.push_back(*pos);
  }
  return std::nullopt;
}

void add_positions(SufficientStats& stats, std::span<const VertexId> vertices,
                   std::vector<std::size_t>& positions, std::uint64_t count) {
  std::sort(positions.begin(), positions.end());
  std::uint64_t norm_sq = 0;
  for (std::size_t i = 0; i < positions.size();) {
    std::size_t j = i;
    while (j < positions.size() && positions[j] == positions[i]) ++j;
    const std::uint64_t c = j - i;
    norm_sq += c * c;
    stats.n_matrix[positions[i]] += c * count;
    i = j;
  }
  stats.s[vertices.front()] += count;
  stats.e[vertices.back()] += count;
  stats.n += vertices.size() * count;
  stats.k += count;
  stats.norm_sq_counts[norm_sq] += count;
}

}  // namespace

bool accumulate(SufficientStats& stats, std::span<const VertexId> vertices, std::uint64_t count) {
  if (vertices.size() < 2 || count == 0) return false;
  std::vector<std::size_t> positions;
  if (pair_positions(*stats.pattern, vertices, positions)) return false;
  add_positions(stats, vertices, positions, count);
  return true;
}

CollectResult collect_stats(std::span<const WeightedTrajectory> corpus, const RoadNetwork& g,
                            unsigned threads, PatternPtr pattern) {
  if (!pattern) pattern = make_pattern(g);
  const std::size_t parts = std::max<std::size_t>(1, std::min<std::size_t>(threads, corpus.size()));
  const std::size_t chunk = corpus.empty() ? 0 : (corpus.size() + parts - 1) / parts;

  std::vector<CollectResult> partial;
  partial.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) partial.push_back({SufficientStats(pattern), {}});

  auto work = [&](std::size_t p) {
    CollectResult& out = partial[p];
    std::vector<std::size_t> positions;
    const std::size_t begin = p * chunk;
    const std::size_t end = std::min(corpus.size(), begin + chunk);
    for (std::size_t i = begin; i < end; ++i) {
      const WeightedTrajectory& t = corpus[i];
      if (t.count == 0) continue;
      if (t.vertices.size() < 2) {
        ExternalId id = t.vertices.empty() ? 0 : g.external_id(t.vertices.front());
        out.skipped.push_back({i, SkipReason::TooShort, id, id, t.count});
        continue;
      }
      if (auto bad = pair_positions(*pattern, t.vertices, positions)) {
        out.skipped.push_back({i, SkipReason::InvalidTransition, g.external_id(t.vertices[*bad]),
                               g.external_id(t.vertices[*bad + 1]), t.count});
        continue;
      }
      add_positions(out.stats, t.vertices, positions, t.count);
    }
  };

  if (parts == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t p = 0; p < parts; ++p) pool.emplace_back(work, p);
    for (auto& th : pool) th.join();
  }

  CollectResult result{SufficientStats(pattern), {}};
  for (CollectResult& part : partial) {
    result.stats.merge(part.stats);
    result.skipped.insert(result.skipped.end(), part.skipped.begin(), part.skipped.end());
  }
  return result;
}

NaiveEstimate estimate_naive(const SufficientStats& stats) {
  if (stats.n <= stats.k) throw Error(ErrorCode::EmptyCorpus, "no transitions observed");
  const double scale = 1.0 / static_cast<double>(stats.n - stats.k);
  NaiveEstimate out;
  out.q.resize(stats.n_matrix.size());
  for (std::size_t i = 0; i < out.q.size(); ++i) out.q[i] = static_cast<double>(stats.n_matrix[i]) * scale;
  const auto rows = stats.out_totals();
  const auto cols = stats.in_totals();
  out.marginal_gap.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t v = 0; v < rows.size(); ++v) {
    out.marginal_gap(static_cast<Eigen::Index>(v)) =
        (static_cast<double>(cols[v]) - static_cast<double>(rows[v])) * scale;
  }
  return out;
}

std::string_view to_string(RepairPolicy p) noexcept {
  switch (p) {
    case RepairPolicy::MlRows: return "ml-rows";
    case RepairPolicy::Clamp: return "clamp";
  }
  return "unknown";
}

std::string_view to_string(NegativePiPolicy p) noexcept {
  switch (p) {
    case NegativePiPolicy::Clamp: return "clamp";
    case NegativePiPolicy::Shift: return "shift";
  }
  return "unknown";
}

std::string_view to_string(EstimateDiagnostics::RowEvent e) noexcept {
  switch (e) {
    case EstimateDiagnostics::RowEvent::NegativeEntry: return "NegativeEntry";
    case EstimateDiagnostics::RowEvent::FewTransitions: return "FewTransitions";
    case EstimateDiagnostics::RowEvent::NoTransitions: return "NoTransitions";
  }
  return "unknown";
}

namespace {

std::vector<double> ml_rows(const SufficientStats& stats) {
  const TransitionPattern& pat = *stats.pattern;
  const auto totals = stats.out_totals();
  std::vector<double> values(pat.size(), 0.0);
  for (StateId u = 0; u < pat.state_count(); ++u) {
    if (totals[u] == 0) {
      values[pat.diagonal(u)] = 1.0;
      continue;
    }
    const double t = static_cast<double>(totals[u]);
    for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) {
      values[i] = static_cast<double>(stats.n_matrix[i]) / t;
    }
  }
  return values;
}

Eigen::VectorXd occupancy_vector(const SufficientStats& stats) {
  const auto occ = stats.occupancy();
  Eigen::VectorXd x(static_cast<Eigen::Index>(occ.size()));
  for (std::size_t v = 0; v < occ.size(); ++v) x(static_cast<Eigen::Index>(v)) = static_cast<double>(occ[v]);
  return x;
}

void fix_negative_pi(Eigen::VectorXd& pi, NegativePiPolicy policy, EstimateDiagnostics& diag) {
  double lowest = 0.0;
  for (Eigen::Index v = 0; v < pi.size(); ++v) {
    if (pi(v) < 0.0) {
      diag.negative_pi.push_back(static_cast<VertexId>(v));
      lowest = std::min(lowest, pi(v));
    }
  }
  if (diag.negative_pi.empty()) return;
  if (policy == NegativePiPolicy::Clamp) {
    pi = pi.cwiseMax(0.0);
  } else {
    pi.array() -= lowest;
  }
  pi /= pi.sum();
}

// Stationary law of a kernel with all side effects recorded in diag.
Eigen::VectorXd solve_pi(const MarkovKernel& p, const SufficientStats& stats,
                         const StationaryOptions& options, NegativePiPolicy policy,
                         EstimateDiagnostics& diag) {
  StationaryDistribution st = stationary_with_fallback(p, occupancy_vector(stats), options);
  diag.reducible = st.reducible;
  diag.closed_classes = st.closed_classes;
  fix_negative_pi(st.pi, policy, diag);
  return st.pi;
}

}  // namespace

EstimatorOutput estimate_ml(const SufficientStats& stats, const StationaryOptions& options) {
  if (stats.k == 0) throw Error(ErrorCode::EmptyCorpus, "no trajectories");
  EstimatorOutput out;
  const auto totals = stats.out_totals();
  for (StateId u = 0; u < totals.size(); ++u) {
    if (totals[u] == 0) out.diagnostics.rows.push_back({u, EstimateDiagnostics::RowEvent::NoTransitions});
  }
  out.p_hat = MarkovKernel(stats.pattern, ml_rows(stats), 1e-9);
  out.pi_hat = solve_pi(out.p_hat, stats, options, NegativePiPolicy::Clamp, out.diagnostics);
  out.q_hat = q_from_p(out.p_hat, out.pi_hat);
  return out;
}

namespace {

struct RawWls {
  std::vector<double> m;
  Eigen::VectorXd lambda;
  double n_eff = 0.0;
  LagrangeMethod method = LagrangeMethod::Dense;
  double residual = 0.0;
};

RawWls wls_raw(const SufficientStats& stats, const LagrangeSolver& solver) {
  if (stats.k == 0) throw Error(ErrorCode::EmptyCorpus, "no trajectories");
  const TransitionPattern& pat = *stats.pattern;
  LagrangeVector lv = solver.solve(stats.start_minus_end());
  RawWls out;
  out.lambda = std::move(lv.lambda);
  out.method = lv.method;
  out.residual = lv.residual;
  out.m.resize(pat.size());
  for (std::size_t i = 0; i < pat.size(); ++i) {
    const StateId u = pat.row(i);
    const StateId v = pat.column(i);
    out.m[i] = static_cast<double>(stats.n_matrix[i]) + (u == v ? 0.0 : out.lambda(v) - out.lambda(u));
    out.n_eff += out.m[i];
  }
  if (!(out.n_eff > 0.0)) {
    throw Error(ErrorCode::DegenerateNormalization, "effective sample size " + std::to_string(out.n_eff));
  }
  return out;
}

}  // namespace

EstimatorOutput estimate_wls(const SufficientStats& stats, const RoadNetwork& g, const WlsOptions& options) {
  LagrangeSolver solver(g, options.solver);
  return estimate_wls(stats, solver, options);
}

EstimatorOutput estimate_wls(const SufficientStats& stats, const LagrangeSolver& solver,
                             const WlsOptions& options) {
  RawWls raw = wls_raw(stats, solver);
  const TransitionPattern& pat = *stats.pattern;
  const std::size_t n = pat.state_count();

  EstimatorOutput out;
  out.m_hat = raw.m;
  out.lambda = raw.lambda;
  out.n_eff = raw.n_eff;
  out.solver_method = raw.method;
  out.solver_residual = raw.residual;
  out.q_raw.resize(raw.m.size());
  for (std::size_t i = 0; i < raw.m.size(); ++i) out.q_raw[i] = raw.m[i] / raw.n_eff;

  // Transition rows implied by the raw estimate, and which of them need repair.
  const auto totals = stats.out_totals();
  const std::vector<double> ml = ml_rows(stats);
  std::vector<double> p(raw.m.size(), 0.0);
  std::vector<char> repaired(n, 0);
  using Event = EstimateDiagnostics::RowEvent;
  for (StateId u = 0; u < n; ++u) {
    double row = 0.0;
    bool negative = false;
    for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) {
      row += out.q_raw[i];
      negative = negative || out.q_raw[i] < 0.0;
    }
    if (options.repair == RepairPolicy::MlRows) {
      if (totals[u] == 0) {
        out.diagnostics.rows.push_back({u, Event::NoTransitions});
      } else if (negative || !(row > 0.0)) {
        out.diagnostics.rows.push_back({u, Event::NegativeEntry});
      } else if (totals[u] < options.min_row_count) {
        out.diagnostics.rows.push_back({u, Event::FewTransitions});
      } else {
        for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) p[i] = out.q_raw[i] / row;
        continue;
      }
      repaired[u] = 1;
      std::copy(ml.begin() + static_cast<std::ptrdiff_t>(pat.row_begin(u)),
                ml.begin() + static_cast<std::ptrdiff_t>(pat.row_end(u)),
                p.begin() + static_cast<std::ptrdiff_t>(pat.row_begin(u)));
    } else {
      double kept = 0.0;
      for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) kept += std::max(0.0, out.q_raw[i]);
      if (!negative && row > 0.0) {
        for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) p[i] = out.q_raw[i] / row;
        continue;
      }
      out.diagnostics.rows.push_back({u, totals[u] == 0 ? Event::NoTransitions : Event::NegativeEntry});
      repaired[u] = 1;
      for (std::size_t i = pat.row_begin(u); i < pat.row_end(u); ++i) {
        p[i] = kept > 0.0 ? std::max(0.0, out.q_raw[i]) / kept : ml[i];
      }
    }
  }

  const bool any_repair = std::any_of(repaired.begin(), repaired.end(), [](char c) { return c != 0; });
  if (!any_repair) {
    TwoDimStationary q{stats.pattern, out.q_raw, {}};
    q.marginal = q.row_marginal();
    KernelAndStationary kp = p_from_q(q);
    out.p_hat = std::move(kp.kernel);
    out.pi_hat = std::move(kp.pi);
    out.q_hat = std::move(q);
    return out;
  }

  out.p_hat = MarkovKernel(stats.pattern, std::move(p), 1e-9);
  out.pi_hat = solve_pi(out.p_hat, stats, options.stationary, options.negative_pi, out.diagnostics);
  out.diagnostics.resolved_stationary = true;
  out.q_hat = q_from_p(out.p_hat, out.pi_hat);
  return out;
}

EstimatorOutput estimate_wls_raw(const SufficientStats& stats, const LagrangeSolver& solver) {
  RawWls raw = wls_raw(stats, solver);
  EstimatorOutput out;
  out.q_raw.resize(raw.m.size());
  for (std::size_t i = 0; i < raw.m.size(); ++i) out.q_raw[i] = raw.m[i] / raw.n_eff;
  out.m_hat = std::move(raw.m);
  out.lambda = std::move(raw.lambda);
  out.n_eff = raw.n_eff;
  out.solver_method = raw.method;
  out.solver_residual = raw.residual;
  return out;
}

double wls_weight(const SufficientStats& stats, std::uint64_t norm_sq) {
  const double total = stats.norm_sum();
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyCorpus, "all trajectory norms are zero");
  return std::sqrt(static_cast<double>(norm_sq)) / total;
}

double g_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::SizeMismatch, "matrices on different supports");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

double sse(std::span<const double> m, std::span<const double> weights,
           std::span<const std::vector<std::uint64_t>> per_trajectory) {
  if (weights.size() != per_trajectory.size()) throw Error(ErrorCode::SizeMismatch, "one weight per trajectory");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& ni = per_trajectory[i];
    if (ni.size() != m.size()) throw Error(ErrorCode::SizeMismatch, "trajectory counts on a different support");
    double sq = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double d = static_cast<double>(ni[j]) - weights[i] * m[j];
      sq += d * d;
    }
    total += sq / weights[i];
  }
  return total;
}

double mse(std::span<const double> q, std::span<const double> eff_sizes,
           std::span<const std::vector<std::uint64_t>> per_trajectory) {
  if (eff_sizes.size() != per_trajectory.size()) throw Error(ErrorCode::SizeMismatch, "one size per trajectory");
  double total = 0.0;
  for (std::size_t i = 0; i < eff_sizes.size(); ++i) {
    const auto& ni = per_trajectory[i];
    double sq = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double d = static_cast<double>(ni[j]) / eff_sizes[i] - q[j];
      sq += d * d;
    }
    total += eff_sizes[i] * sq;
  }
  return total;
}

SseDecomposition sse_decomposition(std::span<const double> m, const SufficientStats& stats) {
  if (m.size() != stats.n_matrix.size()) throw Error(ErrorCode::SizeMismatch, "matrix on a different support");
  SseDecomposition out;
  // At w_i proportional to ||N_i||, sum ||N_i||^2 / w_i = (sum ||N_i||)^2.
  const double norms = stats.norm_sum();
  double n_sq = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double ni = static_cast<double>(stats.n_matrix[i]);
    n_sq += ni * ni;
    out.bias += (ni - m[i]) * (ni - m[i]);
  }
  out.variance = norms * norms - n_sq;
  return out;
}

}  // namespace mtraffic
