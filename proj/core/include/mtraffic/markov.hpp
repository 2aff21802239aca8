#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtraffic/road_graph.hpp"

namespace mtraffic {

/// Sparse support E ∪ S of a digraph: every arc plus the diagonal, row-major,
/// columns sorted within each row.
class TransitionPattern {
 public:
  explicit TransitionPattern(const Digraph& g);

  [[nodiscard]] std::size_t state_count() const noexcept { return offsets_.size() - 1; }
  [[nodiscard]] std::size_t size() const noexcept { return columns_.size(); }
  [[nodiscard]] std::size_t row_begin(StateId u) const { return offsets_[u]; }
  [[nodiscard]] std::size_t row_end(StateId u) const { return offsets_[u + 1]; }
  [[nodiscard]] std::span<const StateId> columns(StateId u) const {
    return {columns_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  [[nodiscard]] StateId row(std::size_t pos) const { return rows_[pos]; }
  [[nodiscard]] StateId column(std::size_t pos) const { return columns_[pos]; }
  [[nodiscard]] std::size_t diagonal(StateId u) const { return diagonal_[u]; }
  [[nodiscard]] std::optional<std::size_t> position(StateId u, StateId v) const;
  [[nodiscard]] bool operator==(const TransitionPattern& other) const {
    return offsets_ == other.offsets_ && columns_ == other.columns_;
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<StateId> columns_;
  std::vector<StateId> rows_;
  std::vector<std::size_t> diagonal_;
};

using PatternPtr = std::shared_ptr<const TransitionPattern>;

PatternPtr make_pattern(const Digraph& g);
inline PatternPtr make_pattern(const RoadNetwork& g) { return make_pattern(g.digraph()); }
inline PatternPtr make_pattern(const LineDigraph& g) { return make_pattern(g.digraph()); }

/// Row-stochastic matrix supported on E ∪ S.
class MarkovKernel {
 public:
  MarkovKernel() = default;

  /// `values` is aligned with the pattern. Rows must sum to 1 within `row_tol`;
  /// they are then rescaled to sum to 1 up to rounding. Throws InvalidKernel.
  MarkovKernel(PatternPtr pattern, std::vector<double> values, double row_tol = 1e-12);

  /// Throws InvalidKernel when `p` has mass off the support or bad rows.
  static MarkovKernel from_dense(PatternPtr pattern, const Eigen::MatrixXd& p, double row_tol = 1e-12);

  [[nodiscard]] const TransitionPattern& pattern() const { return *pattern_; }
  [[nodiscard]] const PatternPtr& pattern_ptr() const noexcept { return pattern_; }
  [[nodiscard]] std::size_t state_count() const { return pattern_->state_count(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const double> row_values(StateId u) const {
    return {values_.data() + pattern_->row_begin(u), pattern_->row_end(u) - pattern_->row_begin(u)};
  }
  [[nodiscard]] double operator()(StateId u, StateId v) const;
  [[nodiscard]] Eigen::MatrixXd dense() const;

  /// x^T P for a row vector x.
  [[nodiscard]] Eigen::VectorXd left_multiply(const Eigen::VectorXd& x) const;

  /// Digraph of strictly positive off-diagonal entries.
  [[nodiscard]] Digraph positive_support() const;

 private:
  PatternPtr pattern_;
  std::vector<double> values_;
};

enum class KernelMode { Subordinated, Compatible };

struct KernelDiagnostics {
  struct RowSum {
    StateId row;
    double sum;
  };
  struct Cell {
    StateId row;
    StateId col;
    double value;
  };
  std::vector<RowSum> row_sum_violations;
  std::vector<Cell> off_support;
  std::vector<Cell> negative;
  std::vector<Cell> zero_on_edge;  // compatible mode only

  [[nodiscard]] bool ok() const noexcept {
    return row_sum_violations.empty() && off_support.empty() && negative.empty() &&
           zero_on_edge.empty();
  }
};

/// Checks a dense candidate against a graph; never throws on bad content.
KernelDiagnostics validate_kernel(const Eigen::MatrixXd& p, const Digraph& g, KernelMode mode,
                                  double row_tol = 1e-12);

/// Line-digraph kernel. On a closure it also enforces the three structural zeros
/// around the ideal vertex: no u->0->u turn, no 0->v->0 turn, and no waiting on
/// an edge that touches the ideal vertex.
struct EdgeMarkovKernel {
  LineDigraph line;
  MarkovKernel kernel;
};

/// Throws InvalidKernel (including violated closure constraints).
EdgeMarkovKernel make_edge_kernel(LineDigraph line, std::vector<double> values, double row_tol = 1e-12);

enum class StationaryMethod { Auto, PowerCesaro, DenseSolve };

std::string_view to_string(StationaryMethod m) noexcept;

struct StationaryOptions {
  StationaryMethod method = StationaryMethod::Auto;
  double tol = 1e-12;
  std::size_t max_iter = 1000000;
  /// Auto uses the dense solve up to this many states.
  std::size_t dense_limit = 2000;
};

struct StationaryDistribution {
  Eigen::VectorXd pi;
  double residual = 0.0;  // ||pi^T P - pi^T||_1
  StationaryMethod method = StationaryMethod::DenseSolve;
  std::size_t iterations = 0;
  /// Set by the reducible fallback: number of closed classes found (1 when irreducible).
  std::size_t closed_classes = 1;
  bool reducible = false;
};

/// Unique stationary law of a kernel whose positive support is strongly connected.
/// Throws NotStronglyConnected, NoConvergence.
StationaryDistribution stationary(const MarkovKernel& p, const StationaryOptions& options = {});

/// Like stationary(), but a reducible chain is handled by solving each closed
/// class separately and mixing them by the mass that `initial` sends into each.
/// With a single closed class, `initial` is irrelevant.
StationaryDistribution stationary_with_fallback(const MarkovKernel& p, const Eigen::VectorXd& initial,
                                                const StationaryOptions& options = {});

/// Matrix Q on E ∪ S with equal row and column marginals.
struct TwoDimStationary {
  PatternPtr pattern;
  std::vector<double> q;     // aligned with pattern
  Eigen::VectorXd marginal;  // common row/column marginal

  [[nodiscard]] double operator()(StateId u, StateId v) const;
  [[nodiscard]] Eigen::MatrixXd dense() const;
  [[nodiscard]] Eigen::VectorXd row_marginal() const;
  [[nodiscard]] Eigen::VectorXd column_marginal() const;
};

/// q_uv = pi_u p_uv. Throws MarginalMismatch if the column marginal misses pi by more than 1e-8.
TwoDimStationary q_from_p(const MarkovKernel& p, const Eigen::VectorXd& pi);

struct KernelAndStationary {
  MarkovKernel kernel;
  Eigen::VectorXd pi;
};

/// pi_u = sum_v q_uv and p_uv = q_uv / pi_u. Throws ZeroMarginal.
KernelAndStationary p_from_q(const TwoDimStationary& q);

/// lambda q1 + (1 - lambda) q2. Throws GraphMismatch, InvalidInput.
TwoDimStationary affine_combine(const TwoDimStationary& q1, const TwoDimStationary& q2, double lambda);

/// Uniform over out-neighbours, or a self-loop when there are none.
std::vector<double> uniform_row(const TransitionPattern& pattern, StateId u);

/// Entries with magnitude below 1e-15 become exact zeros.
void flush_tiny(std::span<double> values) noexcept;

// Kernel text format: one `u v p` line per entry, u and v external vertex ids,
// `u u p` for staying put. Rows that are listed must sum to 1 within 1e-9 and
// are rescaled exactly; rows that are absent become uniform over out-neighbours.
struct KernelFile {
  MarkovKernel kernel;
  std::vector<VertexId> defaulted_rows;
};

KernelFile read_kernel(std::istream& in, const RoadNetwork& g, PatternPtr pattern = nullptr);
KernelFile load_kernel_file(const std::string& path, const RoadNetwork& g, PatternPtr pattern = nullptr);
void write_kernel(std::ostream& out, const MarkovKernel& p, const RoadNetwork& g);
void save_kernel_file(const std::string& path, const MarkovKernel& p, const RoadNetwork& g);

/// {"vertex": [...external ids], "pi": [...]}
std::string pi_to_json(const Eigen::VectorXd& pi, const RoadNetwork& g);
/// List of {"u", "v", "q"} over non-zero entries, external ids.
std::string q_to_json(const TwoDimStationary& q, const RoadNetwork& g);

}  // namespace mtraffic
