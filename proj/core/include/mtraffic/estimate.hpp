#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtraffic/markov.hpp"
#include "mtraffic/random.hpp"
#include "mtraffic/spectral.hpp"

namespace mtraffic {

/// A vertex sequence observed `count` times.
struct WeightedTrajectory {
  std::vector<VertexId> vertices;
  std::uint64_t count = 1;
};

/// Counting statistics of a trajectory corpus. Everything is an exact integer,
/// so merging partial results in any order gives identical values.
struct SufficientStats {
  PatternPtr pattern;
  std::vector<std::uint64_t> n_matrix;  // consecutive pair counts, aligned with the pattern
  std::vector<std::uint64_t> s;         // trajectory starts per vertex
  std::vector<std::uint64_t> e;         // trajectory ends per vertex
  std::uint64_t n = 0;                  // total number of observed vertices
  std::uint64_t k = 0;                  // number of trajectories
  /// Squared ||N_i||_G of each trajectory, as a histogram value -> trajectory count.
  std::map<std::uint64_t, std::uint64_t> norm_sq_counts;

  explicit SufficientStats(PatternPtr p = nullptr);

  void merge(const SufficientStats& other);

  [[nodiscard]] std::vector<std::uint64_t> out_totals() const;  // n_{v+}
  [[nodiscard]] std::vector<std::uint64_t> in_totals() const;   // n_{+v}
  [[nodiscard]] std::vector<std::uint64_t> occupancy() const;   // n_v
  [[nodiscard]] Eigen::VectorXd start_minus_end() const;
  /// Sum over trajectories of ||N_i||_G.
  [[nodiscard]] double norm_sum() const;

  bool operator==(const SufficientStats& other) const;
};

enum class SkipReason { InvalidTransition, TooShort, UnknownVertex };

std::string_view to_string(SkipReason r) noexcept;

struct SkippedTrajectory {
  std::size_t index = 0;  // position in the input
  SkipReason reason = SkipReason::InvalidTransition;
  ExternalId from = 0;    // offending pair (InvalidTransition) or vertex (UnknownVertex)
  ExternalId to = 0;
  std::uint64_t count = 1;
};

struct CollectResult {
  SufficientStats stats;
  std::vector<SkippedTrajectory> skipped;
};

/// Pair counts of one trajectory, aligned with the pattern. Returns the index of
/// the first step that leaves the support, if any.
std::optional<std::size_t> trajectory_counts(const TransitionPattern& pattern,
                                             std::span<const VertexId> vertices,
                                             std::vector<std::uint64_t>& counts);

/// Adds one trajectory (times `count`). Returns false, leaving `stats` untouched,
/// when the trajectory is shorter than two vertices or leaves the support.
bool accumulate(SufficientStats& stats, std::span<const VertexId> vertices, std::uint64_t count = 1);

/// Invalid trajectories are skipped and reported. With threads > 1 the corpus is
/// split into contiguous chunks and the partial statistics merged in order.
CollectResult collect_stats(std::span<const WeightedTrajectory> corpus, const RoadNetwork& g,
                            unsigned threads = 1, PatternPtr pattern = nullptr);

struct NaiveEstimate {
  std::vector<double> q;       // N / (n - k), aligned with the pattern
  Eigen::VectorXd marginal_gap;  // column marginal minus row marginal
};

/// Throws EmptyCorpus when n <= k.
NaiveEstimate estimate_naive(const SufficientStats& stats);

enum class RepairPolicy {
  /// Rows with a negative transition or fewer than `min_row_count` observed
  /// transitions take the frequency-based row.
  MlRows,
  /// Negative entries are set to zero and the row renormalized.
  Clamp,
};

enum class NegativePiPolicy {
  Clamp,  // negatives to zero, renormalize
  Shift,  // subtract the minimum, renormalize
};

std::string_view to_string(RepairPolicy p) noexcept;
std::string_view to_string(NegativePiPolicy p) noexcept;

struct WlsOptions {
  LagrangeOptions solver;
  RepairPolicy repair = RepairPolicy::MlRows;
  NegativePiPolicy negative_pi = NegativePiPolicy::Clamp;
  std::uint64_t min_row_count = 20;
  StationaryOptions stationary;
};

struct EstimateDiagnostics {
  enum class RowEvent { NegativeEntry, FewTransitions, NoTransitions };
  struct Row {
    VertexId vertex;
    RowEvent event;
  };
  std::vector<Row> rows;
  std::vector<VertexId> negative_pi;
  bool reducible = false;
  std::size_t closed_classes = 1;
  /// Set when the rows were repaired and the stationary law solved again.
  bool resolved_stationary = false;
};

std::string_view to_string(EstimateDiagnostics::RowEvent e) noexcept;

struct EstimatorOutput {
  TwoDimStationary q_hat;  // after post-processing
  MarkovKernel p_hat;
  Eigen::VectorXd pi_hat;
  EstimateDiagnostics diagnostics;

  // WLS only.
  std::vector<double> m_hat;  // N + correction, aligned with the pattern, before post-processing
  std::vector<double> q_raw;  // m_hat / n_eff
  Eigen::VectorXd lambda;
  double n_eff = 0.0;
  LagrangeMethod solver_method = LagrangeMethod::Dense;
  double solver_residual = 0.0;
};

/// p_uv = n_uv / n_{u+}, identity rows where n_{u+} = 0; pi from the balance equations.
EstimatorOutput estimate_ml(const SufficientStats& stats, const StationaryOptions& options = {});

/// Throws DegenerateNormalization when n_eff <= 0, plus solver errors.
EstimatorOutput estimate_wls(const SufficientStats& stats, const RoadNetwork& g,
                             const WlsOptions& options = {});
/// Same, reusing a solver built for the graph of `stats`.
EstimatorOutput estimate_wls(const SufficientStats& stats, const LagrangeSolver& solver,
                             const WlsOptions& options = {});

/// Only M_hat, Q_raw = M_hat / n_eff, lambda and n_eff; no post-processing.
EstimatorOutput estimate_wls_raw(const SufficientStats& stats, const LagrangeSolver& solver);

/// WLS weight of a trajectory with squared norm `norm_sq`.
double wls_weight(const SufficientStats& stats, std::uint64_t norm_sq);

/// ||a - b||_G over the support; spans are aligned with the same pattern.
double g_distance(std::span<const double> a, std::span<const double> b);

/// Weighted sum of squared errors, straight from the definition.
double sse(std::span<const double> m, std::span<const double> weights,
           std::span<const std::vector<std::uint64_t>> per_trajectory);

/// Mean squared error with per-trajectory effective sizes, from the definition.
double mse(std::span<const double> q, std::span<const double> eff_sizes,
           std::span<const std::vector<std::uint64_t>> per_trajectory);

/// SSE at the WLS weights, split into the part that does not depend on M and ||N - M||^2.
struct SseDecomposition {
  double variance = 0.0;
  double bias = 0.0;
  [[nodiscard]] double total() const noexcept { return variance + bias; }
};

SseDecomposition sse_decomposition(std::span<const double> m, const SufficientStats& stats);

// Trajectory corpus text format: one trajectory per line, whitespace-separated
// external vertex ids, optionally ending in `*<count>`. '#' starts a comment line.
struct CorpusFile {
  std::vector<WeightedTrajectory> trajectories;
  std::vector<SkippedTrajectory> skipped;  // lines naming unknown vertices
};

CorpusFile read_corpus(std::istream& in, const RoadNetwork& g);
CorpusFile load_corpus_file(const std::string& path, const RoadNetwork& g);
void write_corpus(std::ostream& out, std::span<const WeightedTrajectory> corpus, const RoadNetwork& g);

// Simulation benchmark of ML against WLS.

/// Start ~ pi, then n - 1 steps of the kernel.
std::vector<VertexId> sample_trajectory(const MarkovKernel& p, std::span<const double> pi_cdf,
                                        std::size_t n, CounterRng& rng);

struct BenchmarkOptions {
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  WlsOptions wls;
  StationaryOptions stationary;
};

struct BenchmarkCell {
  std::size_t k = 0;
  std::size_t n = 0;
  std::size_t reps = 0;
  double ml_mean = 0.0;
  double ml_sd = 0.0;
  double wls_mean = 0.0;
  double wls_sd = 0.0;
};

/// Absolute bias ||Q_hat - Q||_G of both estimators over `reps` replications.
/// WLS is scored on M_hat / n_eff itself, before any row repair.
/// Replication r of cell c draws from stream (seed, c * reps + r).
BenchmarkCell run_benchmark_cell(const MarkovKernel& p, const LagrangeSolver& solver, std::size_t k,
                                 std::size_t n, const BenchmarkOptions& options,
                                 std::size_t cell_index = 0);

std::vector<BenchmarkCell> run_benchmark(const RoadNetwork& g, const MarkovKernel& p,
                                         std::span<const std::size_t> ks, std::span<const std::size_t> ns,
                                         const BenchmarkOptions& options);

/// `k,n,method,mean_bias,sd_bias`, with a header line.
void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkCell> cells);

/// Rows drawn from a flat Dirichlet over out-neighbours and the vertex itself.
MarkovKernel random_dirichlet_kernel(const RoadNetwork& g, std::uint64_t seed);

/// Hamiltonian cycle over a random permutation plus `extra_edges` random chords.
RoadNetwork random_strongly_connected_graph(std::size_t n, std::size_t extra_edges, std::uint64_t seed);

}  // namespace mtraffic
