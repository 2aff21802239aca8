#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtraffic/markov.hpp"

namespace mtraffic {

/// Number of walkers on each vertex.
using TrafficConfig = std::vector<std::uint64_t>;

/// k! prod pi_v^{f_v} / f_v!, evaluated in log space.
double multinomial_pmf(const Eigen::VectorXd& pi, std::span<const std::uint64_t> f);

/// k! prod q_uv^{h_uv} / h_uv!, with h aligned with the pattern of q.
double multinomial_edge_pmf(const TwoDimStationary& q, std::span<const std::uint64_t> h);

/// Integer matrix on E ∪ S, aligned with a TransitionPattern.
struct TransportMatrix {
  std::vector<std::uint64_t> entries;
};

/// All transport matrices with row sums f and column sums g. Throws SizeMismatch.
std::vector<TransportMatrix> enumerate_transport_matrices(const TransitionPattern& pattern,
                                                          std::span<const std::uint64_t> f,
                                                          std::span<const std::uint64_t> g);

/// Number of configurations of k walkers on n vertices, saturating at SIZE_MAX.
std::size_t config_count(std::size_t n, std::size_t k);

/// Configurations of size k in ascending lexicographic order.
std::vector<TrafficConfig> enumerate_configs(std::size_t n, std::size_t k);

struct ConfigKernel {
  std::vector<TrafficConfig> configs;
  Eigen::MatrixXd matrix;

  [[nodiscard]] std::optional<std::size_t> index_of(std::span<const std::uint64_t> f) const;
};

inline constexpr std::size_t kDefaultConfigCap = 5000;

/// Transition law of the whole configuration, summing over transport matrices.
/// Throws StateSpaceTooLarge above `cap` configurations.
ConfigKernel config_kernel(const MarkovKernel& p, std::size_t k, std::size_t cap = kDefaultConfigCap);

/// R^n by repeated squaring.
Eigen::MatrixXd config_kernel_power(const ConfigKernel& r, std::size_t n);

/// Multinomial law of every configuration of `r`.
Eigen::VectorXd config_stationary(const ConfigKernel& r, const Eigen::VectorXd& pi);

/// Independent walkers moved by one kernel. Walker w at step t draws the t-th
/// value of its own counter-based stream, so runs are reproducible for any
/// thread count.
class TrafficSimulator {
 public:
  /// Walkers are placed in vertex order according to `init`.
  TrafficSimulator(const MarkovKernel& kernel, const TrafficConfig& init, std::uint64_t seed,
                   unsigned threads = 1);

  void step();
  [[nodiscard]] std::size_t time() const noexcept { return time_; }
  [[nodiscard]] std::span<const StateId> positions() const noexcept { return positions_; }
  [[nodiscard]] TrafficConfig counts() const;
  [[nodiscard]] std::size_t walker_count() const noexcept { return positions_.size(); }

 private:
  void advance(std::size_t begin, std::size_t end);

  const MarkovKernel* kernel_;
  std::vector<double> cumulative_;  // per-row running sums aligned with the pattern
  std::vector<StateId> positions_;
  std::uint64_t seed_;
  unsigned threads_;
  std::size_t time_ = 0;
};

/// Runs `steps` steps; `observer(t, counts)` is called for t = 0 (initial) .. steps.
void simulate(const MarkovKernel& kernel, const TrafficConfig& init, std::size_t steps,
              std::uint64_t seed,
              const std::function<void(std::size_t, const TrafficConfig&)>& observer,
              unsigned threads = 1);

struct ChiSquared {
  double statistic = 0.0;
  std::size_t df = 0;
};

/// Pearson statistic against k*pi, optionally pooling vertices into groups.
/// Throws OutOfSupport when a group with zero expected mass is occupied.
ChiSquared chi_squared(std::span<const std::uint64_t> observed, const Eigen::VectorXd& pi,
                       std::span<const std::uint32_t> grouping = {});

/// `step,vertex,count` rows (external ids, zero counts omitted), no header.
void write_counts_csv(std::ostream& out, std::size_t step, const TrafficConfig& counts,
                      const RoadNetwork& g);

}  // namespace mtraffic
