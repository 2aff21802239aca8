#include "mtraffic/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <thread>

#include "mtraffic/error.hpp"
#include "mtraffic/random.hpp"

namespace mtraffic {

namespace {

double log_factorial(std::uint64_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace

double multinomial_pmf(const Eigen::VectorXd& pi, std::span<const std::uint64_t> f) {
  if (static_cast<Eigen::Index>(f.size()) != pi.size()) {
    throw Error(ErrorCode::SizeMismatch, "configuration length differs from pi");
  }
  std::uint64_t k = 0;
  double log_p = 0.0;
  for (std::size_t v = 0; v < f.size(); ++v) {
    if (f[v] == 0) continue;
    if (pi(static_cast<Eigen::Index>(v)) <= 0.0) return 0.0;
    k += f[v];
    log_p += static_cast<double>(f[v]) * std::log(pi(static_cast<Eigen::Index>(v))) - log_factorial(f[v]);
  }
  return std::exp(log_p + log_factorial(k));
}

double multinomial_edge_pmf(const TwoDimStationary& q, std::span<const std::uint64_t> h) {
  if (h.size() != q.q.size()) throw Error(ErrorCode::SizeMismatch, "edge configuration length");
  std::uint64_t k = 0;
  double log_p = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] == 0) continue;
    if (q.q[i] <= 0.0) return 0.0;
    k += h[i];
    log_p += static_cast<double>(h[i]) * std::log(q.q[i]) - log_factorial(h[i]);
  }
  return std::exp(log_p + log_factorial(k));
}

namespace {

// Row-by-row composition of f, bounded by the column sums still unused.
struct TransportEnumerator {
  const TransitionPattern& pattern;
  std::span<const std::uint64_t> f;
  std::vector<std::uint64_t> capacity;  // unused column sums
  std::vector<std::uint64_t> entries;
  std::vector<TransportMatrix> out;

  void row(StateId u) {
    if (u == pattern.state_count()) {
      out.push_back({entries});
      return;
    }
    cell(u, pattern.row_begin(u), f[u]);
  }

  void cell(StateId u, std::size_t pos, std::uint64_t remaining) {
    if (pos == pattern.row_end(u)) {
      if (remaining == 0) row(u + 1);
      return;
    }
    const StateId v = pattern.column(pos);
    const std::uint64_t hi = std::min(remaining, capacity[v]);
    for (std::uint64_t x = 0; x <= hi; ++x) {
      entries[pos] = x;
      capacity[v] -= x;
      cell(u, pos + 1, remaining - x);
      capacity[v] += x;
    }
    entries[pos] = 0;
  }
};

}  // namespace

std::vector<TransportMatrix> enumerate_transport_matrices(const TransitionPattern& pattern,
                                                          std::span<const std::uint64_t> f,
                                                          std::span<const std::uint64_t> g) {
  const std::size_t n = pattern.state_count();
  if (f.size() != n || g.size() != n) throw Error(ErrorCode::SizeMismatch, "configuration length");
  std::uint64_t kf = 0;
  std::uint64_t kg = 0;
  for (std::size_t v = 0; v < n; ++v) {
    kf += f[v];
    kg += g[v];
  }
  if (kf != kg) throw Error(ErrorCode::SizeMismatch, "configurations have different sizes");
  TransportEnumerator e{pattern, f, {g.begin(), g.end()}, std::vector<std::uint64_t>(pattern.size(), 0), {}};
  e.row(0);
  return std::move(e.out);
}

std::size_t config_count(std::size_t n, std::size_t k) {
  if (n == 0) return k == 0 ? 1 : 0;
  // C(n + k - 1, k), computed incrementally with overflow saturation.
  std::size_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    std::size_t scaled;
    if (__builtin_mul_overflow(c, n - 1 + i, &scaled)) return std::numeric_limits<std::size_t>::max();
    c = scaled / i;
  }
  return c;
}

std::vector<TrafficConfig> enumerate_configs(std::size_t n, std::size_t k) {
  std::vector<TrafficConfig> out;
  if (n == 0) return out;
  TrafficConfig current(n, 0);
  auto fill = [&](auto&& self, std::size_t v, std::uint64_t remaining) -> void {
    if (v + 1 == n) {
      current[v] = remaining;
      out.push_back(current);
      return;
    }
    for (std::uint64_t x = 0; x <= remaining; ++x) {
      current[v] = x;
      self(self, v + 1, remaining - x);
    }
  };
  fill(fill, 0, k);
  return out;
}

std::optional<std::size_t> ConfigKernel::index_of(std::span<const std::uint64_t> f) const {
  auto it = std::lower_bound(configs.begin(), configs.end(), f,
                             [](const TrafficConfig& a, std::span<const std::uint64_t> b) {
                               return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
                             });
  if (it == configs.end() || !std::equal(it->begin(), it->end(), f.begin(), f.end())) return std::nullopt;
  return static_cast<std::size_t>(it - configs.begin());
}

ConfigKernel config_kernel(const MarkovKernel& p, std::size_t k, std::size_t cap) {
  const std::size_t n = p.state_count();
  const std::size_t count = config_count(n, k);
  if (count > cap) {
    throw Error(ErrorCode::StateSpaceTooLarge,
                std::to_string(count) + " configurations exceed the cap of " + std::to_string(cap));
  }
  ConfigKernel r;
  r.configs = enumerate_configs(n, k);
  const auto size = static_cast<Eigen::Index>(r.configs.size());
  r.matrix = Eigen::MatrixXd::Zero(size, size);
  const TransitionPattern& pat = p.pattern();

  std::vector<double> log_p(pat.size());
  for (std::size_t i = 0; i < pat.size(); ++i) {
    log_p[i] = p.values()[i] > 0.0 ? std::log(p.values()[i]) : -std::numeric_limits<double>::infinity();
  }

  // For each f, enumerate every transport matrix with row sums f; its column
  // sums give g, and its weight prod f_u! prod p^k / k! adds to R(f, g).
  for (Eigen::Index fi = 0; fi < size; ++fi) {
    const TrafficConfig& f = r.configs[static_cast<std::size_t>(fi)];
    double base = 0.0;
    for (std::uint64_t fu : f) base += log_factorial(fu);
    TrafficConfig g(n, 0);

    auto cell = [&](auto&& self, StateId u, std::size_t pos, std::uint64_t remaining, double logw) -> void {
      if (pos == pat.row_end(u)) {
        if (remaining != 0) return;
        if (u + 1 == n) {
          r.matrix(fi, static_cast<Eigen::Index>(*r.index_of(g))) += std::exp(logw);
          return;
        }
        self(self, u + 1, pat.row_begin(u + 1), f[u + 1], logw);
        return;
      }
      const StateId v = pat.column(pos);
      for (std::uint64_t x = 0; x <= remaining; ++x) {
        if (x > 0 && p.values()[pos] <= 0.0) break;
        g[v] += x;
        self(self, u, pos + 1, remaining - x,
             logw + static_cast<double>(x) * (x > 0 ? log_p[pos] : 0.0) - log_factorial(x));
        g[v] -= x;
      }
    };
    cell(cell, 0, pat.row_begin(0), f[0], base);
  }
  return r;
}

Eigen::MatrixXd config_kernel_power(const ConfigKernel& r, std::size_t n) {
  const Eigen::Index size = r.matrix.rows();
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(size, size);
  Eigen::MatrixXd base = r.matrix;
  while (n > 0) {
    if (n & 1U) result = result * base;
    n >>= 1U;
    if (n > 0) base = base * base;
  }
  return result;
}

Eigen::VectorXd config_stationary(const ConfigKernel& r, const Eigen::VectorXd& pi) {
  Eigen::VectorXd rho(static_cast<Eigen::Index>(r.configs.size()));
  for (std::size_t i = 0; i < r.configs.size(); ++i) {
    rho(static_cast<Eigen::Index>(i)) = multinomial_pmf(pi, r.configs[i]);
  }
  return rho;
}

TrafficSimulator::TrafficSimulator(const MarkovKernel& kernel, const TrafficConfig& init,
                                   std::uint64_t seed, unsigned threads)
    : kernel_(&kernel), seed_(seed), threads_(std::max(1U, threads)) {
  const TransitionPattern& pat = kernel.pattern();
  if (init.size() != pat.state_count()) {
    throw Error(ErrorCode::SizeMismatch, "initial configuration length differs from vertex count");
  }
  cumulative_.resize(pat.size());
  for (StateId u = 0; u < pat.state_count(); ++u) {
    double run = 0.0;
    std::size_t last_positive = pat.row_begin(u);
    for (std::size_t k = pat.row_begin(u); k < pat.row_end(u); ++k) {
      run += kernel.values()[k];
      cumulative_[k] = run;
      if (kernel.values()[k] > 0.0) last_positive = k;
    }
    // Every draw in [0,1) lands at or before the last reachable column.
    for (std::size_t k = last_positive; k < pat.row_end(u); ++k) cumulative_[k] = 2.0;
  }
  for (StateId v = 0; v < init.size(); ++v) positions_.insert(positions_.end(), init[v], v);
}

void TrafficSimulator::advance(std::size_t begin, std::size_t end) {
  const TransitionPattern& pat = kernel_->pattern();
  for (std::size_t w = begin; w < end; ++w) {
    const StateId u = positions_[w];
    const double x = to_unit(CounterRng(seed_, w).at(time_));
    const auto first = cumulative_.begin() + static_cast<std::ptrdiff_t>(pat.row_begin(u));
    const auto last = cumulative_.begin() + static_cast<std::ptrdiff_t>(pat.row_end(u));
    const auto it = std::upper_bound(first, last, x);
    positions_[w] = pat.column(static_cast<std::size_t>(it - cumulative_.begin()));
  }
}

void TrafficSimulator::step() {
  const std::size_t k = positions_.size();
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads_, std::max<std::size_t>(1, k / 4096)));
  if (workers <= 1) {
    advance(0, k);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (k + workers - 1) / workers;
    for (unsigned t = 0; t < workers; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(k, b + chunk);
      if (b < e) pool.emplace_back([this, b, e] { advance(b, e); });
    }
    for (auto& th : pool) th.join();
  }
  ++time_;
}

TrafficConfig TrafficSimulator::counts() const {
  TrafficConfig c(kernel_->state_count(), 0);
  for (StateId v : positions_) ++c[v];
  return c;
}

void simulate(const MarkovKernel& kernel, const TrafficConfig& init, std::size_t steps,
              std::uint64_t seed,
              const std::function<void(std::size_t, const TrafficConfig&)>& observer,
              unsigned threads) {
  TrafficSimulator sim(kernel, init, seed, threads);
  observer(0, sim.counts());
  for (std::size_t t = 1; t <= steps; ++t) {
    sim.step();
    observer(t, sim.counts());
  }
}

ChiSquared chi_squared(std::span<const std::uint64_t> observed, const Eigen::VectorXd& pi,
                       std::span<const std::uint32_t> grouping) {
  const std::size_t n = observed.size();
  if (static_cast<Eigen::Index>(n) != pi.size()) throw Error(ErrorCode::SizeMismatch, "observed length");
  if (!grouping.empty() && grouping.size() != n) throw Error(ErrorCode::SizeMismatch, "grouping length");

  std::map<std::uint32_t, std::pair<double, double>> groups;  // group -> (observed, pi mass)
  double k = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const std::uint32_t g = grouping.empty() ? static_cast<std::uint32_t>(v) : grouping[v];
    auto& cell = groups[g];
    cell.first += static_cast<double>(observed[v]);
    cell.second += pi(static_cast<Eigen::Index>(v));
    k += static_cast<double>(observed[v]);
  }
  if (k <= 0.0) throw Error(ErrorCode::InvalidInput, "no observations");

  ChiSquared out;
  std::size_t used = 0;
  for (const auto& [g, cell] : groups) {
    const auto [o, mass] = cell;
    if (mass <= 0.0) {
      if (o > 0.0) throw Error(ErrorCode::OutOfSupport, std::to_string(g));
      continue;
    }
    const double expected = k * mass;
    out.statistic += (o - expected) * (o - expected) / expected;
    ++used;
  }
  out.df = used > 0 ? used - 1 : 0;
  return out;
}

void write_counts_csv(std::ostream& out, std::size_t step, const TrafficConfig& counts,
                      const RoadNetwork& g) {
  for (VertexId v = 0; v < counts.size(); ++v) {
    if (counts[v] != 0) out << step << ',' << g.external_id(v) << ',' << counts[v] << '\n';
  }
}

}  // namespace mtraffic
