#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <queue>
#include <thread>

#include "mtraffic/error.hpp"
#include "mtraffic/ingest.hpp"

namespace mtraffic {

namespace {

constexpr double kMetersPerDegree = 6371008.8 * std::numbers::pi / 180.0;

}  // namespace

TrajectoryMatcher::TrajectoryMatcher(const OsmGraphBundle& bundle, MatchOptions options)
    : bundle_(&bundle), options_(options) {
  const RoadNetwork& g = bundle.network;
  if (g.vertex_count() == 0) throw Error(ErrorCode::InvalidInput, "empty graph");
  if (!g.has_coordinates() || !g.has_lengths()) {
    throw Error(ErrorCode::InvalidInput, "matching needs vertex coordinates and edge lengths");
  }
  if (!(options_.snap_radius_m > 0.0) || !std::isfinite(options_.snap_radius_m)) {
    throw Error(ErrorCode::InvalidInput, "snap radius must be positive");
  }

  double max_abs_lat = 0.0;
  for (const GeoPoint& p : g.coordinates()) max_abs_lat = std::max(max_abs_lat, std::abs(p.lat));
  // Cells at least one snap radius wide, so the 3x3 block around a point covers its disc.
  cell_lat_ = std::max(1e-5, 1.05 * options_.snap_radius_m / kMetersPerDegree);
  const double edge_lat = std::min(89.9, max_abs_lat + 2 * cell_lat_);
  cell_lon_ = std::min(360.0, cell_lat_ / std::max(1e-3, std::cos(edge_lat * std::numbers::pi / 180.0)));

  std::vector<std::pair<std::int64_t, VertexId>> keyed;
  keyed.reserve(g.vertex_count());
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    const GeoPoint& p = g.coordinate(v);
    keyed.emplace_back(cell_key(static_cast<std::int64_t>(std::floor(p.lat / cell_lat_)),
                                static_cast<std::int64_t>(std::floor(p.lon / cell_lon_))),
                       v);
  }
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i == 0 || keyed[i].first != keyed[i - 1].first) {
      cell_keys_.push_back(keyed[i].first);
      cell_start_.push_back(i);
    }
    cell_vertices_.push_back(keyed[i].second);
  }
  cell_start_.push_back(keyed.size());
}

std::int64_t TrajectoryMatcher::cell_key(std::int64_t row, std::int64_t col) const noexcept {
  return row * (std::int64_t{1} << 32) + col;
}

std::optional<VertexId> TrajectoryMatcher::nearest(const GeoPoint& p) const {
  const RoadNetwork& g = bundle_->network;
  const auto row = static_cast<std::int64_t>(std::floor(p.lat / cell_lat_));
  const auto col = static_cast<std::int64_t>(std::floor(p.lon / cell_lon_));
  std::optional<VertexId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::int64_t dr = -1; dr <= 1; ++dr) {
    for (std::int64_t dc = -1; dc <= 1; ++dc) {
      const std::int64_t key = cell_key(row + dr, col + dc);
      auto it = std::lower_bound(cell_keys_.begin(), cell_keys_.end(), key);
      if (it == cell_keys_.end() || *it != key) continue;
      const auto c = static_cast<std::size_t>(it - cell_keys_.begin());
      for (std::size_t i = cell_start_[c]; i < cell_start_[c + 1]; ++i) {
        const VertexId v = cell_vertices_[i];
        const double d = haversine_m(p, g.coordinate(v));
        if (d > options_.snap_radius_m) continue;
        // Dense order follows OSM id order, so the smaller index wins ties.
        if (d < best_d || (d == best_d && best && v < *best)) {
          best_d = d;
          best = v;
        }
      }
    }
  }
  return best;
}

std::optional<std::vector<VertexId>> TrajectoryMatcher::shortest_path(VertexId from, VertexId to) const {
  const RoadNetwork& g = bundle_->network;
  if (from == to) return std::vector<VertexId>{from};
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.vertex_count(), inf);
  std::vector<VertexId> prev(g.vertex_count(), std::numeric_limits<VertexId>::max());
  using Item = std::pair<double, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[from] = 0.0;
  heap.emplace(0.0, from);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (u == to) break;
    const auto succ = g.out_neighbors(u);
    const std::size_t base = g.digraph().row_offset(u);
    for (std::size_t i = 0; i < succ.size(); ++i) {
      const double len = g.length_m(base + i);
      const double w = options_.weight == RouteWeight::SquaredDistance ? len * len : len;
      const VertexId v = succ[i];
      if (d + w < dist[v]) {
        dist[v] = d + w;
        prev[v] = u;
        heap.emplace(dist[v], v);
      }
    }
  }
  if (dist[to] == inf) return std::nullopt;
  std::vector<VertexId> path{to};
  while (path.back() != from) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

MatchedTrajectory TrajectoryMatcher::match(const RawTrajectory& raw) const {
  MatchedTrajectory out;
  std::vector<VertexId> snapped;
  for (const GeoPoint& p : raw.points) {
    const auto v = nearest(p);
    if (!v) {
      ++out.dropped_points;
      continue;
    }
    if (snapped.empty() || snapped.back() != *v) snapped.push_back(*v);
  }
  if (snapped.empty()) throw Error(ErrorCode::NoUsablePoints, "no point within the snap radius");

  out.pieces.push_back({snapped.front()});
  for (std::size_t i = 1; i < snapped.size(); ++i) {
    auto path = shortest_path(snapped[i - 1], snapped[i]);
    if (!path) {
      out.pieces.push_back({snapped[i]});
      continue;
    }
    out.pieces.back().insert(out.pieces.back().end(), path->begin() + 1, path->end());
  }

  const RoadNetwork& g = bundle_->network;
  for (const auto& piece : out.pieces) {
    for (std::size_t j = 0; j + 1 < piece.size(); ++j) {
      if (!g.allows_transition(piece[j], piece[j + 1])) {
        throw Error(ErrorCode::InvalidInput, "matched piece leaves the graph");
      }
    }
  }
  return out;
}

MatchedTrajectory match_trajectory(const RawTrajectory& raw, const OsmGraphBundle& bundle,
                                   const MatchOptions& options) {
  return TrajectoryMatcher(bundle, options).match(raw);
}

MatchReport match_all(std::span<const RawTrajectory> raws, const TrajectoryMatcher& matcher,
                      unsigned threads) {
  std::vector<std::optional<MatchedTrajectory>> results(raws.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < raws.size(); i += step) {
      try {
        results[i] = matcher.match(raws[i]);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoUsablePoints) throw;
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, raws.size()));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  MatchReport report;
  for (auto& r : results) {
    if (!r) {
      ++report.unusable;
      continue;
    }
    ++report.matched;
    report.splits += r->pieces.size() - 1;
    report.dropped_points += r->dropped_points;
    for (auto& piece : r->pieces) report.corpus.push_back({std::move(piece), 1});
  }
  return report;
}

}  // namespace mtraffic
