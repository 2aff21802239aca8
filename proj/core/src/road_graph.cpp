#include "mtraffic/road_graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mtraffic/error.hpp"

namespace mtraffic {

RoadNetwork RoadNetwork::build(std::size_t vertex_count, std::span<const Edge> edges,
                               std::vector<ExternalId> external_ids,
                               std::vector<GeoPoint> coordinates, std::vector<double> lengths_m) {
  if (external_ids.empty()) {
    external_ids.resize(vertex_count);
    std::iota(external_ids.begin(), external_ids.end(), ExternalId{0});
  }
  if (external_ids.size() != vertex_count) {
    throw Error(ErrorCode::SizeMismatch, "external id count differs from vertex count");
  }
  if (!coordinates.empty() && coordinates.size() != vertex_count) {
    throw Error(ErrorCode::SizeMismatch, "coordinate count differs from vertex count");
  }
  if (!lengths_m.empty() && lengths_m.size() != edges.size()) {
    throw Error(ErrorCode::SizeMismatch, "length count differs from edge count");
  }

  RoadNetwork g;
  for (VertexId v = 0; v < vertex_count; ++v) {
    if (!g.by_external_.emplace(external_ids[v], v).second) {
      throw Error(ErrorCode::InvalidInput,
                  "external id " + std::to_string(external_ids[v]) + " used twice");
    }
  }

  std::vector<std::pair<StateId, StateId>> arcs;
  arcs.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.from >= vertex_count || e.to >= vertex_count) {
      throw Error(ErrorCode::InvalidInput, "edge endpoint out of range");
    }
    if (e.from == e.to) throw Error(ErrorCode::LoopEdge, std::to_string(external_ids[e.from]));
    arcs.emplace_back(e.from, e.to);
  }
  try {
    g.graph_ = Digraph::from_arcs(vertex_count, arcs);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::DuplicateEdge) throw;
    std::sort(arcs.begin(), arcs.end());
    auto dup = std::adjacent_find(arcs.begin(), arcs.end());
    throw Error(ErrorCode::DuplicateEdge, "(" + std::to_string(external_ids[dup->first]) + "," +
                                              std::to_string(external_ids[dup->second]) + ")");
  }

  g.edges_.reserve(edges.size());
  for (const auto& [u, v] : g.graph_.arcs()) g.edges_.push_back({u, v});
  if (!lengths_m.empty()) {
    g.lengths_m_.resize(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      g.lengths_m_[*g.graph_.arc_index(edges[i].from, edges[i].to)] = lengths_m[i];
    }
  }
  g.external_ids_ = std::move(external_ids);
  g.coordinates_ = std::move(coordinates);
  return g;
}

RoadNetwork RoadNetwork::from_external_edges(
    std::span<const std::pair<ExternalId, ExternalId>> edges, std::span<const ExternalId> isolated) {
  std::vector<ExternalId> ids(isolated.begin(), isolated.end());
  for (const auto& [u, v] : edges) {
    if (u == v) throw Error(ErrorCode::LoopEdge, std::to_string(u));
    ids.push_back(u);
    ids.push_back(v);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  auto dense = [&](ExternalId id) {
    return static_cast<VertexId>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<Edge> dense_edges;
  dense_edges.reserve(edges.size());
  for (const auto& [u, v] : edges) dense_edges.push_back({dense(u), dense(v)});
  const std::size_t n = ids.size();
  return build(n, dense_edges, std::move(ids));
}

std::vector<std::size_t> RoadNetwork::out_degrees() const {
  std::vector<std::size_t> d(vertex_count());
  for (VertexId v = 0; v < d.size(); ++v) d[v] = out_degree(v);
  return d;
}

std::vector<std::size_t> RoadNetwork::in_degrees() const {
  std::vector<std::size_t> d(vertex_count());
  for (VertexId v = 0; v < d.size(); ++v) d[v] = in_degree(v);
  return d;
}

std::optional<VertexId> RoadNetwork::find_vertex(ExternalId id) const {
  auto it = by_external_.find(id);
  if (it == by_external_.end()) return std::nullopt;
  return it->second;
}

LineDigraph::LineDigraph(std::vector<Edge> base_edges, Digraph arcs,
                         std::optional<VertexId> ideal_vertex)
    : base_edges_(std::move(base_edges)), arcs_(std::move(arcs)), ideal_vertex_(ideal_vertex) {}

std::optional<StateId> LineDigraph::find_vertex(Edge e) const {
  auto it = std::lower_bound(base_edges_.begin(), base_edges_.end(), e);
  if (it == base_edges_.end() || *it != e) return std::nullopt;
  return static_cast<StateId>(it - base_edges_.begin());
}

ClosedRoadNetwork::ClosedRoadNetwork(RoadNetwork closure, std::vector<VertexId> exits,
                                     std::vector<VertexId> entries)
    : closure_(std::move(closure)), exits_(std::move(exits)), entries_(std::move(entries)) {}

namespace {

std::vector<std::pair<StateId, StateId>> line_arcs(const RoadNetwork& g) {
  std::vector<std::pair<StateId, StateId>> arcs;
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const VertexId v = g.edge(e).to;
    const auto first = static_cast<StateId>(g.digraph().row_offset(v));
    for (std::size_t k = 0; k < g.out_degree(v); ++k) {
      arcs.emplace_back(static_cast<StateId>(e), static_cast<StateId>(first + k));
    }
  }
  return arcs;
}

}  // namespace

LineDigraph line_digraph(const RoadNetwork& g) {
  std::vector<Edge> base(g.edges().begin(), g.edges().end());
  return {std::move(base), Digraph::from_arcs(g.edge_count(), line_arcs(g)), std::nullopt};
}

LineDigraph line_digraph(const ClosedRoadNetwork& g) {
  const RoadNetwork& c = g.network();
  std::vector<Edge> base(c.edges().begin(), c.edges().end());
  return {std::move(base), Digraph::from_arcs(c.edge_count(), line_arcs(c)), g.ideal_vertex()};
}

LineDigraph minimal_line_digraph(const RoadNetwork& g) {
  LineDigraph full = line_digraph(g);
  const Digraph& d = full.digraph();
  if (!is_strongly_connected(d)) {
    throw Error(ErrorCode::NotStronglyConnected, "line digraph is not strongly connected");
  }

  std::vector<char> removed(d.arc_count(), 0);
  for (std::size_t a = 0; a < d.arc_count(); ++a) {
    const auto [e, f] = d.arc(a);
    const Edge& ee = full.vertex(e);
    const Edge& ff = full.vertex(f);
    if (ee.from != ff.to) continue;
    // In a strongly connected digraph, dropping arc e->f keeps it strongly
    // connected exactly when f is still reachable from e.
    removed[a] = 1;
    if (!reachable(d, e, f, removed)) removed[a] = 0;
  }

  std::vector<std::pair<StateId, StateId>> kept;
  kept.reserve(d.arc_count());
  for (std::size_t a = 0; a < d.arc_count(); ++a) {
    if (!removed[a]) kept.push_back(d.arc(a));
  }
  std::vector<Edge> base(full.vertices().begin(), full.vertices().end());
  return {std::move(base), Digraph::from_arcs(full.vertex_count(), std::move(kept)), std::nullopt};
}

ClosedRoadNetwork close_network(const RoadNetwork& g, std::span<const VertexId> exits,
                                std::span<const VertexId> entries) {
  if (exits.empty()) throw Error(ErrorCode::EmptyBoundary, "no exit vertices");
  if (entries.empty()) throw Error(ErrorCode::EmptyBoundary, "no entry vertices");
  const std::size_t n = g.vertex_count();
  const auto ideal = static_cast<VertexId>(n);

  auto normalize = [n](std::span<const VertexId> in) {
    std::vector<VertexId> out(in.begin(), in.end());
    for (VertexId v : out) {
      if (v >= n) throw Error(ErrorCode::InvalidInput, "boundary vertex out of range");
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  std::vector<VertexId> ex = normalize(exits);
  std::vector<VertexId> en = normalize(entries);

  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  std::vector<double> lengths;
  if (g.has_lengths()) lengths.assign(g.lengths_m().begin(), g.lengths_m().end());
  for (VertexId u : ex) edges.push_back({u, ideal});
  for (VertexId v : en) edges.push_back({ideal, v});
  if (g.has_lengths()) lengths.resize(edges.size(), 0.0);

  std::vector<ExternalId> ids(g.external_ids().begin(), g.external_ids().end());
  // The ideal vertex is labelled 0 unless the base graph already uses that id.
  ExternalId ideal_id = 0;
  if (g.find_vertex(0)) ideal_id = std::min<ExternalId>(*std::min_element(ids.begin(), ids.end()), 0) - 1;
  ids.push_back(ideal_id);

  std::vector<GeoPoint> coords;
  if (g.has_coordinates()) {
    coords.assign(g.coordinates().begin(), g.coordinates().end());
    coords.push_back({});
  }
  RoadNetwork closure = RoadNetwork::build(n + 1, edges, std::move(ids), std::move(coords),
                                           std::move(lengths));
  return {std::move(closure), std::move(ex), std::move(en)};
}

bool is_strongly_connected(const RoadNetwork& g) { return is_strongly_connected(g.digraph()); }
bool is_strongly_connected(const LineDigraph& g) { return is_strongly_connected(g.digraph()); }
bool is_strongly_connected(const ClosedRoadNetwork& g) {
  return is_strongly_connected(g.network().digraph());
}

std::size_t period(const RoadNetwork& g) { return period(g.digraph()); }

IntMatrix adjacency_matrix(const RoadNetwork& g) {
  const auto n = static_cast<Eigen::Index>(g.vertex_count());
  IntMatrix a = IntMatrix::Zero(n, n);
  for (const Edge& e : g.edges()) a(e.from, e.to) = 1;
  return a;
}

namespace {

IntMatrix checked_product(const IntMatrix& x, const IntMatrix& y) {
  const Eigen::Index n = x.rows();
  IntMatrix out = IntMatrix::Zero(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      const std::int64_t xik = x(i, k);
      if (xik == 0) continue;
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        std::int64_t term;
        if (__builtin_mul_overflow(xik, y(k, j), &term) ||
            __builtin_add_overflow(out(i, j), term, &out(i, j))) {
          throw Error(ErrorCode::Overflow, "walk count exceeds 64-bit range");
        }
      }
    }
  }
  return out;
}

}  // namespace

IntMatrix adjacency_power(const RoadNetwork& g, unsigned k) {
  if (k == 0) throw Error(ErrorCode::InvalidInput, "power must be at least 1");
  const IntMatrix a = adjacency_matrix(g);
  IntMatrix result = a;
  for (unsigned i = 1; i < k; ++i) result = checked_product(result, a);
  return result;
}

DegreeHistograms degree_histograms(const RoadNetwork& g) {
  DegreeHistograms h;
  h.vertex_in.kind = DegreeKind::VertexIn;
  h.vertex_out.kind = DegreeKind::VertexOut;
  h.edge_in.kind = DegreeKind::EdgeIn;
  h.edge_out.kind = DegreeKind::EdgeOut;
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    const std::size_t din = g.in_degree(v);
    const std::size_t dout = g.out_degree(v);
    ++h.vertex_in.bins[din];
    ++h.vertex_out.bins[dout];
    h.edge_out.bins[dout] += din;
    h.edge_in.bins[din] += dout;
  }
  return h;
}

std::string_view to_string(DegreeKind kind) noexcept {
  switch (kind) {
    case DegreeKind::VertexIn: return "vertex_in";
    case DegreeKind::VertexOut: return "vertex_out";
    case DegreeKind::EdgeIn: return "edge_in";
    case DegreeKind::EdgeOut: return "edge_out";
  }
  return "unknown";
}

}  // namespace mtraffic
