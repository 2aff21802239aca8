#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mtraffic/digraph.hpp"

namespace mtraffic {

using VertexId = StateId;
using EdgeId = std::size_t;
/// Identifier from the data source (OSM node id, or the labels of a hand-written graph).
using ExternalId = std::int64_t;

struct Edge {
  VertexId from = 0;
  VertexId to = 0;
  auto operator<=>(const Edge&) const = default;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

/// Simple loop-free road digraph on dense vertex indices.
///
/// Edges are kept sorted by (from, to); an EdgeId is the position in that order.
/// Each vertex carries an external id, and optionally coordinates; each edge
/// optionally carries a length in meters.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// `external_ids` defaults to the dense index. `lengths_m`, when given, is
  /// parallel to `edges` as passed in (not to the sorted order).
  static RoadNetwork build(std::size_t vertex_count, std::span<const Edge> edges,
                           std::vector<ExternalId> external_ids = {},
                           std::vector<GeoPoint> coordinates = {},
                           std::vector<double> lengths_m = {});

  /// Dense indices are assigned in ascending external-id order. Extra ids in
  /// `isolated` become vertices without incident edges.
  static RoadNetwork from_external_edges(std::span<const std::pair<ExternalId, ExternalId>> edges,
                                         std::span<const ExternalId> isolated = {});

  [[nodiscard]] std::size_t vertex_count() const noexcept { return graph_.vertex_count(); }
  [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
  [[nodiscard]] const Digraph& digraph() const noexcept { return graph_; }
  [[nodiscard]] std::span<const Edge> edges() const noexcept { return edges_; }
  [[nodiscard]] const Edge& edge(EdgeId id) const { return edges_[id]; }

  [[nodiscard]] std::optional<EdgeId> edge_id(VertexId u, VertexId v) const {
    return graph_.arc_index(u, v);
  }
  [[nodiscard]] bool has_edge(VertexId u, VertexId v) const { return graph_.has_arc(u, v); }
  /// u => v: an edge or staying put.
  [[nodiscard]] bool allows_transition(VertexId u, VertexId v) const {
    return (u == v && u < vertex_count()) || has_edge(u, v);
  }

  [[nodiscard]] std::span<const VertexId> out_neighbors(VertexId u) const {
    return graph_.successors(u);
  }
  [[nodiscard]] std::span<const VertexId> in_neighbors(VertexId v) const {
    return graph_.predecessors(v);
  }
  [[nodiscard]] std::size_t out_degree(VertexId u) const { return graph_.out_degree(u); }
  [[nodiscard]] std::size_t in_degree(VertexId v) const { return graph_.in_degree(v); }
  [[nodiscard]] std::vector<std::size_t> out_degrees() const;
  [[nodiscard]] std::vector<std::size_t> in_degrees() const;

  [[nodiscard]] ExternalId external_id(VertexId v) const { return external_ids_[v]; }
  [[nodiscard]] std::span<const ExternalId> external_ids() const noexcept { return external_ids_; }
  [[nodiscard]] std::optional<VertexId> find_vertex(ExternalId id) const;

  [[nodiscard]] bool has_coordinates() const noexcept { return !coordinates_.empty(); }
  [[nodiscard]] const GeoPoint& coordinate(VertexId v) const { return coordinates_[v]; }
  [[nodiscard]] std::span<const GeoPoint> coordinates() const noexcept { return coordinates_; }

  [[nodiscard]] bool has_lengths() const noexcept { return !lengths_m_.empty(); }
  [[nodiscard]] double length_m(EdgeId id) const { return lengths_m_[id]; }
  [[nodiscard]] std::span<const double> lengths_m() const noexcept { return lengths_m_; }

 private:
  Digraph graph_;
  std::vector<Edge> edges_;
  std::vector<ExternalId> external_ids_;
  std::unordered_map<ExternalId, VertexId> by_external_;
  std::vector<GeoPoint> coordinates_;
  std::vector<double> lengths_m_;
};

/// Directed line graph: one vertex per base edge, arcs (u,v) -> (v,w).
class LineDigraph {
 public:
  LineDigraph() = default;
  LineDigraph(std::vector<Edge> base_edges, Digraph arcs, std::optional<VertexId> ideal_vertex);

  [[nodiscard]] std::size_t vertex_count() const noexcept { return base_edges_.size(); }
  [[nodiscard]] std::span<const Edge> vertices() const noexcept { return base_edges_; }
  [[nodiscard]] const Edge& vertex(StateId id) const { return base_edges_[id]; }
  [[nodiscard]] std::optional<StateId> find_vertex(Edge e) const;
  [[nodiscard]] const Digraph& digraph() const noexcept { return arcs_; }
  /// Set when built from a closed network; the index of the outside-world vertex in the base.
  [[nodiscard]] std::optional<VertexId> ideal_vertex() const noexcept { return ideal_vertex_; }

 private:
  std::vector<Edge> base_edges_;
  Digraph arcs_;
  std::optional<VertexId> ideal_vertex_;
};

/// Road network augmented with an ideal vertex standing for the world outside.
///
/// The ideal vertex is the last dense index; its external id is 0.
class ClosedRoadNetwork {
 public:
  ClosedRoadNetwork(RoadNetwork closure, std::vector<VertexId> exits,
                    std::vector<VertexId> entries);

  [[nodiscard]] const RoadNetwork& network() const noexcept { return closure_; }
  [[nodiscard]] VertexId ideal_vertex() const noexcept {
    return static_cast<VertexId>(closure_.vertex_count() - 1);
  }
  [[nodiscard]] std::size_t base_vertex_count() const noexcept { return closure_.vertex_count() - 1; }
  [[nodiscard]] std::span<const VertexId> exits() const noexcept { return exits_; }
  [[nodiscard]] std::span<const VertexId> entries() const noexcept { return entries_; }

 private:
  RoadNetwork closure_;
  std::vector<VertexId> exits_;
  std::vector<VertexId> entries_;
};

LineDigraph line_digraph(const RoadNetwork& g);
LineDigraph line_digraph(const ClosedRoadNetwork& g);

/// Removes reversal arcs (u,v)->(v,u) greedily in ascending (u,v) order, keeping
/// each removal only if the line digraph stays strongly connected.
/// Throws NotStronglyConnected when L(g) itself is not strongly connected.
LineDigraph minimal_line_digraph(const RoadNetwork& g);

/// Throws EmptyBoundary, InvalidInput.
ClosedRoadNetwork close_network(const RoadNetwork& g, std::span<const VertexId> exits,
                                std::span<const VertexId> entries);

bool is_strongly_connected(const RoadNetwork& g);
bool is_strongly_connected(const LineDigraph& g);
bool is_strongly_connected(const ClosedRoadNetwork& g);

std::size_t period(const RoadNetwork& g);

using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

IntMatrix adjacency_matrix(const RoadNetwork& g);

/// Exact A^k. Throws Overflow if any intermediate entry leaves int64.
IntMatrix adjacency_power(const RoadNetwork& g, unsigned k);

enum class DegreeKind { VertexIn, VertexOut, EdgeIn, EdgeOut };

struct DegreeHistogram {
  DegreeKind kind = DegreeKind::VertexOut;
  std::map<std::size_t, std::size_t> bins;  // degree -> count
};

struct DegreeHistograms {
  DegreeHistogram vertex_in;
  DegreeHistogram vertex_out;
  DegreeHistogram edge_in;
  DegreeHistogram edge_out;
};

DegreeHistograms degree_histograms(const RoadNetwork& g);

std::string_view to_string(DegreeKind kind) noexcept;

/// JSON object keyed by histogram kind, each a list of {degree, count}.
std::string histograms_to_json(const DegreeHistograms& h);
/// `degree,count` CSV for one histogram.
void write_histogram_csv(std::ostream& out, const DegreeHistogram& h);

// Graph text format:
//   V <count>
//   N <index> <external_id> [<lat> <lon>]     (omitted when ids are the identity and no coordinates)
//   E <from> <to> [<length_m>]                 (dense indices)
// Lines starting with '#' are comments. Numbers are written in shortest round-trip form.
void write_graph(std::ostream& out, const RoadNetwork& g);
RoadNetwork read_graph(std::istream& in);
RoadNetwork load_graph_file(const std::string& path);
void save_graph_file(const std::string& path, const RoadNetwork& g);

}  // namespace mtraffic
