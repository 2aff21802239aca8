#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace mtraffic {

/// Dense index of a state (vertex of a road network or of a line digraph).
using StateId = std::uint32_t;

/// Immutable loop-free simple digraph in compressed sparse row form.
///
/// Successor and predecessor lists are sorted ascending, so arc positions in
/// the successor array give a stable arc numbering (row-major by source).
class Digraph {
 public:
  Digraph() = default;

  /// Throws LoopEdge / DuplicateEdge / InvalidInput on bad arcs.
  static Digraph from_arcs(std::size_t vertex_count,
                           std::vector<std::pair<StateId, StateId>> arcs);

  [[nodiscard]] std::size_t vertex_count() const noexcept { return vertex_count_; }
  [[nodiscard]] std::size_t arc_count() const noexcept { return targets_.size(); }

  [[nodiscard]] std::span<const StateId> successors(StateId u) const;
  [[nodiscard]] std::span<const StateId> predecessors(StateId v) const;
  [[nodiscard]] std::size_t out_degree(StateId u) const { return successors(u).size(); }
  [[nodiscard]] std::size_t in_degree(StateId v) const { return predecessors(v).size(); }

  /// Row-major position of arc (u,v), if present.
  [[nodiscard]] std::optional<std::size_t> arc_index(StateId u, StateId v) const;
  [[nodiscard]] bool has_arc(StateId u, StateId v) const { return arc_index(u, v).has_value(); }
  [[nodiscard]] std::pair<StateId, StateId> arc(std::size_t index) const;

  /// First arc position of row u; arcs of u occupy [row_offset(u), row_offset(u+1)).
  [[nodiscard]] std::size_t row_offset(StateId u) const { return offsets_[u]; }

  /// All arcs in row-major order.
  [[nodiscard]] std::vector<std::pair<StateId, StateId>> arcs() const;

 private:
  std::size_t vertex_count_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<StateId> targets_;
  std::vector<StateId> sources_;  // source of each arc, parallel to targets_
  std::vector<std::size_t> in_offsets_{0};
  std::vector<StateId> in_sources_;
};

struct SccResult {
  std::vector<std::uint32_t> component;  // component id per vertex
  std::size_t count = 0;
};

/// Tarjan's algorithm, iterative. Component ids are in reverse topological order.
SccResult strongly_connected_components(const Digraph& g);

/// `disabled_arcs`, when given, masks arcs by row-major position.
bool is_strongly_connected(const Digraph& g, std::span<const char> disabled_arcs = {});

/// Breadth-first reachability honouring the same arc mask.
bool reachable(const Digraph& g, StateId source, StateId target,
               std::span<const char> disabled_arcs = {});

/// gcd of cycle lengths. Throws NotStronglyConnected.
std::size_t period(const Digraph& g);

}  // namespace mtraffic
