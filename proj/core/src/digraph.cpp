#include "mtraffic/digraph.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "mtraffic/error.hpp"

namespace mtraffic {

Digraph Digraph::from_arcs(std::size_t vertex_count,
                           std::vector<std::pair<StateId, StateId>> arcs) {
  if (vertex_count > std::numeric_limits<StateId>::max()) {
    throw Error(ErrorCode::InvalidInput, "too many vertices");
  }
  for (const auto& [u, v] : arcs) {
    if (u >= vertex_count || v >= vertex_count) {
      throw Error(ErrorCode::InvalidInput,
                  "arc (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
    }
    if (u == v) throw Error(ErrorCode::LoopEdge, std::to_string(u));
  }
  std::sort(arcs.begin(), arcs.end());
  if (auto dup = std::adjacent_find(arcs.begin(), arcs.end()); dup != arcs.end()) {
    throw Error(ErrorCode::DuplicateEdge,
                "(" + std::to_string(dup->first) + "," + std::to_string(dup->second) + ")");
  }

  Digraph g;
  g.vertex_count_ = vertex_count;
  g.offsets_.assign(vertex_count + 1, 0);
  g.in_offsets_.assign(vertex_count + 1, 0);
  g.targets_.reserve(arcs.size());
  g.sources_.reserve(arcs.size());
  for (const auto& [u, v] : arcs) {
    ++g.offsets_[u + 1];
    ++g.in_offsets_[v + 1];
    g.sources_.push_back(u);
    g.targets_.push_back(v);
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  std::partial_sum(g.in_offsets_.begin(), g.in_offsets_.end(), g.in_offsets_.begin());

  // Arcs are sorted by (u,v), so filling by row keeps predecessor lists sorted too.
  g.in_sources_.resize(arcs.size());
  std::vector<std::size_t> cursor(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
  for (const auto& [u, v] : arcs) g.in_sources_[cursor[v]++] = u;
  return g;
}

std::span<const StateId> Digraph::successors(StateId u) const {
  return {targets_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
}

std::span<const StateId> Digraph::predecessors(StateId v) const {
  return {in_sources_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
}

std::optional<std::size_t> Digraph::arc_index(StateId u, StateId v) const {
  if (u >= vertex_count_ || v >= vertex_count_) return std::nullopt;
  auto row = successors(u);
  auto it = std::lower_bound(row.begin(), row.end(), v);
  if (it == row.end() || *it != v) return std::nullopt;
  return offsets_[u] + static_cast<std::size_t>(it - row.begin());
}

std::pair<StateId, StateId> Digraph::arc(std::size_t index) const {
  return {sources_[index], targets_[index]};
}

std::vector<std::pair<StateId, StateId>> Digraph::arcs() const {
  std::vector<std::pair<StateId, StateId>> out;
  out.reserve(targets_.size());
  for (std::size_t i = 0; i < targets_.size(); ++i) out.emplace_back(sources_[i], targets_[i]);
  return out;
}

SccResult strongly_connected_components(const Digraph& g) {
  constexpr auto kUnvisited = std::numeric_limits<std::uint32_t>::max();
  const std::size_t n = g.vertex_count();
  SccResult result;
  result.component.assign(n, kUnvisited);

  std::vector<std::uint32_t> index(n, kUnvisited);
  std::vector<std::uint32_t> low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<StateId> stack;
  std::uint32_t next_index = 0;

  struct Frame {
    StateId v;
    std::size_t next_child;
  };
  std::vector<Frame> call;

  for (StateId root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.push_back({root, 0});
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;

    while (!call.empty()) {
      Frame& frame = call.back();
      auto succ = g.successors(frame.v);
      if (frame.next_child < succ.size()) {
        StateId w = succ[frame.next_child++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[frame.v] = std::min(low[frame.v], index[w]);
        }
        continue;
      }
      StateId v = frame.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        const auto id = static_cast<std::uint32_t>(result.count++);
        StateId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          result.component[w] = id;
        } while (w != v);
      }
    }
  }
  return result;
}

namespace {

std::size_t count_reached(const Digraph& g, StateId source, bool forward,
                          std::span<const char> disabled, std::optional<StateId> stop_at) {
  std::vector<char> seen(g.vertex_count(), 0);
  std::queue<StateId> queue;
  seen[source] = 1;
  queue.push(source);
  std::size_t reached = 1;
  while (!queue.empty()) {
    StateId u = queue.front();
    queue.pop();
    if (stop_at && u == *stop_at) return reached;
    auto next = forward ? g.successors(u) : g.predecessors(u);
    for (StateId w : next) {
      if (!disabled.empty()) {
        auto arc = forward ? g.arc_index(u, w) : g.arc_index(w, u);
        if (disabled[*arc]) continue;
      }
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        queue.push(w);
      }
    }
  }
  if (stop_at && !seen[*stop_at]) return 0;
  return reached;
}

}  // namespace

bool is_strongly_connected(const Digraph& g, std::span<const char> disabled_arcs) {
  if (g.vertex_count() <= 1) return true;
  const std::size_t n = g.vertex_count();
  return count_reached(g, 0, true, disabled_arcs, std::nullopt) == n &&
         count_reached(g, 0, false, disabled_arcs, std::nullopt) == n;
}

bool reachable(const Digraph& g, StateId source, StateId target,
               std::span<const char> disabled_arcs) {
  if (source == target) return true;
  return count_reached(g, source, true, disabled_arcs, target) != 0;
}

std::size_t period(const Digraph& g) {
  if (!is_strongly_connected(g)) {
    throw Error(ErrorCode::NotStronglyConnected, "period is defined for strongly connected graphs");
  }
  const std::size_t n = g.vertex_count();
  if (n == 0) throw Error(ErrorCode::InvalidInput, "empty graph");
  if (g.arc_count() == 0) return 1;  // a single vertex has no cycles; treat as aperiodic

  std::vector<std::int64_t> level(n, -1);
  std::queue<StateId> queue;
  level[0] = 0;
  queue.push(0);
  while (!queue.empty()) {
    StateId u = queue.front();
    queue.pop();
    for (StateId w : g.successors(u)) {
      if (level[w] < 0) {
        level[w] = level[u] + 1;
        queue.push(w);
      }
    }
  }
  std::int64_t d = 0;
  for (StateId u = 0; u < n; ++u) {
    for (StateId w : g.successors(u)) {
      std::int64_t diff = level[u] + 1 - level[w];
      if (diff < 0) diff = -diff;
      if (diff != 0) d = std::gcd(d, diff);
    }
  }
  return static_cast<std::size_t>(d);
}

}  // namespace mtraffic
