#include <functional>
#include <map>
#include <sstream>

#include "doctest.h"
#include "mtraffic/error.hpp"
#include "toy.hpp"

using namespace mtraffic;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

Edge ext(const RoadNetwork& g, ExternalId a, ExternalId b) { return {*g.find_vertex(a), *g.find_vertex(b)}; }

}  // namespace

TEST_CASE("toy network size and degrees") {
  const RoadNetwork g = toy::network();
  CHECK(g.vertex_count() == 5);
  CHECK(g.edge_count() == 8);
  CHECK(g.in_degrees() == std::vector<std::size_t>{1, 3, 1, 2, 1});
  CHECK(g.out_degrees() == std::vector<std::size_t>{1, 3, 1, 2, 1});
  CHECK(g.allows_transition(0, 0));
  CHECK_FALSE(g.allows_transition(0, 2));
}

TEST_CASE("loops are rejected, empty graphs are not") {
  const std::vector<Edge> loop = {{0, 1}, {2, 2}};
  CHECK(code_of([&] { RoadNetwork::build(3, loop); }) == ErrorCode::LoopEdge);
  const RoadNetwork single = RoadNetwork::build(1, {});
  CHECK(single.vertex_count() == 1);
  CHECK(single.edge_count() == 0);
  CHECK(is_strongly_connected(single));
}

TEST_CASE("line digraph") {
  const RoadNetwork g = toy::network();
  const LineDigraph l = line_digraph(g);
  CHECK(l.vertex_count() == 8);
  for (const auto& [a, b] : std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {3, 4}, {4, 2}, {2, 1}, {2, 4}, {4, 5}, {5, 2}}) {
    CHECK(l.find_vertex(ext(g, a, b)).has_value());
  }
  const LineDigraph one = line_digraph(toy::from_pairs({{1, 2}}));
  CHECK(one.vertex_count() == 1);
  CHECK(one.digraph().arc_count() == 0);

  const RoadNetwork cyc = toy::from_pairs({{1, 2}, {2, 1}});
  const LineDigraph lc = line_digraph(cyc);
  CHECK(lc.digraph().arc_count() == 2);
  CHECK(lc.digraph().has_arc(*lc.find_vertex(ext(cyc, 1, 2)), *lc.find_vertex(ext(cyc, 2, 1))));
}

TEST_CASE("minimal line digraph matches the edge-kernel support") {
  const RoadNetwork g = toy::network();
  const LineDigraph m = minimal_line_digraph(g);
  const LineDigraph full = line_digraph(g);
  CHECK(m.vertex_count() == 8);
  const auto s12 = *m.find_vertex(ext(g, 1, 2));
  const auto s21 = *m.find_vertex(ext(g, 2, 1));
  CHECK_FALSE(m.digraph().has_arc(s12, s21));
  CHECK(m.digraph().has_arc(s21, s12));
  CHECK(full.digraph().has_arc(s12, s21));
  CHECK(is_strongly_connected(m));

  // Arc count of the support: 21 entries minus 8 waiting cells.
  CHECK(m.digraph().arc_count() == 13);

  const RoadNetwork cyc = toy::from_pairs({{1, 2}, {2, 1}});
  CHECK(minimal_line_digraph(cyc).digraph().arc_count() == 2);

  const RoadNetwork tri = toy::from_pairs({{1, 2}, {2, 3}, {3, 1}});
  CHECK(minimal_line_digraph(tri).digraph().arcs() == line_digraph(tri).digraph().arcs());
}

TEST_CASE("closing a network through the ideal vertex") {
  const RoadNetwork g = toy::network();
  const std::vector<VertexId> exits{*g.find_vertex(5)};
  const std::vector<VertexId> entries{*g.find_vertex(1)};
  const ClosedRoadNetwork c = close_network(g, exits, entries);
  CHECK(c.network().vertex_count() == 6);
  CHECK(c.network().edge_count() == 10);
  CHECK(c.network().external_id(c.ideal_vertex()) == 0);
  CHECK(code_of([&] { close_network(g, {}, entries); }) == ErrorCode::EmptyBoundary);

  const RoadNetwork split = toy::from_pairs({{1, 2}, {2, 1}, {3, 4}, {4, 3}});
  CHECK_FALSE(is_strongly_connected(split));
  const std::vector<VertexId> ex{*split.find_vertex(2), *split.find_vertex(4)};
  const std::vector<VertexId> en{*split.find_vertex(1), *split.find_vertex(3)};
  CHECK(is_strongly_connected(close_network(split, ex, en)));
}

TEST_CASE("strong connectivity and period") {
  CHECK(is_strongly_connected(toy::network()));
  CHECK_FALSE(is_strongly_connected(toy::from_pairs({{1, 2}, {2, 1}, {2, 3}, {2, 4}, {3, 4}, {4, 2}, {4, 5}})));
  CHECK(period(toy::network()) == 1);
  CHECK(period(toy::from_pairs({{1, 2}, {2, 3}, {3, 1}})) == 3);
  CHECK(period(toy::from_pairs({{1, 2}, {2, 3}, {3, 4}, {4, 1}, {2, 1}})) == 2);
}

TEST_CASE("adjacency powers count walks") {
  const RoadNetwork g = toy::network();
  const IntMatrix a4 = adjacency_power(g, 4);
  const std::vector<long long> row2{2, 5, 2, 4, 2};
  for (int j = 0; j < 5; ++j) CHECK(a4(1, j) == row2[static_cast<std::size_t>(j)]);
  CHECK(a4(1, 3) == 4);
  CHECK(adjacency_power(g, 1) == adjacency_matrix(g));
}

TEST_CASE("degree histograms") {
  const DegreeHistograms h = degree_histograms(toy::network());
  CHECK(h.vertex_out.bins == std::map<std::size_t, std::size_t>{{1, 3}, {2, 1}, {3, 1}});
  CHECK(h.vertex_in.bins == h.vertex_out.bins);
  const DegreeHistograms empty = degree_histograms(RoadNetwork::build(3, {}));
  CHECK(empty.vertex_out.bins == std::map<std::size_t, std::size_t>{{0, 3}});
  CHECK(empty.vertex_in.bins == std::map<std::size_t, std::size_t>{{0, 3}});
}

TEST_CASE("graph files round-trip") {
  const RoadNetwork g = toy::network();
  std::ostringstream a;
  write_graph(a, g);
  std::istringstream in(a.str());
  const RoadNetwork back = read_graph(in);
  std::ostringstream b;
  write_graph(b, back);
  CHECK(a.str() == b.str());
  CHECK(back.external_ids().size() == 5);
}
