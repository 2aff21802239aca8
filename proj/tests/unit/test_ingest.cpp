#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mtraffic/error.hpp"
#include "mtraffic/ingest.hpp"
#include "toy.hpp"

using namespace mtraffic;
using doctest::Approx;

namespace {

const std::string kDir = MTRAFFIC_FIXTURES;

std::vector<std::pair<ExternalId, ExternalId>> external_edges(const RoadNetwork& g) {
  std::vector<std::pair<ExternalId, ExternalId>> out;
  for (const Edge& e : g.edges()) out.emplace_back(g.external_id(e.from), g.external_id(e.to));
  std::sort(out.begin(), out.end());
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

TtpOptions porto_morning() {
  TtpOptions o;
  o.bbox = parse_bbox("-8.6518,41.1129,-8.5771,41.1756");
  o.window = parse_time_window("08:00-09:00");
  return o;
}

}  // namespace

TEST_CASE("bounding boxes and distances") {
  const BoundingBox b = parse_bbox("-8.6518,41.1129,-8.5771,41.1756");
  CHECK(b.contains({41.15, -8.61}));
  CHECK_FALSE(b.contains({38.7, -9.5}));
  CHECK(code_of([] { parse_bbox("1,2,3"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { parse_bbox("5,0,1,1"); }) == ErrorCode::InvalidInput);
  // One degree of latitude on the mean sphere.
  CHECK(haversine_m({0, 0}, {1, 0}) == Approx(111195.08).epsilon(1e-6));
}

TEST_CASE("two ways sharing a node") {
  const OsmGraphBundle b = load_osm_file(kDir + "/two_ways.osm");
  CHECK(b.network.vertex_count() == 6);
  CHECK(b.network.edge_count() == 10);
  CHECK_FALSE(b.vertex_of(900).has_value());
  const auto e = *b.network.edge_id(*b.vertex_of(101), *b.vertex_of(102));
  REQUIRE(b.way_names[e].has_value());
  CHECK(*b.way_names[e] == "Rua A");
  CHECK(b.weight(e) == Approx(b.network.length_m(e) * b.network.length_m(e)));
  const StreetGrouping sg = street_grouping(b);
  CHECK(sg.group[*b.vertex_of(101)] == sg.group[*b.vertex_of(102)]);
  CHECK(sg.group[*b.vertex_of(101)] != sg.group[*b.vertex_of(106)]);
}

TEST_CASE("oneway tags") {
  const OsmGraphBundle b = load_osm_file(kDir + "/oneway.osm");
  CHECK(external_edges(b.network) == std::vector<std::pair<ExternalId, ExternalId>>{{1, 2}, {2, 3}, {4, 3}, {5, 4}});
}

TEST_CASE("osm filters and errors") {
  OsmOptions far;
  far.bbox = parse_bbox("0,0,1,1");
  CHECK(code_of([&] { load_osm_file(kDir + "/two_ways.osm", far); }) == ErrorCode::EmptyResult);
  std::istringstream broken("<osm><node id=\"1\" lat=\"1\" lon=\"1\"></osm>");
  CHECK(code_of([&] { parse_osm(broken); }) == ErrorCode::MalformedXml);

  OsmOptions footways;
  footways.highways = {"footway"};
  const OsmGraphBundle f = load_osm_file(kDir + "/two_ways.osm", footways);
  CHECK(f.network.edge_count() == 2);
}

TEST_CASE("local time in Lisbon") {
  CHECK(lisbon_minute_of_day(1372663800) == 8 * 60 + 30);  // July, summer time
  CHECK(lisbon_minute_of_day(1389348000) == 10 * 60);      // January
  const TimeWindow w = parse_time_window("23:00-01:00");
  CHECK(w.contains(23 * 60 + 30));
  CHECK(w.contains(30));
  CHECK_FALSE(w.contains(12 * 60));
  CHECK(code_of([] { parse_time_window("8-9"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("taxi trip csv") {
  const TtpFile f = load_ttp_file(kDir + "/trips.csv", porto_morning());
  CHECK(f.summary.rows == 7);
  CHECK(f.summary.kept == 2);
  REQUIRE(f.trajectories.size() == 2);
  CHECK(f.trajectories[0].trip_id == "T1");
  CHECK(f.trajectories[0].points.size() == 5);
  CHECK(f.trajectories[0].points[0].lon == Approx(-8.61));
  CHECK(f.trajectories[0].points[0].lat == Approx(41.15));
  std::vector<TtpDropReason> reasons;
  for (const auto& d : f.summary.dropped) reasons.push_back(d.reason);
  CHECK(reasons == std::vector<TtpDropReason>{TtpDropReason::MissingData, TtpDropReason::OutsideWindow,
                                              TtpDropReason::OutsideBbox, TtpDropReason::TooShort,
                                              TtpDropReason::ParseError});

  std::istringstream no_polyline("\"TRIP_ID\",\"TIMESTAMP\",\"MISSING_DATA\"\n");
  CHECK(code_of([&] { read_ttp(no_polyline); }) == ErrorCode::ParseError);
}

TEST_CASE("matching snaps and interpolates") {
  const OsmGraphBundle b = load_osm_file(kDir + "/two_ways.osm");
  const TrajectoryMatcher m(b);
  const RoadNetwork& g = b.network;
  auto point_of = [&](std::int64_t id) { return g.coordinate(*b.vertex_of(id)); };

  RawTrajectory adjacent;
  adjacent.points = {point_of(101), point_of(102)};
  const MatchedTrajectory a = m.match(adjacent);
  REQUIRE(a.pieces.size() == 1);
  CHECK(a.pieces[0] == std::vector<VertexId>{*b.vertex_of(101), *b.vertex_of(102)});

  RawTrajectory skip;
  skip.points = {point_of(101), point_of(103)};
  const MatchedTrajectory s = m.match(skip);
  REQUIRE(s.pieces.size() == 1);
  CHECK(s.pieces[0] == std::vector<VertexId>{*b.vertex_of(101), *b.vertex_of(102), *b.vertex_of(103)});

  RawTrajectory nowhere;
  nowhere.points = {{0.0, 0.0}};
  CHECK(code_of([&] { (void)m.match(nowhere); }) == ErrorCode::NoUsablePoints);
}

TEST_CASE("matching splits at unreachable gaps") {
  const OsmGraphBundle b = load_osm_file(kDir + "/islands.osm");
  const TtpFile f = load_ttp_file(kDir + "/trips.csv", porto_morning());
  const RawTrajectory& t7 = f.trajectories.at(1);
  const MatchedTrajectory m = match_trajectory(t7, b);
  REQUIRE(m.pieces.size() == 2);
  CHECK(m.pieces[0] == std::vector<VertexId>{*b.vertex_of(1), *b.vertex_of(2)});
  CHECK(m.pieces[1] == std::vector<VertexId>{*b.vertex_of(7), *b.vertex_of(8)});

  const TrajectoryMatcher matcher(b);
  const MatchReport serial = match_all(f.trajectories, matcher, 1);
  const MatchReport parallel = match_all(f.trajectories, matcher, 2);
  CHECK(serial.splits == 1);
  CHECK(serial.matched == 2);
  REQUIRE(serial.corpus.size() == parallel.corpus.size());
  for (std::size_t i = 0; i < serial.corpus.size(); ++i) CHECK(serial.corpus[i].vertices == parallel.corpus[i].vertices);
}

TEST_CASE("descriptive statistics") {
  const Summary empty = summarize({});
  CHECK_FALSE(empty.defined);

  const std::vector<double> v{1, 2, 2, 3, 10};
  const Summary s = summarize(v);
  CHECK(s.defined);
  CHECK(s.mean == Approx(3.6));
  CHECK(s.median == Approx(2.0));
  CHECK(s.mode == 2.0);
  CHECK(s.sd == Approx(std::sqrt(13.3)));
  CHECK(s.min == 1.0);
  CHECK(s.max == 10.0);
  CHECK(s.skewness > 0.0);

  const RoadNetwork g = toy::network();
  const CorpusStatistics cs = corpus_stats(toy::corpus(g), g);
  CHECK(cs.points.mean == Approx(3.35));
  CHECK(cs.points.count == 1000);
  CHECK_FALSE(cs.meters.defined);
  CHECK_FALSE(corpus_stats({}, g).points.defined);

  std::ostringstream out;
  write_length_histogram_csv(out, toy::corpus(g));
  CHECK(out.str() == "length,count\n3,650\n4,350\n");
}
