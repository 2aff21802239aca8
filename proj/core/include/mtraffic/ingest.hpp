#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mtraffic/estimate.hpp"
#include "mtraffic/road_graph.hpp"

namespace mtraffic {

struct BoundingBox {
  double min_lon = -180.0;
  double min_lat = -90.0;
  double max_lon = 180.0;
  double max_lat = 90.0;

  [[nodiscard]] bool contains(const GeoPoint& p) const noexcept {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

/// Parses "min_lon,min_lat,max_lon,max_lat".
BoundingBox parse_bbox(std::string_view text);

/// Great-circle distance in meters (haversine, mean Earth radius).
double haversine_m(const GeoPoint& a, const GeoPoint& b);

// OpenStreetMap XML.

std::set<std::string> default_highway_filter();

struct OsmOptions {
  std::optional<BoundingBox> bbox;
  std::set<std::string> highways = default_highway_filter();
};

/// Road network built from OSM ways. Vertex external ids are OSM node ids and
/// dense indices follow ascending node id. Edge lengths are in meters.
struct OsmGraphBundle {
  RoadNetwork network;
  /// Street name of the first way (in document order) that produced the edge.
  std::vector<std::optional<std::string>> way_names;

  [[nodiscard]] std::int64_t osm_id(VertexId v) const { return network.external_id(v); }
  [[nodiscard]] std::optional<VertexId> vertex_of(std::int64_t osm_id) const {
    return network.find_vertex(osm_id);
  }
  /// Squared great-circle length, the routing weight.
  [[nodiscard]] double weight(EdgeId e) const {
    const double m = network.length_m(e);
    return m * m;
  }
};

/// Throws MalformedXml on XML or schema errors and EmptyResult when no edge survives.
OsmGraphBundle parse_osm(std::istream& in, const OsmOptions& options = {});
OsmGraphBundle load_osm_file(const std::string& path, const OsmOptions& options = {});

/// Groups vertices by the street name of their lowest-numbered named incident
/// edge, for the chi-squared statistic. Vertices without a named edge form
/// singleton groups. `names[g]` is the label of group g.
struct StreetGrouping {
  std::vector<std::uint32_t> group;
  std::vector<std::string> names;
};

StreetGrouping street_grouping(const OsmGraphBundle& bundle);

// Porto taxi CSV.

/// Minutes after local midnight, [start, end); wraps past midnight when start > end.
struct TimeWindow {
  int start_minute = 0;
  int end_minute = 24 * 60;

  [[nodiscard]] bool contains(int minute) const noexcept {
    if (start_minute <= end_minute) return minute >= start_minute && minute < end_minute;
    return minute >= start_minute || minute < end_minute;
  }
};

/// Parses "hh:mm-hh:mm".
TimeWindow parse_time_window(std::string_view text);

/// Local minute of the day in mainland Portugal (WET/WEST).
int lisbon_minute_of_day(std::int64_t epoch_seconds);

struct RawTrajectory {
  std::string trip_id;
  std::vector<GeoPoint> points;
  std::int64_t departure = 0;  // epoch seconds
  bool complete = true;
};

struct TtpOptions {
  std::optional<BoundingBox> bbox;
  std::optional<TimeWindow> window;
};

enum class TtpDropReason { MissingData, OutsideWindow, OutsideBbox, TooShort, ParseError };

std::string_view to_string(TtpDropReason r) noexcept;

struct TtpRowDiagnostic {
  std::size_t line = 0;
  TtpDropReason reason = TtpDropReason::ParseError;
  std::string message;
};

struct TtpSummary {
  std::size_t rows = 0;
  std::size_t kept = 0;
  std::vector<TtpRowDiagnostic> dropped;
};

/// Streams the accepted trajectories to `sink` in file order. A missing header
/// column throws ParseError; bad rows are reported and skipped.
TtpSummary parse_ttp(std::istream& in, const TtpOptions& options,
                     const std::function<void(RawTrajectory&&)>& sink);

struct TtpFile {
  std::vector<RawTrajectory> trajectories;
  TtpSummary summary;
};

TtpFile read_ttp(std::istream& in, const TtpOptions& options = {});
TtpFile load_ttp_file(const std::string& path, const TtpOptions& options = {});

// Matching GPS points to the graph.

enum class RouteWeight { SquaredDistance, Meters };

struct MatchOptions {
  double snap_radius_m = 200.0;
  RouteWeight weight = RouteWeight::SquaredDistance;
};

struct MatchedTrajectory {
  std::vector<std::vector<VertexId>> pieces;
  std::size_t dropped_points = 0;  // points with no vertex within the snap radius
};

/// Nearest-vertex index plus shortest-path interpolation over one bundle.
/// The bundle must outlive the matcher. Matching is read-only and thread-safe.
class TrajectoryMatcher {
 public:
  explicit TrajectoryMatcher(const OsmGraphBundle& bundle, MatchOptions options = {});

  /// Nearest vertex within the snap radius; ties go to the lowest OSM id.
  [[nodiscard]] std::optional<VertexId> nearest(const GeoPoint& p) const;

  /// Vertices of a shortest path from `from` to `to`, both included.
  [[nodiscard]] std::optional<std::vector<VertexId>> shortest_path(VertexId from, VertexId to) const;

  /// Throws NoUsablePoints when no point snaps to a vertex.
  [[nodiscard]] MatchedTrajectory match(const RawTrajectory& raw) const;

  [[nodiscard]] const MatchOptions& options() const noexcept { return options_; }

 private:
  const OsmGraphBundle* bundle_;
  MatchOptions options_;
  double cell_lat_ = 1.0;
  double cell_lon_ = 1.0;
  std::vector<std::int64_t> cell_keys_;  // sorted
  std::vector<std::size_t> cell_start_;  // cell_keys_.size() + 1 offsets into cell_vertices_
  std::vector<VertexId> cell_vertices_;

  [[nodiscard]] std::int64_t cell_key(std::int64_t row, std::int64_t col) const noexcept;
};

MatchedTrajectory match_trajectory(const RawTrajectory& raw, const OsmGraphBundle& bundle,
                                   const MatchOptions& options = {});

struct MatchReport {
  std::vector<WeightedTrajectory> corpus;  // all pieces, count 1 each
  std::size_t matched = 0;
  std::size_t unusable = 0;  // trajectories with no usable point
  std::size_t splits = 0;
  std::size_t dropped_points = 0;
};

/// Matches every trajectory, in parallel when threads > 1; the output order
/// does not depend on the thread count.
MatchReport match_all(std::span<const RawTrajectory> raws, const TrajectoryMatcher& matcher,
                      unsigned threads = 1);

// Descriptive statistics of trajectory lengths.

struct Summary {
  bool defined = false;
  std::uint64_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double mode = 0.0;      // smallest most frequent value
  double sd = 0.0;        // sample standard deviation
  double min = 0.0;
  double max = 0.0;
  double skewness = 0.0;  // moment coefficient
  double kurtosis = 0.0;  // excess
};

/// Weighted by `weights` when given (parallel to `values`).
Summary summarize(std::span<const double> values, std::span<const std::uint64_t> weights = {});

struct CorpusStatistics {
  Summary points;
  Summary meters;  // undefined when the graph has no edge lengths
};

CorpusStatistics corpus_stats(std::span<const WeightedTrajectory> corpus, const RoadNetwork& g);

/// `length,count` histogram of trajectory lengths in points, with a header line.
void write_length_histogram_csv(std::ostream& out, std::span<const WeightedTrajectory> corpus);

}  // namespace mtraffic
