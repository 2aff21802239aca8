#include <expat.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>

#include "mtraffic/error.hpp"
#include "mtraffic/ingest.hpp"
#include "text_util.hpp"

namespace mtraffic {

BoundingBox parse_bbox(std::string_view text) {
  const auto parts = detail::split(text, ',');
  if (parts.size() != 4) throw Error(ErrorCode::InvalidInput, "bbox needs min_lon,min_lat,max_lon,max_lat");
  BoundingBox b;
  try {
    b.min_lon = detail::parse_number<double>(detail::trim(parts[0]), 0);
    b.min_lat = detail::parse_number<double>(detail::trim(parts[1]), 0);
    b.max_lon = detail::parse_number<double>(detail::trim(parts[2]), 0);
    b.max_lat = detail::parse_number<double>(detail::trim(parts[3]), 0);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidInput, "bad bbox '" + std::string(text) + "'");
  }
  if (!(b.min_lon <= b.max_lon && b.min_lat <= b.max_lat)) {
    throw Error(ErrorCode::InvalidInput, "bbox minimum exceeds maximum");
  }
  return b;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  constexpr double radius = 6371008.8;
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2);
  const double t = std::sin(dlon / 2);
  const double h = s * s + std::cos(a.lat * rad) * std::cos(b.lat * rad) * t * t;
  return 2.0 * radius * std::asin(std::min(1.0, std::sqrt(h)));
}

std::set<std::string> default_highway_filter() {
  return {"motorway",      "trunk",          "primary",        "secondary",    "tertiary",
          "residential",   "unclassified",   "living_street",  "service",      "motorway_link",
          "trunk_link",    "primary_link",   "secondary_link", "tertiary_link"};
}

namespace {

struct Way {
  std::vector<std::int64_t> refs;
  std::string highway;
  std::string oneway;
  std::optional<std::string> name;
};

struct OsmReader {
  std::unordered_map<std::int64_t, GeoPoint> nodes;
  std::vector<Way> ways;
  bool in_way = false;
  Way current;
  std::string error;
  XML_Parser parser = nullptr;

  static const char* attr(const XML_Char** attrs, const char* key) {
    for (std::size_t i = 0; attrs[i] != nullptr; i += 2) {
      if (std::strcmp(attrs[i], key) == 0) return attrs[i + 1];
    }
    return nullptr;
  }

  template <class T>
  bool number(const XML_Char** attrs, const char* key, T& out) {
    const char* v = attr(attrs, key);
    if (v == nullptr) {
      fail(std::string("missing attribute '") + key + "'");
      return false;
    }
    try {
      out = detail::parse_number<T>(v, 0);
    } catch (const Error&) {
      fail(std::string("bad value for '") + key + "': " + v);
      return false;
    }
    return true;
  }

  void fail(std::string msg) {
    if (error.empty()) {
      error = "line " + std::to_string(XML_GetCurrentLineNumber(parser)) + ": " + std::move(msg);
    }
    XML_StopParser(parser, XML_FALSE);
  }

  void start(const char* name, const XML_Char** attrs) {
    if (std::strcmp(name, "node") == 0) {
      std::int64_t id = 0;
      GeoPoint p;
      if (!number(attrs, "id", id) || !number(attrs, "lat", p.lat) || !number(attrs, "lon", p.lon)) return;
      nodes[id] = p;
    } else if (std::strcmp(name, "way") == 0) {
      if (in_way) return fail("nested way");
      in_way = true;
      current = Way{};
    } else if (in_way && std::strcmp(name, "nd") == 0) {
      std::int64_t ref = 0;
      if (!number(attrs, "ref", ref)) return;
      current.refs.push_back(ref);
    } else if (in_way && std::strcmp(name, "tag") == 0) {
      const char* k = attr(attrs, "k");
      const char* v = attr(attrs, "v");
      if (k == nullptr || v == nullptr) return fail("tag without k or v");
      if (std::strcmp(k, "highway") == 0) current.highway = v;
      else if (std::strcmp(k, "oneway") == 0) current.oneway = v;
      else if (std::strcmp(k, "name") == 0) current.name = v;
    }
  }

  void end(const char* name) {
    if (in_way && std::strcmp(name, "way") == 0) {
      in_way = false;
      ways.push_back(std::move(current));
    }
  }
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  static_cast<OsmReader*>(data)->start(name, attrs);
}

void XMLCALL on_end(void* data, const XML_Char* name) { static_cast<OsmReader*>(data)->end(name); }

void read_xml(std::istream& in, OsmReader& reader) {
  XML_Parser parser = XML_ParserCreate(nullptr);
  if (parser == nullptr) throw Error(ErrorCode::IoError, "cannot create XML parser");
  reader.parser = parser;
  XML_SetUserData(parser, &reader);
  XML_SetElementHandler(parser, on_start, on_end);

  std::vector<char> buffer(1 << 16);
  bool done = false;
  std::string failure;
  while (!done) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto got = static_cast<int>(in.gcount());
    done = got < static_cast<int>(buffer.size());
    if (XML_Parse(parser, buffer.data(), got, done ? XML_TRUE : XML_FALSE) == XML_STATUS_ERROR) {
      failure = reader.error.empty()
                    ? "line " + std::to_string(XML_GetCurrentLineNumber(parser)) + ": " +
                          XML_ErrorString(XML_GetErrorCode(parser))
                    : reader.error;
      break;
    }
  }
  XML_ParserFree(parser);
  reader.parser = nullptr;
  if (!failure.empty()) throw Error(ErrorCode::MalformedXml, failure);
}

}  // namespace

OsmGraphBundle parse_osm(std::istream& in, const OsmOptions& options) {
  OsmReader reader;
  read_xml(in, reader);

  auto usable = [&](std::int64_t id) -> const GeoPoint* {
    auto it = reader.nodes.find(id);
    if (it == reader.nodes.end()) return nullptr;
    if (options.bbox && !options.bbox->contains(it->second)) return nullptr;
    return &it->second;
  };

  // Directed edge -> index of the first way producing it.
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> found;
  for (std::size_t w = 0; w < reader.ways.size(); ++w) {
    const Way& way = reader.ways[w];
    if (way.highway.empty() || !options.highways.contains(way.highway)) continue;
    const bool forward = way.oneway != "-1" && way.oneway != "reverse";
    const bool backward = way.oneway != "yes" && way.oneway != "true" && way.oneway != "1";
    for (std::size_t i = 0; i + 1 < way.refs.size(); ++i) {
      const std::int64_t a = way.refs[i];
      const std::int64_t b = way.refs[i + 1];
      if (a == b || usable(a) == nullptr || usable(b) == nullptr) continue;
      if (forward) found.emplace(std::pair{a, b}, w);
      if (backward) found.emplace(std::pair{b, a}, w);
    }
  }
  if (found.empty()) throw Error(ErrorCode::EmptyResult, "no road edge inside the selection");

  std::vector<std::int64_t> ids;
  for (const auto& [edge, way] : found) {
    ids.push_back(edge.first);
    ids.push_back(edge.second);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto dense = [&](std::int64_t id) {
    return static_cast<VertexId>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  std::vector<GeoPoint> coords;
  coords.reserve(ids.size());
  for (std::int64_t id : ids) coords.push_back(reader.nodes.at(id));

  std::vector<Edge> edges;
  std::vector<double> lengths;
  edges.reserve(found.size());
  lengths.reserve(found.size());
  for (const auto& [edge, way] : found) {
    const Edge e{dense(edge.first), dense(edge.second)};
    edges.push_back(e);
    lengths.push_back(haversine_m(coords[e.from], coords[e.to]));
  }

  OsmGraphBundle bundle;
  bundle.network = RoadNetwork::build(ids.size(), edges, ids, std::move(coords), std::move(lengths));
  bundle.way_names.resize(bundle.network.edge_count());
  std::size_t i = 0;
  for (const auto& [edge, way] : found) {
    bundle.way_names[*bundle.network.edge_id(edges[i].from, edges[i].to)] = reader.ways[way].name;
    ++i;
  }
  return bundle;
}

OsmGraphBundle load_osm_file(const std::string& path, const OsmOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return parse_osm(in, options);
}

StreetGrouping street_grouping(const OsmGraphBundle& bundle) {
  const RoadNetwork& g = bundle.network;
  StreetGrouping out;
  out.group.assign(g.vertex_count(), 0);
  std::map<std::string, std::uint32_t> index;
  std::vector<std::optional<std::string>> vertex_name(g.vertex_count());
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const auto& name = bundle.way_names[e];
    if (!name) continue;
    const Edge& edge = g.edges()[e];
    for (VertexId v : {edge.from, edge.to}) {
      if (!vertex_name[v]) vertex_name[v] = name;
    }
  }
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    std::string label = vertex_name[v] ? *vertex_name[v] : "#" + std::to_string(g.external_id(v));
    auto [it, inserted] = index.emplace(label, static_cast<std::uint32_t>(out.names.size()));
    if (inserted) out.names.push_back(label);
    out.group[v] = it->second;
  }
  return out;
}

}  // namespace mtraffic
