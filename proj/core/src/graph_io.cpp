#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "mtraffic/error.hpp"
#include "mtraffic/road_graph.hpp"
#include "text_util.hpp"

namespace mtraffic {

std::string histograms_to_json(const DegreeHistograms& h) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const DegreeHistogram* hist : {&h.vertex_in, &h.vertex_out, &h.edge_in, &h.edge_out}) {
    auto bins = nlohmann::ordered_json::array();
    for (const auto& [degree, count] : hist->bins) {
      bins.push_back({{"degree", degree}, {"count", count}});
    }
    out[std::string(to_string(hist->kind))] = std::move(bins);
  }
  return out.dump(2);
}

void write_histogram_csv(std::ostream& out, const DegreeHistogram& h) {
  out << "degree,count\n";
  for (const auto& [degree, count] : h.bins) out << degree << ',' << count << '\n';
}

void write_graph(std::ostream& out, const RoadNetwork& g) {
  out << "V " << g.vertex_count() << '\n';
  bool identity = true;
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    if (g.external_id(v) != static_cast<ExternalId>(v)) {
      identity = false;
      break;
    }
  }
  if (!identity || g.has_coordinates()) {
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
      out << "N " << v << ' ' << g.external_id(v);
      if (g.has_coordinates()) {
        out << ' ' << detail::format_double(g.coordinate(v).lat) << ' '
            << detail::format_double(g.coordinate(v).lon);
      }
      out << '\n';
    }
  }
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    out << "E " << g.edge(e).from << ' ' << g.edge(e).to;
    if (g.has_lengths()) out << ' ' << detail::format_double(g.length_m(e));
    out << '\n';
  }
}

RoadNetwork read_graph(std::istream& in) {
  std::optional<std::size_t> count;
  std::vector<ExternalId> ids;
  std::vector<GeoPoint> coords;
  std::vector<char> seen;
  bool any_coord = false;
  std::vector<Edge> edges;
  std::vector<double> lengths;
  std::size_t with_length = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    auto fail = [&](const std::string& what) {
      return Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + what);
    };
    const std::string_view tag = tokens[0];
    if (tag == "V") {
      if (count) throw fail("repeated V header");
      if (tokens.size() != 2) throw fail("expected 'V <count>'");
      count = detail::parse_number<std::size_t>(tokens[1], line_no);
      ids.resize(*count);
      for (std::size_t v = 0; v < *count; ++v) ids[v] = static_cast<ExternalId>(v);
      coords.assign(*count, {});
      seen.assign(*count, 0);
      continue;
    }
    if (!count) throw fail("missing V header");
    if (tag == "N") {
      if (tokens.size() != 3 && tokens.size() != 5) throw fail("expected 'N <index> <id> [lat lon]'");
      auto v = detail::parse_number<std::size_t>(tokens[1], line_no);
      if (v >= *count) throw fail("vertex index out of range");
      if (seen[v]) throw fail("vertex listed twice");
      seen[v] = 1;
      ids[v] = detail::parse_number<ExternalId>(tokens[2], line_no);
      if (tokens.size() == 5) {
        any_coord = true;
        coords[v] = {detail::parse_number<double>(tokens[3], line_no),
                     detail::parse_number<double>(tokens[4], line_no)};
      }
    } else if (tag == "E") {
      if (tokens.size() != 3 && tokens.size() != 4) throw fail("expected 'E <from> <to> [length_m]'");
      auto u = detail::parse_number<std::size_t>(tokens[1], line_no);
      auto v = detail::parse_number<std::size_t>(tokens[2], line_no);
      if (u >= *count || v >= *count) throw fail("edge endpoint out of range");
      edges.push_back({static_cast<VertexId>(u), static_cast<VertexId>(v)});
      if (tokens.size() == 4) {
        lengths.push_back(detail::parse_number<double>(tokens[3], line_no));
        ++with_length;
      } else {
        lengths.push_back(0.0);
      }
    } else {
      throw fail("unknown record '" + std::string(tag) + "'");
    }
  }
  if (!count) throw Error(ErrorCode::ParseError, "missing V header");
  if (with_length != 0 && with_length != edges.size()) {
    throw Error(ErrorCode::ParseError, "edge lengths must be given for all edges or none");
  }
  if (with_length == 0) lengths.clear();
  if (!any_coord) coords.clear();
  return RoadNetwork::build(*count, edges, std::move(ids), std::move(coords), std::move(lengths));
}

RoadNetwork load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_graph(in);
}

void save_graph_file(const std::string& path, const RoadNetwork& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_graph(out, g);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace mtraffic
