#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mtraffic/error.hpp"
#include "mtraffic/estimate.hpp"
#include "text_util.hpp"

namespace mtraffic {

CorpusFile read_corpus(std::istream& in, const RoadNetwork& g) {
  CorpusFile out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    std::uint64_t count = 1;
    if (tokens.back().front() == '*') {
      count = detail::parse_number<std::uint64_t>(tokens.back().substr(1), line_no);
      tokens.pop_back();
    }
    WeightedTrajectory t;
    t.count = count;
    std::optional<ExternalId> unknown;
    for (std::string_view tok : tokens) {
      const auto id = detail::parse_number<ExternalId>(tok, line_no);
      auto v = g.find_vertex(id);
      if (!v) {
        unknown = id;
        break;
      }
      t.vertices.push_back(*v);
    }
    if (unknown) {
      out.skipped.push_back({index, SkipReason::UnknownVertex, *unknown, *unknown, count});
      // Keep indices aligned with input lines: an empty trajectory stands in for it.
      t.vertices.clear();
      t.count = 0;
    }
    out.trajectories.push_back(std::move(t));
    ++index;
  }
  return out;
}

CorpusFile load_corpus_file(const std::string& path, const RoadNetwork& g) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_corpus(in, g);
}

void write_corpus(std::ostream& out, std::span<const WeightedTrajectory> corpus, const RoadNetwork& g) {
  for (const WeightedTrajectory& t : corpus) {
    if (t.vertices.empty() || t.count == 0) continue;
    for (std::size_t i = 0; i < t.vertices.size(); ++i) {
      if (i > 0) out << ' ';
      out << g.external_id(t.vertices[i]);
    }
    if (t.count != 1) out << " *" << t.count;
    out << '\n';
  }
}

}  // namespace mtraffic
