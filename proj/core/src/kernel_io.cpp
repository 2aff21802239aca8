#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "mtraffic/error.hpp"
#include "mtraffic/markov.hpp"
#include "text_util.hpp"

namespace mtraffic {

KernelFile read_kernel(std::istream& in, const RoadNetwork& g, PatternPtr pattern) {
  if (!pattern) pattern = make_pattern(g);
  if (pattern->state_count() != g.vertex_count()) {
    throw Error(ErrorCode::SizeMismatch, "pattern does not belong to the graph");
  }
  std::vector<double> values(pattern->size(), 0.0);
  std::vector<char> set(pattern->size(), 0);
  std::vector<char> listed(g.vertex_count(), 0);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    if (tokens.size() != 3) throw Error(ErrorCode::ParseError, where() + "expected 'u v p'");
    const auto eu = detail::parse_number<ExternalId>(tokens[0], line_no);
    const auto ev = detail::parse_number<ExternalId>(tokens[1], line_no);
    const auto p = detail::parse_number<double>(tokens[2], line_no);
    auto u = g.find_vertex(eu);
    auto v = g.find_vertex(ev);
    if (!u || !v) throw Error(ErrorCode::InvalidInput, where() + "unknown vertex");
    auto pos = pattern->position(*u, *v);
    if (!pos) {
      throw Error(ErrorCode::InvalidKernel, where() + "(" + std::to_string(eu) + "," +
                                                std::to_string(ev) + ") is not an edge");
    }
    if (set[*pos]) throw Error(ErrorCode::ParseError, where() + "entry given twice");
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidKernel, where() + "probability must be non-negative");
    }
    set[*pos] = 1;
    values[*pos] = p;
    listed[*u] = 1;
  }

  KernelFile out;
  for (StateId u = 0; u < g.vertex_count(); ++u) {
    const std::size_t b = pattern->row_begin(u);
    const std::size_t e = pattern->row_end(u);
    if (!listed[u]) {
      auto row = uniform_row(*pattern, u);
      std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(b));
      out.defaulted_rows.push_back(u);
      continue;
    }
    double sum = 0.0;
    for (std::size_t k = b; k < e; ++k) sum += values[k];
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidKernel, "row of vertex " + std::to_string(g.external_id(u)) +
                                                " sums to " + detail::format_double(sum));
    }
    for (std::size_t k = b; k < e; ++k) values[k] /= sum;
  }
  out.kernel = MarkovKernel(std::move(pattern), std::move(values));
  return out;
}

KernelFile load_kernel_file(const std::string& path, const RoadNetwork& g, PatternPtr pattern) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_kernel(in, g, std::move(pattern));
}

void write_kernel(std::ostream& out, const MarkovKernel& p, const RoadNetwork& g) {
  const TransitionPattern& pat = p.pattern();
  for (std::size_t k = 0; k < pat.size(); ++k) {
    const double x = p.values()[k];
    if (x == 0.0) continue;
    out << g.external_id(pat.row(k)) << ' ' << g.external_id(pat.column(k)) << ' '
        << detail::format_double(x) << '\n';
  }
}

void save_kernel_file(const std::string& path, const MarkovKernel& p, const RoadNetwork& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_kernel(out, p, g);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::string pi_to_json(const Eigen::VectorXd& pi, const RoadNetwork& g) {
  nlohmann::ordered_json out;
  auto ids = nlohmann::json::array();
  auto values = nlohmann::json::array();
  for (Eigen::Index v = 0; v < pi.size(); ++v) {
    ids.push_back(g.external_id(static_cast<VertexId>(v)));
    values.push_back(pi(v));
  }
  out["vertex"] = std::move(ids);
  out["pi"] = std::move(values);
  return out.dump(2);
}

std::string q_to_json(const TwoDimStationary& q, const RoadNetwork& g) {
  auto out = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < q.q.size(); ++k) {
    if (q.q[k] == 0.0) continue;
    nlohmann::ordered_json cell;
    cell["u"] = g.external_id(q.pattern->row(k));
    cell["v"] = g.external_id(q.pattern->column(k));
    cell["q"] = q.q[k];
    out.push_back(std::move(cell));
  }
  return out.dump(2);
}

}  // namespace mtraffic
