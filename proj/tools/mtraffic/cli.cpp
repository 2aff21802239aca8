#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mtraffic/error.hpp"
#include "mtraffic/estimate.hpp"
#include "mtraffic/ingest.hpp"
#include "mtraffic/markov.hpp"
#include "mtraffic/road_graph.hpp"
#include "mtraffic/spectral.hpp"
#include "mtraffic/traffic.hpp"

namespace mtraffic::cli {

namespace {

using nlohmann::ordered_json;

/// Raised for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

// A graph file (`V` header) or a plain list of `u v` external-id pairs.
RoadNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string first;
  std::streampos start = in.tellg();
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    if (ls >> first && first.front() != '#') break;
    first.clear();
  }
  in.clear();
  in.seekg(start);
  if (first == "V") return read_graph(in);

  std::vector<std::pair<ExternalId, ExternalId>> edges;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string a;
    if (!(ls >> a) || a.front() == '#') continue;
    ExternalId u = 0;
    ExternalId v = 0;
    std::istringstream as(a);
    if (!(as >> u) || !(ls >> v)) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": expected 'u v'");
    }
    edges.emplace_back(u, v);
  }
  return RoadNetwork::from_external_edges(edges);
}

ordered_json summary_json(const Summary& s) {
  if (!s.defined) return {{"defined", false}};
  return {{"defined", true}, {"count", s.count},   {"mean", s.mean}, {"median", s.median},
          {"mode", s.mode},  {"sd", s.sd},         {"min", s.min},   {"max", s.max},
          {"skewness", s.skewness}, {"kurtosis", s.kurtosis}};
}

ordered_json skipped_json(const std::vector<SkippedTrajectory>& skipped) {
  ordered_json counts = ordered_json::object();
  ordered_json first = ordered_json::array();
  for (const SkippedTrajectory& s : skipped) {
    counts[std::string(to_string(s.reason))] = counts.value(std::string(to_string(s.reason)), 0) + 1;
    if (first.size() < 20) {
      first.push_back({{"index", s.index}, {"reason", to_string(s.reason)}, {"from", s.from}, {"to", s.to}});
    }
  }
  return {{"count", skipped.size()}, {"by_reason", counts}, {"first", first}};
}

void write_q_csv(std::ostream& out, const TransitionPattern& pattern, std::span<const double> q,
                 const RoadNetwork& g) {
  out << "u,v,q\n";
  out.precision(17);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    out << g.external_id(pattern.row(i)) << ',' << g.external_id(pattern.column(i)) << ',' << q[i] << '\n';
  }
}

std::vector<double> eigen_to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Largest-remainder rounding of k * pi.
TrafficConfig apportion(const Eigen::VectorXd& pi, std::uint64_t k) {
  const auto n = static_cast<std::size_t>(pi.size());
  TrafficConfig f(n, 0);
  std::vector<std::pair<double, std::size_t>> rest;
  std::uint64_t used = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const double x = pi(static_cast<Eigen::Index>(v)) * static_cast<double>(k);
    f[v] = static_cast<std::uint64_t>(std::floor(x));
    used += f[v];
    rest.emplace_back(-(x - std::floor(x)), v);
  }
  std::sort(rest.begin(), rest.end());
  for (std::size_t i = 0; used < k; ++i, ++used) ++f[rest[i % n].second];
  return f;
}

struct Globals {
  bool json = false;
};

// build-graph

struct BuildGraphArgs {
  std::string osm;
  std::string graph;
  std::string bbox;
  std::vector<std::string> highways;
  std::string out;
  std::string hist_dir;
  std::string names;
};

void cmd_build_graph(const BuildGraphArgs& a, std::ostream& out) {
  if (a.osm.empty() == a.graph.empty()) throw UsageError("give exactly one of --osm or --graph");
  OsmGraphBundle bundle;
  if (!a.osm.empty()) {
    OsmOptions opts;
    if (!a.bbox.empty()) opts.bbox = parse_bbox(a.bbox);
    if (!a.highways.empty()) opts.highways = {a.highways.begin(), a.highways.end()};
    bundle = load_osm_file(a.osm, opts);
  } else {
    if (!a.bbox.empty()) throw UsageError("--bbox applies to --osm input only");
    bundle.network = load_network(a.graph);
    bundle.way_names.resize(bundle.network.edge_count());
  }
  const RoadNetwork& g = bundle.network;
  if (!a.out.empty()) save_graph_file(a.out, g);

  const DegreeHistograms h = degree_histograms(g);
  if (!a.hist_dir.empty()) {
    std::filesystem::create_directories(a.hist_dir);
    for (const DegreeHistogram* hist : {&h.vertex_in, &h.vertex_out, &h.edge_in, &h.edge_out}) {
      auto f = open_out((std::filesystem::path(a.hist_dir) / (std::string(to_string(hist->kind)) + ".csv")).string());
      write_histogram_csv(f, *hist);
    }
  }
  if (!a.names.empty()) {
    auto f = open_out(a.names);
    f << "u,v,name\n";
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
      if (!bundle.way_names[e]) continue;
      std::string name = *bundle.way_names[e];
      std::replace(name.begin(), name.end(), ',', ' ');
      f << g.external_id(g.edge(e).from) << ',' << g.external_id(g.edge(e).to) << ',' << name << '\n';
    }
  }
  ordered_json report = {{"vertices", g.vertex_count()},
                         {"edges", g.edge_count()},
                         {"strongly_connected", is_strongly_connected(g)},
                         {"histograms", ordered_json::parse(histograms_to_json(h))}};
  out << report.dump(2) << '\n';
}

// match

struct MatchArgs {
  std::string graph;
  std::string osm;
  std::string ttp;
  std::string bbox;
  std::string window;
  double snap_radius = 200.0;
  bool meters = false;
  unsigned threads = 1;
  std::string out;
};

void cmd_match(const MatchArgs& a, std::ostream& out) {
  if (a.osm.empty() == a.graph.empty()) throw UsageError("give exactly one of --osm or --graph");
  std::optional<BoundingBox> bbox;
  if (!a.bbox.empty()) bbox = parse_bbox(a.bbox);
  OsmGraphBundle bundle;
  if (!a.osm.empty()) {
    OsmOptions opts;
    opts.bbox = bbox;
    bundle = load_osm_file(a.osm, opts);
  } else {
    bundle.network = load_graph_file(a.graph);
    bundle.way_names.resize(bundle.network.edge_count());
  }
  TtpOptions topts;
  topts.bbox = bbox;
  if (!a.window.empty()) topts.window = parse_time_window(a.window);
  const TtpFile ttp = load_ttp_file(a.ttp, topts);

  MatchOptions mopts;
  mopts.snap_radius_m = a.snap_radius;
  mopts.weight = a.meters ? RouteWeight::Meters : RouteWeight::SquaredDistance;
  const TrajectoryMatcher matcher(bundle, mopts);
  const MatchReport rep = match_all(ttp.trajectories, matcher, a.threads);
  if (!a.out.empty()) {
    auto f = open_out(a.out);
    write_corpus(f, rep.corpus, bundle.network);
  }

  ordered_json dropped = ordered_json::object();
  for (const TtpRowDiagnostic& d : ttp.summary.dropped) {
    const std::string key(to_string(d.reason));
    dropped[key] = dropped.value(key, 0) + 1;
  }
  const CorpusStatistics stats = corpus_stats(rep.corpus, bundle.network);
  ordered_json report = {{"rows", ttp.summary.rows},
                         {"kept", ttp.summary.kept},
                         {"dropped", dropped},
                         {"matched", rep.matched},
                         {"unusable", rep.unusable},
                         {"splits", rep.splits},
                         {"dropped_points", rep.dropped_points},
                         {"pieces", rep.corpus.size()},
                         {"length_points", summary_json(stats.points)},
                         {"length_meters", summary_json(stats.meters)}};
  out << report.dump(2) << '\n';
}

// estimate

struct EstimateArgs {
  std::string graph;
  std::string corpus;
  std::string method = "wls";
  std::string solver = "auto";
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  double damping = 0.0;
  std::string repair = "ml-rows";
  std::string negative_pi = "clamp";
  std::uint64_t min_row_count = 20;
  unsigned threads = 1;
  std::string kernel_out;
  std::string q_out;
  std::string report;
};

LagrangeMethod parse_solver(const std::string& s) {
  if (s == "dense") return LagrangeMethod::Dense;
  if (s == "fixed-point") return LagrangeMethod::FixedPoint;
  return LagrangeMethod::Auto;
}

void cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const RoadNetwork g = load_network(a.graph);
  const CorpusFile corpus = load_corpus_file(a.corpus, g);
  CollectResult collected = collect_stats(corpus.trajectories, g, a.threads);
  std::vector<SkippedTrajectory> skipped = corpus.skipped;
  skipped.insert(skipped.end(), collected.skipped.begin(), collected.skipped.end());
  std::sort(skipped.begin(), skipped.end(),
            [](const SkippedTrajectory& x, const SkippedTrajectory& y) { return x.index < y.index; });
  const SufficientStats& stats = collected.stats;

  ordered_json report = {{"method", a.method},
                         {"n", stats.n},
                         {"k", stats.k},
                         {"skipped", skipped_json(skipped)}};

  if (a.method == "naive") {
    if (!a.kernel_out.empty()) throw UsageError("the naive estimate has no kernel; use --q-out");
    const NaiveEstimate est = estimate_naive(stats);
    report["marginal_gap"] = eigen_to_vector(est.marginal_gap);
    if (!a.q_out.empty()) {
      auto f = open_out(a.q_out);
      write_q_csv(f, *stats.pattern, est.q, g);
    }
  } else {
    EstimatorOutput est;
    if (a.method == "ml") {
      est = estimate_ml(stats);
    } else {
      WlsOptions opts;
      opts.solver.method = parse_solver(a.solver);
      opts.solver.tol = a.tol;
      opts.solver.max_iter = a.max_iter;
      opts.solver.damping = a.damping;
      opts.repair = a.repair == "clamp" ? RepairPolicy::Clamp : RepairPolicy::MlRows;
      opts.negative_pi = a.negative_pi == "shift" ? NegativePiPolicy::Shift : NegativePiPolicy::Clamp;
      opts.min_row_count = a.min_row_count;
      est = estimate_wls(stats, g, opts);
      report["n_eff"] = est.n_eff;
      report["solver"] = {{"method", to_string(est.solver_method)}, {"residual", est.solver_residual}};
      report["lambda"] = eigen_to_vector(est.lambda);
    }
    report["pi"] = ordered_json::parse(pi_to_json(est.pi_hat, g));
    ordered_json rows = ordered_json::array();
    for (const auto& r : est.diagnostics.rows) {
      rows.push_back({{"vertex", g.external_id(r.vertex)}, {"event", to_string(r.event)}});
    }
    ordered_json negative = ordered_json::array();
    for (VertexId v : est.diagnostics.negative_pi) negative.push_back(g.external_id(v));
    report["diagnostics"] = {{"rows", rows},
                             {"negative_pi", negative},
                             {"reducible", est.diagnostics.reducible},
                             {"closed_classes", est.diagnostics.closed_classes},
                             {"resolved_stationary", est.diagnostics.resolved_stationary}};
    if (!a.kernel_out.empty()) save_kernel_file(a.kernel_out, est.p_hat, g);
    if (!a.q_out.empty()) {
      auto f = open_out(a.q_out);
      write_q_csv(f, *est.q_hat.pattern, est.q_hat.q, g);
    }
  }

  const std::string text = report.dump(2) + "\n";
  if (a.report.empty()) {
    out << text;
  } else {
    auto f = open_out(a.report);
    f << text;
  }
}

// simulate

struct SimulateArgs {
  std::string graph;
  std::string kernel;
  std::string init = "uniform";
  std::optional<std::uint64_t> k;
  std::size_t steps = 100;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::size_t every = 1;
  std::string log;
  std::string chi;
  std::string groups;
};

TrafficConfig parse_init(const std::string& spec, const RoadNetwork& g, const Eigen::VectorXd& pi,
                         std::optional<std::uint64_t> k) {
  const std::size_t n = g.vertex_count();
  if (spec == "uniform" || spec == "stationary") {
    if (!k) throw UsageError("-k is required with init '" + spec + "'");
    if (*k == 0) throw UsageError("-k must be positive");
    if (spec == "stationary") return apportion(pi, *k);
    TrafficConfig f(n, *k / n);
    for (std::size_t v = 0; v < *k % n; ++v) ++f[v];
    return f;
  }
  TrafficConfig f(n, 0);
  std::uint64_t total = 0;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("init entries must be vertex:count, got '" + item + "'");
    ExternalId id = 0;
    std::uint64_t c = 0;
    try {
      id = std::stoll(item.substr(0, colon));
      c = std::stoull(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("bad init entry '" + item + "'");
    }
    const auto v = g.find_vertex(id);
    if (!v) throw Error(ErrorCode::InvalidInput, "init names unknown vertex " + std::to_string(id));
    f[*v] += c;
    total += c;
  }
  if (total == 0) throw UsageError("init places no walkers");
  if (k && *k != total) throw UsageError("-k disagrees with the explicit init total");
  return f;
}

std::vector<std::uint32_t> load_groups(const std::string& path, const RoadNetwork& g) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::optional<std::uint32_t>> group(g.vertex_count());
  std::map<std::string, std::uint32_t> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#' || line.starts_with("vertex,")) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "groups lines are vertex,label");
    const auto v = g.find_vertex(std::stoll(line.substr(0, comma)));
    if (!v) continue;
    const auto [it, inserted] =
        labels.emplace(line.substr(comma + 1), static_cast<std::uint32_t>(labels.size()));
    group[*v] = it->second;
  }
  std::vector<std::uint32_t> out(g.vertex_count());
  auto next = static_cast<std::uint32_t>(labels.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = group[v] ? *group[v] : next++;
  return out;
}

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (!a.seed) throw UsageError("--seed is required");
  if (a.k && *a.k == 0) throw UsageError("-k must be positive");
  if (a.every == 0) throw UsageError("--every must be positive");
  const RoadNetwork g = load_network(a.graph);
  const MarkovKernel p = load_kernel_file(a.kernel, g).kernel;
  const Eigen::VectorXd pi = stationary(p).pi;
  const TrafficConfig init = parse_init(a.init, g, pi, a.k);
  const std::uint64_t k = std::accumulate(init.begin(), init.end(), std::uint64_t{0});
  std::vector<std::uint32_t> grouping;
  if (!a.groups.empty()) grouping = load_groups(a.groups, g);

  std::ofstream log_file;
  std::ofstream chi_file;
  if (!a.log.empty()) {
    log_file = open_out(a.log);
    log_file << "step,vertex,count\n";
  }
  if (!a.chi.empty()) {
    chi_file = open_out(a.chi);
    chi_file << "step,statistic,df\n";
    chi_file.precision(17);
  }
  TrafficConfig last;
  ChiSquared last_chi;
  simulate(
      p, init, a.steps, *a.seed,
      [&](std::size_t t, const TrafficConfig& counts) {
        if (t % a.every != 0 && t != a.steps) return;
        if (log_file.is_open()) write_counts_csv(log_file, t, counts, g);
        last_chi = chi_squared(counts, pi, grouping);
        if (chi_file.is_open()) chi_file << t << ',' << last_chi.statistic << ',' << last_chi.df << '\n';
        last = counts;
      },
      a.threads);

  double gap = 0.0;
  for (std::size_t v = 0; v < last.size(); ++v) {
    gap = std::max(gap, std::abs(static_cast<double>(last[v]) / static_cast<double>(k) -
                                 pi(static_cast<Eigen::Index>(v))));
  }
  ordered_json report = {{"walkers", k},
                         {"steps", a.steps},
                         {"seed", *a.seed},
                         {"final_linf_gap", gap},
                         {"final_chi_squared", last_chi.statistic},
                         {"df", last_chi.df}};
  out << report.dump(2) << '\n';
}

// benchmark

struct BenchmarkArgs {
  std::string graph;
  std::size_t random_graph = 0;
  std::optional<std::size_t> extra_edges;
  std::string kernel;
  std::optional<std::uint64_t> dirichlet;
  std::vector<std::size_t> ks{100, 200, 500, 1000};
  std::vector<std::size_t> ns{3, 5, 10};
  std::size_t reps = 100;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
};

void cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  if (!a.seed) throw UsageError("--seed is required");
  if (a.graph.empty() == (a.random_graph == 0)) throw UsageError("give exactly one of --graph or --random-graph");
  if (a.kernel.empty() == !a.dirichlet) throw UsageError("give exactly one of --kernel or --dirichlet");
  if (a.reps == 0) throw UsageError("--reps must be positive");
  const RoadNetwork g = a.graph.empty()
                            ? random_strongly_connected_graph(a.random_graph,
                                                              a.extra_edges.value_or(2 * a.random_graph), *a.seed)
                            : load_network(a.graph);
  const MarkovKernel p = a.dirichlet ? random_dirichlet_kernel(g, *a.dirichlet) : load_kernel_file(a.kernel, g).kernel;
  BenchmarkOptions opts;
  opts.reps = a.reps;
  opts.seed = *a.seed;
  opts.threads = a.threads;
  const auto cells = run_benchmark(g, p, a.ks, a.ns, opts);
  if (a.out.empty()) {
    write_benchmark_csv(out, cells);
  } else {
    auto f = open_out(a.out);
    write_benchmark_csv(f, cells);
  }
}

// toy

int cmd_toy(const std::string& perturb, bool json, std::ostream& out) {
  const auto checks = run_toy_checks(perturb);
  const bool ok = std::all_of(checks.begin(), checks.end(), [](const ToyCheck& c) { return c.passed; });
  if (json) {
    ordered_json list = ordered_json::array();
    for (const ToyCheck& c : checks) {
      list.push_back({{"name", c.name}, {"passed", c.passed}, {"max_error", c.max_error}, {"tolerance", c.tolerance}});
    }
    out << ordered_json{{"passed", ok}, {"checks", list}}.dump(2) << '\n';
  } else {
    for (const ToyCheck& c : checks) {
      out << (c.passed ? "PASS " : "FAIL ") << c.name << "  max_error=" << c.max_error
          << "  tolerance=" << c.tolerance << '\n';
    }
    out << (ok ? "all checks passed" : "some checks failed") << '\n';
  }
  return ok ? 0 : 1;
}

// stats

struct StatsArgs {
  std::string graph;
  std::string corpus;
  std::string hist;
};

void cmd_stats(const StatsArgs& a, std::ostream& out) {
  const RoadNetwork g = load_network(a.graph);
  const CorpusFile corpus = load_corpus_file(a.corpus, g);
  const CorpusStatistics s = corpus_stats(corpus.trajectories, g);
  if (!a.hist.empty()) {
    auto f = open_out(a.hist);
    write_length_histogram_csv(f, corpus.trajectories);
  }
  ordered_json report = {{"trajectories", s.points.count},
                         {"skipped", corpus.skipped.size()},
                         {"length_points", summary_json(s.points)},
                         {"length_meters", summary_json(s.meters)}};
  out << report.dump(2) << '\n';
}

void report_error(std::ostream& err, bool json, const std::string& kind, const std::string& message, int code) {
  if (json) {
    err << ordered_json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  } else {
    err << "error: " << message << '\n';
  }
}

bool names_given(const CLI::Option& opt, const std::vector<std::string>& args) {
  for (const std::string& arg : args) {
    for (const std::string& l : opt.get_lnames()) {
      if (arg == "--" + l || arg.starts_with("--" + l + "=")) return true;
    }
    for (const std::string& sn : opt.get_snames()) {
      if (arg == "-" + sn) return true;
    }
  }
  return false;
}

// Appends `--key value` for every `key = value` line of the config file whose
// option is not already on the command line.
void inject_config(CLI::App& app, std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);

  CLI::App* sub = nullptr;
  for (const std::string& arg : args) {
    if (!arg.starts_with("-")) {
      sub = app.get_subcommand_no_throw(arg);
      if (sub != nullptr) break;
    }
  }
  std::vector<std::string> extra;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto strip = [](std::string x) {
      const auto b = x.find_first_not_of(" \t\r");
      const auto e = x.find_last_not_of(" \t\r");
      x = b == std::string::npos ? "" : x.substr(b, e - b + 1);
      if (x.size() >= 2 && x.front() == '"' && x.back() == '"') x = x.substr(1, x.size() - 2);
      return x;
    };
    if (strip(line).empty()) continue;
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    const std::string flag = (key.size() == 1 ? "-" : "--") + key;
    CLI::Option* opt = sub != nullptr ? sub->get_option_no_throw(flag) : nullptr;
    if (opt == nullptr) opt = app.get_option_no_throw(flag);
    if (opt == nullptr) throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (names_given(*opt, args)) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1" || value == "yes") extra.push_back(flag);
      continue;
    }
    extra.push_back(flag);
    extra.push_back(value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals globals;
  globals.json = std::find(args.begin(), args.end(), "--json") != args.end();

  CLI::App app{"Markov traffic estimation on road networks", "mtraffic"};
  std::string config_path;
  app.add_option("--config", config_path, "Flat key = value file; flags override it");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", globals.json, "Machine-readable output and errors");

  BuildGraphArgs bg;
  auto* build = app.add_subcommand("build-graph", "Road network and degree histograms from OSM XML or a graph file");
  build->add_option("--osm", bg.osm, "OSM XML extract")->check(CLI::ExistingFile);
  build->add_option("--graph", bg.graph, "Graph file or u v edge list instead of OSM")->check(CLI::ExistingFile);
  build->add_option("--bbox", bg.bbox, "min_lon,min_lat,max_lon,max_lat");
  build->add_option("--highways", bg.highways, "Highway tag values to keep")->delimiter(',');
  build->add_option("--out", bg.out, "Graph file to write");
  build->add_option("--hist-dir", bg.hist_dir, "Directory for degree histogram CSVs");
  build->add_option("--names", bg.names, "CSV of street names per edge");

  MatchArgs ma;
  auto* match = app.add_subcommand("match", "Map TTP GPS trajectories onto the graph");
  match->add_option("--graph", ma.graph, "Graph file with coordinates and lengths")->check(CLI::ExistingFile);
  match->add_option("--osm", ma.osm, "OSM XML extract instead of a graph file")->check(CLI::ExistingFile);
  match->add_option("--ttp", ma.ttp, "TTP CSV")->required()->check(CLI::ExistingFile);
  match->add_option("--bbox", ma.bbox, "min_lon,min_lat,max_lon,max_lat");
  match->add_option("--window", ma.window, "Departure window hh:mm-hh:mm, Lisbon time");
  match->add_option("--snap-radius", ma.snap_radius, "Meters")->check(CLI::PositiveNumber);
  match->add_flag("--meters", ma.meters, "Route on plain meters instead of squared distance");
  match->add_option("--threads", ma.threads)->check(CLI::PositiveNumber);
  match->add_option("--out", ma.out, "Corpus file to write");

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "Estimate the Markov kernel from a trajectory corpus");
  estimate->add_option("--graph", ea.graph)->required()->check(CLI::ExistingFile);
  estimate->add_option("--corpus", ea.corpus)->required()->check(CLI::ExistingFile);
  estimate->add_option("--method", ea.method)->check(CLI::IsMember({"ml", "wls", "naive"}));
  estimate->add_option("--solver", ea.solver)->check(CLI::IsMember({"auto", "dense", "fixed-point"}));
  estimate->add_option("--tol", ea.tol, "Fixed-point tolerance")->check(CLI::PositiveNumber);
  estimate->add_option("--max-iter", ea.max_iter)->check(CLI::PositiveNumber);
  estimate->add_option("--damping", ea.damping)->check(CLI::Range(0.0, 0.999));
  estimate->add_option("--repair", ea.repair)->check(CLI::IsMember({"ml-rows", "clamp"}));
  estimate->add_option("--negative-pi", ea.negative_pi)->check(CLI::IsMember({"clamp", "shift"}));
  estimate->add_option("--min-row-count", ea.min_row_count);
  estimate->add_option("--threads", ea.threads)->check(CLI::PositiveNumber);
  estimate->add_option("--kernel-out", ea.kernel_out, "Kernel file to write");
  estimate->add_option("--q-out", ea.q_out, "u,v,q CSV to write");
  estimate->add_option("--report", ea.report, "JSON report path (default stdout)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate Markov traffic and track chi-squared");
  sim->add_option("--graph", sa.graph)->required()->check(CLI::ExistingFile);
  sim->add_option("--kernel", sa.kernel)->required()->check(CLI::ExistingFile);
  sim->add_option("--init", sa.init, "uniform, stationary, or vertex:count,...");
  sim->add_option("-k,--walkers", sa.k, "Number of walkers");
  sim->add_option("--steps", sa.steps);
  sim->add_option("--seed", sa.seed);
  sim->add_option("--threads", sa.threads)->check(CLI::PositiveNumber);
  sim->add_option("--every", sa.every, "Log every n-th step");
  sim->add_option("--log", sa.log, "step,vertex,count CSV");
  sim->add_option("--chi", sa.chi, "step,statistic,df CSV");
  sim->add_option("--groups", sa.groups, "vertex,label CSV pooling vertices for chi-squared");

  BenchmarkArgs ba;
  auto* bench = app.add_subcommand("benchmark", "ML against WLS bias on simulated corpora");
  bench->add_option("--graph", ba.graph)->check(CLI::ExistingFile);
  bench->add_option("--random-graph", ba.random_graph, "Vertices of a random strongly connected graph");
  bench->add_option("--extra-edges", ba.extra_edges, "Chords added to the random graph (default 2n)");
  bench->add_option("--kernel", ba.kernel)->check(CLI::ExistingFile);
  bench->add_option("--dirichlet", ba.dirichlet, "Seed of a random flat-Dirichlet kernel");
  bench->add_option("--k", ba.ks, "Trajectory counts")->delimiter(',');
  bench->add_option("--n", ba.ns, "Trajectory lengths")->delimiter(',');
  bench->add_option("--reps", ba.reps);
  bench->add_option("--seed", ba.seed);
  bench->add_option("--threads", ba.threads)->check(CLI::PositiveNumber);
  bench->add_option("--out", ba.out, "CSV path (default stdout)");

  std::string perturb;
  auto* toy = app.add_subcommand("toy", "Check the toy network pipeline against reference values");
  toy->add_option("--perturb", perturb, "Shift the named computed value (test hook)");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Descriptive statistics of trajectory lengths");
  stats->add_option("--graph", st.graph)->required()->check(CLI::ExistingFile);
  stats->add_option("--corpus", st.corpus)->required()->check(CLI::ExistingFile);
  stats->add_option("--hist", st.hist, "length,count CSV");

  try {
    std::vector<std::string> full = args;
    inject_config(app, full);
    std::vector<std::string> reversed(full.rbegin(), full.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, globals.json, "UsageError", e.what(), 2);
    return 2;
  } catch (const UsageError& e) {
    report_error(err, globals.json, "UsageError", e.what(), 2);
    return 2;
  }

  try {
    if (*build) cmd_build_graph(bg, out);
    else if (*match) cmd_match(ma, out);
    else if (*estimate) cmd_estimate(ea, out);
    else if (*sim) cmd_simulate(sa, out);
    else if (*bench) cmd_benchmark(ba, out);
    else if (*toy) return cmd_toy(perturb, globals.json, out);
    else if (*stats) cmd_stats(st, out);
    return 0;
  } catch (const UsageError& e) {
    report_error(err, globals.json, "UsageError", e.what(), 2);
    return 2;
  } catch (const Error& e) {
    const int code = is_input_error(e.code()) ? 2 : 1;
    report_error(err, globals.json, std::string(to_string(e.code())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(err, globals.json, "InternalError", e.what(), 1);
    return 1;
  }
}

}  // namespace mtraffic::cli
