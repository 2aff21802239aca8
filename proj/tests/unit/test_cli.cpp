#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kDir = MTRAFFIC_FIXTURES;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = mtraffic::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("mtraffic_cli_test_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

const std::string toy_graph = kDir + "/toy_graph.txt";
const std::string toy_kernel = kDir + "/toy_kernel.txt";
const std::string toy_corpus = kDir + "/toy_corpus.txt";

}  // namespace

TEST_CASE("toy command") {
  const Result r = run({"toy"});
  CHECK(r.code == 0);
  for (const auto& c : mtraffic::cli::run_toy_checks()) CHECK_MESSAGE(c.passed, c.name);

  const Result bad = run({"toy", "--perturb", "lambda"});
  CHECK(bad.code == 1);
  for (const auto& c : mtraffic::cli::run_toy_checks("lambda")) CHECK(c.passed == (c.name != "lambda"));

  const json j = json::parse(run({"--json", "toy"}).out);
  CHECK(j["passed"] == true);
  CHECK(j["checks"].size() == 25);
}

TEST_CASE("build-graph") {
  TempDir tmp;
  const Result r = run({"build-graph", "--osm", kDir + "/two_ways.osm", "--out", tmp.file("g.txt"), "--hist-dir",
                        tmp.path.string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["vertices"] == 6);
  CHECK(j["edges"] == 10);
  CHECK(fs::exists(tmp.file("vertex_in.csv")));

  REQUIRE(run({"build-graph", "--graph", tmp.file("g.txt"), "--out", tmp.file("g2.txt")}).code == 0);
  CHECK(slurp(tmp.file("g.txt")) == slurp(tmp.file("g2.txt")));

  const json toy = json::parse(run({"build-graph", "--graph", toy_graph}).out);
  CHECK(toy["histograms"]["vertex_out"] == toy["histograms"]["vertex_in"]);
  CHECK(toy["histograms"]["vertex_out"][2]["degree"] == 3);

  const Result empty = run({"--json", "build-graph", "--osm", kDir + "/two_ways.osm", "--bbox", "0,0,1,1"});
  CHECK(empty.code == 2);
  CHECK(json::parse(empty.err)["error"] == "EmptyResult");
}

TEST_CASE("estimate") {
  const Result wls = run({"estimate", "--graph", toy_graph, "--corpus", toy_corpus, "--method", "wls"});
  REQUIRE(wls.code == 0);
  const json w = json::parse(wls.out);
  CHECK(w["n_eff"] == 2350.0);
  const std::vector<double> pw{0.149, 0.362, 0.142, 0.213, 0.135};
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(w["pi"]["pi"][i].get<double>() - pw[i]) < 1e-2);

  const json ml = json::parse(run({"estimate", "--graph", toy_graph, "--corpus", toy_corpus, "--method", "ml"}).out);
  const std::vector<double> pm{0.224, 0.398, 0.1, 0.174, 0.104};
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(ml["pi"]["pi"][i].get<double>() - pm[i]) < 1e-3);

  const Result off = run({"estimate", "--graph", toy_graph, "--corpus", kDir + "/toy_corpus_offgraph.txt"});
  CHECK(off.code == 0);
  CHECK(json::parse(off.out)["skipped"]["count"] == 1);

  CHECK(run({"estimate", "--graph", toy_graph, "--corpus", toy_corpus, "--method", "bogus"}).code == 2);
}

TEST_CASE("simulate") {
  TempDir tmp;
  const std::vector<std::string> base{"simulate", "--graph", toy_graph, "--kernel", toy_kernel, "--init", "2:10000",
                                      "--steps", "500", "--seed", "42"};
  auto with = [&](std::initializer_list<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra);
    return a;
  };
  REQUIRE(run(with({"--log", tmp.file("a.csv"), "--chi", tmp.file("a_chi.csv")})).code == 0);
  REQUIRE(run(with({"--log", tmp.file("b.csv"), "--chi", tmp.file("b_chi.csv"), "--threads", "3"})).code == 0);
  CHECK(slurp(tmp.file("a.csv")) == slurp(tmp.file("b.csv")));
  CHECK(slurp(tmp.file("a_chi.csv")) == slurp(tmp.file("b_chi.csv")));

  // Final counts from the log against pi = (1,2,1,2,1)/7.
  std::istringstream log(slurp(tmp.file("a.csv")));
  std::string line;
  std::vector<double> last(5, 0.0);
  std::getline(log, line);
  while (std::getline(log, line)) {
    std::size_t step = 0;
    long vertex = 0;
    double count = 0;
    char c1 = 0;
    char c2 = 0;
    std::istringstream(line) >> step >> c1 >> vertex >> c2 >> count;
    if (step == 500) last[static_cast<std::size_t>(vertex - 1)] = count / 10000.0;
  }
  const std::vector<double> pi{1 / 7.0, 2 / 7.0, 1 / 7.0, 2 / 7.0, 1 / 7.0};
  for (std::size_t v = 0; v < 5; ++v) CHECK(std::abs(last[v] - pi[v]) < 0.01);

  CHECK(run({"simulate", "--graph", toy_graph, "--kernel", toy_kernel, "-k", "0", "--seed", "1"}).code == 2);
  CHECK(run({"simulate", "--graph", toy_graph, "--kernel", toy_kernel, "--init", "2:10", "-k", "11", "--seed", "1"}).code == 2);
}

TEST_CASE("config files fill in missing options") {
  TempDir tmp;
  {
    std::ofstream cfg(tmp.file("sim.cfg"));
    cfg << "# simulation\nseed = 42\nsteps = 20\nk = 100\nlog = " << tmp.file("cfg.csv") << "\n";
  }
  REQUIRE(run({"--config", tmp.file("sim.cfg"), "simulate", "--graph", toy_graph, "--kernel", toy_kernel}).code == 0);
  REQUIRE(run({"simulate", "--graph", toy_graph, "--kernel", toy_kernel, "--seed", "42", "--steps", "20", "-k", "100",
               "--log", tmp.file("flags.csv")})
              .code == 0);
  CHECK(slurp(tmp.file("cfg.csv")) == slurp(tmp.file("flags.csv")));

  {
    std::ofstream cfg(tmp.file("bad.cfg"));
    cfg << "no_such_option = 1\n";
  }
  CHECK(run({"--config", tmp.file("bad.cfg"), "toy"}).code == 2);
}

TEST_CASE("benchmark") {
  const std::vector<std::string> args{"benchmark", "--graph", toy_graph, "--kernel", toy_kernel, "--k", "50",
                                      "--n",       "3",       "--reps", "1",       "--seed", "5"};
  const Result a = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == run(args).out);
  CHECK(a.out.rfind("k,n,method,mean_bias,sd_bias\n", 0) == 0);
  CHECK(run({"benchmark", "--graph", toy_graph, "--kernel", toy_kernel, "--k", "50", "--n", "3"}).code == 2);
}

TEST_CASE("match and stats") {
  TempDir tmp;
  const Result m = run({"match", "--osm", kDir + "/islands.osm", "--ttp", kDir + "/trips.csv", "--bbox",
                        "-8.6518,41.1129,-8.5771,41.1756", "--window", "08:00-09:00", "--out", tmp.file("c.txt")});
  REQUIRE(m.code == 0);
  CHECK(json::parse(m.out)["splits"] == 1);

  const Result s = run({"stats", "--graph", toy_graph, "--corpus", toy_corpus});
  REQUIRE(s.code == 0);
  CHECK(json::parse(s.out)["length_points"]["mean"].get<double>() == doctest::Approx(3.35));
}
