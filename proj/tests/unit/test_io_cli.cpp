#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvfsim/cli.hpp"
#include "dvfsim/error.hpp"
#include "dvfsim/io.hpp"

using namespace dvfsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("DVFSIM_TEST_TMP");
  fs::path dir = fs::path(env ? env : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dvfsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kChain = R"({
  "schema_version": 1,
  "graph": {"kind": "cholesky", "n_blocks": 2},
  "grid": {"p_rows": 1, "p_cols": 1, "block_size": 64},
  "policy": "orig"
})";

}  // namespace

TEST_CASE("graph JSON round trip") {
  for (auto kind : {Factorization::Cholesky, Factorization::LU, Factorization::QR})
    for (int n : {1, 2, 5}) {
      const TaskGraph g = generate_graph(kind, n);
      CHECK(graph_from_json(graph_to_json(g)) == g);
    }
}

TEST_CASE("graph DOT marks implicit edges dashed") {
  const TaskGraph g = generate_graph(Factorization::Cholesky, 3);
  const std::string dot = graph_to_dot(g);
  std::size_t implicit = 0;
  for (const auto& e : g.edges()) implicit += e.kind == DepKind::Implicit;
  std::size_t dashed = 0;
  for (std::size_t pos = 0; (pos = dot.find("[style=dashed]", pos)) != std::string::npos; ++pos) ++dashed;
  CHECK(implicit > 0);
  CHECK(dashed == implicit);
  CHECK(dot.find("\"F(1,1)@1\" -> \"S(2,1)@1\";") != std::string::npos);
}

TEST_CASE("malformed graph documents") {
  CHECK_THROWS_AS(graph_from_json("{"), ConfigError);
  CHECK_THROWS_AS(graph_from_json(R"({"n_blocks": 1, "kind": "svd", "tasks": [], "edges": []})"), ConfigError);
  CHECK_THROWS_WITH_AS(
      graph_from_json(R"({"n_blocks": 1, "kind": "lu", "tasks": [{"kind": "factorize", "row": 1, "col": 1}], "edges": []})"),
      doctest::Contains("step"), ConfigError);
}

TEST_CASE("config parsing names the bad field") {
  CHECK_NOTHROW(parse_sim_config(kChain));
  CHECK_THROWS_WITH_AS(parse_sim_config(R"({"schema_version": 2, "graph": {"kind": "lu", "n_blocks": 2}})"),
                       doctest::Contains("schema_version"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_sim_config(R"({"schema_version": 1, "graph": {"kind": "lu", "n_blocks": 2}, "colour": 1})"),
      doctest::Contains("colour"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_sim_config(R"({"schema_version": 1, "graph": {"kind": "lu", "n_blocks": 2}, "grid": {"p_rows": 0}})"),
      doctest::Contains("grid.p_rows"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_sim_config(R"({"schema_version": 1, "graph": {"kind": "lu", "n_blocks": 2},
                                            "policy": {"name": "cpuspeed", "lambda": 3}})"),
                       doctest::Contains("lambda"), ConfigError);
  CHECK_THROWS_AS(parse_sim_config(R"({"schema_version": 1, "graph": {"kind": "lu", "n_blocks": 2},
                                       "gear_table": {"name": "x", "gears": [{"ghz": 1, "volts": 1}, {"ghz": 2, "volts": 1}]}})"),
                  ConfigError);

  const SimConfig c = parse_sim_config(R"({"schema_version": 1, "graph": {"kind": "qr", "n_blocks": 3},
      "gear_table": "pentium-m", "power": {"ac": 1, "i_sub": 0, "p_const": 2},
      "cost": {"cycles": {"factorize": 10}}, "comm": {"zero_latency_doneflags": true},
      "transition_latency": 0, "policy": {"name": "fermata", "interval": 0.5}})");
  CHECK(c.kind == Factorization::QR);
  CHECK(c.table.f_high() == 1.4);
  CHECK(c.power == PowerParams{1, 0, 2});
  CHECK(c.kernel_cost().cycles_for(TaskKind::Factorize) == 10);
  CHECK(c.comm.zero_latency_doneflags);
  CHECK(c.transition_latency == 0.0);
  CHECK(c.policy == PolicyKind::Fermata);
  CHECK(c.policy_params.interval == 0.5);
}

TEST_CASE("experiment parsing") {
  const std::string base = R"("schema_version": 1, "graph": {"kind": "lu", "n_blocks": 2})";
  const auto spec = parse_experiment("{" + base + R"(, "policies": ["tx", "orig"]})");
  CHECK(spec.policies.size() == 2);
  CHECK(spec.baseline == PolicyKind::Tx);
  CHECK_THROWS_AS(parse_experiment("{" + base + R"(, "policies": ["tx"]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("{" + base + R"(, "policies": ["tx", "tx"]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("{" + base + R"(, "policies": ["tx", "cp"], "baseline": "orig"})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("{" + base + "}"), ConfigError);
}

TEST_CASE("cli generate") {
  const fs::path dir = scratch("generate");
  Run r = cli({"--out", dir.string(), "generate", "cholesky", "4"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("20 tasks") != std::string::npos);
  const TaskGraph g = graph_from_json(read_file(dir / "graph.json"));
  CHECK(g.size() == 20);
  CHECK(fs::exists(dir / "graph.dot"));

  CHECK(cli({"--out", dir.string(), "--quiet", "generate", "cholesky", "1"}).code == kExitOk);
  CHECK(graph_from_json(read_file(dir / "graph.json")).size() == 1);
  CHECK(cli({"--out", dir.string(), "generate", "lu", "2"}).code == kExitOk);
  CHECK(cli({"--out", dir.string(), "generate", "cholesky", "0"}).code == kExitValidation);
  CHECK(cli({"--out", dir.string(), "generate", "svd", "3"}).code == kExitValidation);
  CHECK(cli({"generate"}).code == kExitValidation);
}

TEST_CASE("cli simulate") {
  const fs::path dir = scratch("simulate");
  write_file(dir / "chain.json", kChain);
  Run r = cli({"--config", (dir / "chain.json").string(), "--out", (dir / "orig").string(), "simulate"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("orig: energy ", 0) == 0);
  const auto rep = nlohmann::json::parse(read_file(dir / "orig" / "report.json"));
  CHECK(rep.at("policy") == "orig");
  CHECK(rep.at("makespan_s").get<double>() > 0.0);
  CHECK(read_file(dir / "orig" / "schedule.csv").find("F(2,2)@2") != std::string::npos);

  r = cli({"--config", (dir / "chain.json").string(), "--out", (dir / "tx").string(), "simulate", "--policy", "tx"});
  REQUIRE(r.code == kExitOk);
  const std::string trace = read_file(dir / "tx" / "trace.csv");
  std::istringstream lines(trace);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() >= 7);
    CHECK((cols[3] == "2.5" || cols[3] == "0.8"));
  }

  CHECK(cli({"--config", (dir / "missing.json").string(), "simulate"}).code == kExitIo);
  CHECK(cli({"simulate"}).code == kExitValidation);
  CHECK(cli({"--config", (dir / "chain.json").string(), "simulate", "--policy", "magic"}).code == kExitValidation);
}

TEST_CASE("cli compare") {
  const fs::path dir = scratch("compare");
  nlohmann::json cfg = nlohmann::json::parse(kChain);
  cfg["policies"] = {"orig"};
  write_file(dir / "one.json", cfg.dump());
  CHECK(cli({"--config", (dir / "one.json").string(), "compare"}).code == kExitValidation);

  cfg["policies"] = {"orig", "tx"};
  cfg["graph"]["n_blocks"] = 3;
  cfg["grid"]["p_rows"] = 2;
  write_file(dir / "two.json", cfg.dump());
  Run r = cli({"--config", (dir / "two.json").string(), "--out", (dir / "out").string(), "compare"});
  REQUIRE(r.code == kExitOk);
  const auto rows = nlohmann::json::parse(read_file(dir / "out" / "comparison.json"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("policy") == "orig");
  CHECK(rows[0].at("savings_pct") == 0.0);
  CHECK(rows[0].at("loss_pct") == 0.0);
  CHECK(rows[1].at("policy") == "tx");
  CHECK(fs::exists(dir / "out" / "comparison.csv"));
}

TEST_CASE("cli model") {
  Run r = cli({"model", "--table", "opteron-2218", "--points", "3"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("AMD Opteron 2218") != std::string::npos);
  CHECK(r.out.find("4.0525 1.525 1.25") != std::string::npos);
  CHECK(cli({"model", "--table", "nope"}).code == kExitValidation);
  CHECK(cli({"model", "--points", "1"}).code == kExitValidation);
  CHECK(cli({"model"}).out.find("Intel Pentium M") != std::string::npos);
}

TEST_CASE("cli graph file round trip") {
  const fs::path dir = scratch("graphfile");
  REQUIRE(cli({"--out", dir.string(), "--quiet", "generate", "qr", "3"}).code == kExitOk);
  write_file(dir / "cfg.json", R"({"schema_version": 1, "graph": {"file": "graph.json"},
                                   "grid": {"p_rows": 2, "p_cols": 1, "block_size": 32}})");
  const SimConfig c = load_sim_config(dir / "cfg.json");
  REQUIRE(c.graph.has_value());
  CHECK(*c.graph == generate_graph(Factorization::QR, 3));
  CHECK(cli({"--config", (dir / "cfg.json").string(), "--out", dir.string(), "--quiet", "simulate"}).code == kExitOk);
}

TEST_CASE("file errors carry the path") {
  CHECK_THROWS_WITH_AS(read_file("/nonexistent/dir/x.json"), doctest::Contains("/nonexistent/dir/x.json"), IoError);
  CHECK_THROWS_AS(write_file("/nonexistent/dir/x.json", "x"), IoError);
}
