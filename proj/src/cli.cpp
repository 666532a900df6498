#include "dvfsim/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <future>
#include <ostream>

#include "dvfsim/error.hpp"
#include "dvfsim/io.hpp"
#include "dvfsim/report.hpp"
#include "dvfsim/sim.hpp"

namespace dvfsim {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path out_dir(const Globals& g, const fs::path& fallback = ".") {
  fs::path dir = g.out.empty() ? fallback : fs::path(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void require_config(const Globals& g, const char* command) {
  if (g.config.empty()) throw ConfigError(std::string(command) + " needs --config PATH");
}

int cmd_generate(const Globals& g, const std::string& kind, int n, std::ostream& out) {
  const TaskGraph graph = generate_graph(parse_factorization(kind), n);
  const fs::path dir = out_dir(g);
  write_file(dir / "graph.json", graph_to_json(graph));
  write_file(dir / "graph.dot", graph_to_dot(graph));
  if (!g.quiet)
    out << kind << " N=" << n << ": " << graph.size() << " tasks, " << graph.edges().size() << " edges -> "
        << (dir / "graph.json").string() << "\n";
  return kExitOk;
}

int cmd_simulate(const Globals& g, const std::string& policy, std::ostream& out) {
  require_config(g, "simulate");
  SimConfig cfg = load_sim_config(g.config);
  if (!policy.empty()) cfg.policy = parse_policy(policy);
  if (g.seed_set) cfg.seed = g.seed;
  const SimTrace trace = simulate(cfg);
  const EnergyReport report = metrics(trace);
  const fs::path dir = out_dir(g);
  write_file(dir / "trace.csv", trace_csv(trace));
  write_file(dir / "schedule.csv", schedule_csv(trace));
  write_file(dir / "report.json", report_json({cfg.policy, report, 0.0, 0.0}) + "\n");
  if (!g.quiet)
    out << to_string(cfg.policy) << ": energy " << fixed(report.total_energy, 3) << " J, makespan "
        << fixed(report.makespan, 6) << " s, " << fixed(report.mflops_per_watt, 3) << " MFLOPS/W\n";
  return kExitOk;
}

int cmd_compare(const Globals& g, std::ostream& out) {
  require_config(g, "compare");
  ExperimentSpec spec = load_experiment(g.config);
  if (g.seed_set) spec.config.seed = g.seed;
  const fs::path dir = out_dir(g, spec.out_dir.empty() ? fs::path(".") : spec.out_dir);

  std::vector<std::future<EnergyReport>> runs;
  for (PolicyKind k : spec.policies) {
    SimConfig cfg = spec.config;
    cfg.policy = k;
    runs.push_back(std::async(std::launch::async, [cfg] { return metrics(simulate(cfg)); }));
  }
  std::vector<std::pair<PolicyKind, EnergyReport>> reports;
  for (std::size_t i = 0; i < runs.size(); ++i) reports.emplace_back(spec.policies[i], runs[i].get());

  const auto rows = compare(reports, spec.baseline);
  write_file(dir / "comparison.csv", comparison_csv(rows));
  write_file(dir / "comparison.json", comparison_json(rows) + "\n");
  if (!g.quiet) {
    out << "policy      energy_J      makespan_s   MFLOPS/W   savings%   loss%\n";
    for (const auto& r : rows) {
      std::string name(to_string(r.policy));
      name.resize(10, ' ');
      out << name << "  " << fixed(r.report.total_energy, 3) << "  " << fixed(r.report.makespan, 6) << "  "
          << fixed(r.report.mflops_per_watt, 3) << "  " << fixed(r.savings_pct, 3) << "  " << fixed(r.loss_pct, 3)
          << "\n";
    }
  }
  return kExitOk;
}

int cmd_model(const Globals& g, const std::string& table_key, int points, double probe_n, std::ostream& out) {
  if (points < 2) throw ConfigError("--points must be >= 2");
  PowerParams params = PowerParams::defaults();
  if (!g.config.empty()) params = load_sim_config(g.config).power;

  std::vector<const GearTable*> tables;
  if (table_key == "all")
    for (const auto& [k, t] : builtin_gear_tables()) tables.push_back(&t);
  else
    tables.push_back(&builtin_gear_table(table_key));

  const PowerParams basis[] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (const GearTable* t : tables) {
    const double n_max = t->f_high() / t->f_low();
    out << t->name() << " (n in [1, " << fixed(n_max, 4) << "], ac=" << fixed(params.ac, 4)
        << " i_sub=" << fixed(params.i_sub, 4) << " p_const=" << fixed(params.p_const, 4) << ")\n";
    out << "  n         v_m      E_stretch/E_race\n";
    for (int i = 0; i < points; ++i) {
      const SlackRatio n(1.0 + (n_max - 1.0) * i / (points - 1));
      const double v_m = stretch_voltage(*t, n);
      out << "  " << fixed(n.value(), 4) << "    " << fixed(v_m, 3) << "    "
          << fixed(energy_ratio(params, *t, n, v_m), 6) << "\n";
    }
    if (probe_n >= 1.0 && probe_n <= n_max) {
      const SlackRatio n(probe_n);
      const double v_m = stretch_voltage(*t, n);
      out << "  coefficients at n=" << probe_n << " (ac, i_sub, p_const):\n    race-to-halt  ";
      for (const auto& b : basis) out << ' ' << energy_race_to_halt(b, *t, 1.0, n);
      out << "\n    cp-stretch    ";
      for (const auto& b : basis) out << ' ' << energy_cp_stretch(b, *t, 1.0, n, v_m);
      out << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"DVFS scheduling simulator for blocked factorization task graphs", "dvfsim"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "config JSON file");
  app.add_option("--out", g.out, "output directory");
  auto* seed = app.add_option("--seed", g.seed, "random seed (reserved)");
  app.add_flag("--quiet", g.quiet, "suppress summaries");

  std::string kind;
  int n_blocks = 0;
  auto* gen = app.add_subcommand("generate", "write a task graph as JSON and DOT");
  gen->add_option("kind", kind, "cholesky, lu or qr")->required();
  gen->add_option("n", n_blocks, "blocks per matrix side")->required();

  std::string policy;
  auto* sim = app.add_subcommand("simulate", "simulate one policy");
  sim->add_option("--policy", policy, "override the config's policy");

  auto* cmp = app.add_subcommand("compare", "simulate several policies against a baseline");

  std::string table = "all";
  int points = 11;
  double probe_n = 1.25;
  auto* model = app.add_subcommand("model", "tabulate the stretch / race-to-halt energy ratio");
  model->add_option("--table", table, "gear table key, or all");
  model->add_option("--points", points, "samples of n per table");
  model->add_option("--n", probe_n, "slack ratio for the coefficient probe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }
  g.seed_set = seed->count() > 0;

  try {
    if (*gen) return cmd_generate(g, kind, n_blocks, out);
    if (*sim) return cmd_simulate(g, policy, out);
    if (*cmp) return cmd_compare(g, out);
    if (*model) return cmd_model(g, table, points, probe_n, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace dvfsim
