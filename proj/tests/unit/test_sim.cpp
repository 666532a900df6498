#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dvfsim/error.hpp"
#include "dvfsim/sim.hpp"
#include "oracles.hpp"

using namespace dvfsim;

namespace {

SimConfig config(Factorization kind, int n, int pr, int pc, PolicyKind policy, int b = 64) {
  SimConfig c;
  c.kind = kind;
  c.n_blocks = n;
  c.grid = {pr, pc, b};
  c.policy = policy;
  return c;
}

// Earliest start of every task ignoring communication and process
// contention: a lower bound on any simulated start time.
std::vector<double> earliest_starts(const TaskGraph& g, const KernelCost& cost, double ghz) {
  std::vector<double> start(g.size(), 0.0);
  std::vector<DepEdge> edges(g.edges().begin(), g.edges().end());
  std::sort(edges.begin(), edges.end(), [](const DepEdge& a, const DepEdge& b) { return a.to < b.to; });
  for (const auto& e : edges) {
    const std::size_t u = g.index_of(e.from);
    const double fin = start[u] + static_cast<double>(cost.cycles_for(e.from.kind)) / (ghz * 1e9);
    auto& s = start[g.index_of(e.to)];
    s = std::max(s, fin);
  }
  return start;
}

}  // namespace

TEST_CASE("single task on one process") {
  const SimTrace t = simulate(config(Factorization::Cholesky, 1, 1, 1, PolicyKind::Orig));
  REQUIRE(t.lanes.size() == 1);
  REQUIRE(t.lanes[0].size() == 1);
  const Segment& s = t.lanes[0][0];
  CHECK(s.activity == Activity::Compute);
  const double want = static_cast<double>(t.cost.cycles_for(TaskKind::Factorize)) / (t.table.f_high() * 1e9);
  CHECK(s.duration() == doctest::Approx(want).epsilon(1e-15));
  CHECK(t.makespan == s.t_end);
}

TEST_CASE("pure chain on one process sums task durations") {
  for (auto policy : all_policies()) {
    CAPTURE(to_string(policy));
    const SimTrace t = simulate(config(Factorization::Cholesky, 2, 1, 1, policy));
    double sum = 0.0;
    for (const auto& task : t.graph.tasks())
      sum += static_cast<double>(t.cost.cycles_for(task.kind)) / (t.table.f_high() * 1e9);
    if (policy == PolicyKind::Orig || policy == PolicyKind::CpTheo) CHECK(t.makespan == doctest::Approx(sum).epsilon(1e-12));
    CHECK(t.makespan >= sum * (1 - 1e-12));
  }
}

TEST_CASE("trace invariants for every policy") {
  struct Case {
    Factorization kind;
    int n, pr, pc, b;
  };
  const Case cases[] = {{Factorization::Cholesky, 4, 2, 2, 64}, {Factorization::Cholesky, 6, 2, 3, 128},
                        {Factorization::LU, 5, 2, 2, 96},       {Factorization::QR, 5, 3, 2, 96},
                        {Factorization::Cholesky, 3, 4, 4, 32}, {Factorization::LU, 1, 2, 2, 32}};
  for (const auto& c : cases)
    for (auto policy : all_policies()) {
      CAPTURE(to_string(c.kind));
      CAPTURE(c.n);
      CAPTURE(to_string(policy));
      SimConfig cfg = config(c.kind, c.n, c.pr, c.pc, policy, c.b);
      cfg.policy_params.interval = 2e-3;
      const SimTrace t = simulate(cfg);
      CHECK(oracle::check_tiling(t) == "");
      CHECK(oracle::check_work_conservation(t) == "");
      CHECK(oracle::check_dependencies(t) == "");
      if (policy == PolicyKind::Tx) {
        CHECK(oracle::check_done_flags(t) == "");
        for (const auto& lane : t.lanes)
          for (const auto& s : lane) CHECK((s.gear == t.table.high_index() || s.gear == t.table.low_index()));
      } else {
        CHECK(t.done_flags.empty());
      }
      if (policy == PolicyKind::Orig)
        for (const auto& lane : t.lanes)
          for (const auto& s : lane) CHECK(s.gear == 0);
      CHECK(simulate(cfg).makespan == t.makespan);
    }
}

TEST_CASE("simulation is deterministic to the byte") {
  for (auto policy : all_policies()) {
    SimConfig cfg = config(Factorization::Cholesky, 6, 2, 2, policy, 128);
    cfg.policy_params.interval = 1e-3;
    const SimTrace a = simulate(cfg);
    const SimTrace b = simulate(cfg);
    CHECK(trace_csv(a) == trace_csv(b));
    CHECK(schedule_csv(a) == schedule_csv(b));
  }
}

TEST_CASE("TX halts a process at f_low before its first task") {
  const SimConfig cfg = config(Factorization::Cholesky, 4, 2, 2, PolicyKind::Tx, 128);
  const SimTrace t = simulate(cfg);
  const auto lower = earliest_starts(t.graph, t.cost, t.table.f_high());
  const auto programs = program_order(t.graph, cfg.grid);
  int halted = 0;
  for (int p = 0; p < t.process_count(); ++p) {
    if (programs[p].empty()) continue;
    const std::size_t first = programs[p].front();
    if (t.graph.tds_in(first).empty()) continue;
    double halt = 0.0;
    for (const auto& s : t.lanes[p]) {
      if (s.t_start >= t.schedule[first].start) break;
      if (s.activity == Activity::Idle) {
        CHECK(s.gear == t.table.low_index());
        halt += s.duration();
      }
    }
    CHECK(t.schedule[first].start >= lower[first]);
    if (halt > 0.0) ++halted;
  }
  CHECK(halted >= 1);

  SimConfig orig = cfg;
  orig.policy = PolicyKind::Orig;
  const SimTrace o = simulate(orig);
  CHECK(replay_energy(t, t.power, t.table).total_energy < replay_energy(o, o.power, o.table).total_energy);
}

TEST_CASE("OS-level SC leaves the pre-start idle gear alone") {
  const SimTrace t = simulate(config(Factorization::Cholesky, 4, 2, 2, PolicyKind::Fermata, 128));
  for (const auto& lane : t.lanes)
    if (lane.front().activity == Activity::Idle) CHECK(lane.front().gear == 0);
}

TEST_CASE("cp-theo can split a task across two gears") {
  SimConfig cfg = config(Factorization::Cholesky, 8, 2, 2, PolicyKind::CpTheo, 256);
  const SimTrace t = simulate(cfg);
  int splits = 0;
  std::map<std::size_t, std::set<GearIndex>> gears;
  for (const auto& lane : t.lanes)
    for (const auto& s : lane)
      if (s.activity == Activity::Compute) gears[*s.task].insert(s.gear);
  for (const auto& [task, g] : gears) splits += g.size() == 2;
  CHECK(splits > 0);
  CHECK(oracle::check_work_conservation(t) == "");
}

TEST_CASE("replay energy") {
  SimTrace t{PolicyKind::Orig,
             generate_graph(Factorization::Cholesky, 1),
             builtin_gear_table("opteron-2218"),
             PowerParams{2.0, 1.5, 10.0},
             KernelCost::dense(Factorization::Cholesky, 8),
             {},
             {},
             {},
             {},
             3.0};
  t.lanes.push_back({{0.0, 1.0, 0, 0, Activity::Compute, 0, 1, -1},
                     {1.0, 1.5, 3, 0, Activity::Transition, {}, 0, -1},
                     {1.5, 3.0, 3, 3, Activity::Idle, {}, 0, -1}});
  const double p_h = 2.0 * 2.4 * 1.25 * 1.25 + 1.5 * 1.25 + 10.0;
  const double p_l = 2.0 * 1.0 * 1.10 * 1.10 + 1.5 * 1.10 + 10.0;
  const double want = p_h * 1.0 + p_h * 0.5 + p_l * 1.5;
  const EnergyReport r = replay_energy(t, t.power, t.table);
  CHECK(std::abs(r.total_energy - want) <= 1e-9 * want);
  CHECK(r.total_energy == doctest::Approx(oracle::hand_energy(t)).epsilon(1e-12));
  CHECK(r.per_process.at(0).busy_fraction == doctest::Approx(1.0 / 3.0));
  CHECK(replay_energy(t, t.power, t.table).total_energy == r.total_energy);

  t.lanes.push_back(t.lanes[0]);
  const EnergyReport r2 = replay_energy(t, t.power, t.table);
  CHECK(r2.total_energy == doctest::Approx(2 * want).epsilon(1e-14));
  CHECK(r2.per_process[0].energy + r2.per_process[1].energy == r2.total_energy);

  // 10 s at 7 W
  SimTrace c = t;
  c.power = {0, 0, 7};
  c.lanes = {{{0.0, 10.0, 0, 0, Activity::Idle, {}, 0, -1}}};
  CHECK(replay_energy(c, c.power, c.table).total_energy == doctest::Approx(70.0));
}

TEST_CASE("CSV exports") {
  const SimTrace t = simulate(config(Factorization::Cholesky, 2, 1, 1, PolicyKind::Tx));
  const std::string trace = trace_csv(t);
  CHECK(trace.rfind("process,t_start,t_end,ghz,volts,watts,activity,task\n", 0) == 0);
  CHECK(trace.find(",compute,F(1,1)@1") != std::string::npos);
  const std::string sched = schedule_csv(t);
  CHECK(sched.rfind("task,kind,row,col,process,start,finish\n", 0) == 0);
  CHECK(std::count(sched.begin(), sched.end(), '\n') == 5);
}

TEST_CASE("config validation names fields") {
  SimConfig c = config(Factorization::Cholesky, 2, 0, 1, PolicyKind::Orig);
  CHECK_THROWS_WITH_AS(simulate(c), doctest::Contains("grid.p_rows"), ConfigError);
  c = config(Factorization::Cholesky, 2, 1, 1, PolicyKind::Orig);
  c.comm.cpu_bound_fraction = 2.0;
  CHECK_THROWS_WITH_AS(simulate(c), doctest::Contains("comm.cpu_bound_fraction"), ConfigError);
  c = config(Factorization::Cholesky, 2, 1, 1, PolicyKind::Orig);
  c.transition_latency = -1;
  CHECK_THROWS_WITH_AS(simulate(c), doctest::Contains("transition_latency"), ConfigError);
  c = config(Factorization::Cholesky, 0, 1, 1, PolicyKind::Orig);
  CHECK_THROWS_AS(simulate(c), ConfigError);
}

TEST_CASE("zero transition latency and zero-latency DoneFlags") {
  for (auto policy : all_policies()) {
    SimConfig c = config(Factorization::Cholesky, 5, 2, 2, policy, 64);
    c.transition_latency = 0.0;
    c.comm.zero_latency_doneflags = true;
    c.policy_params.interval = 1e-3;
    const SimTrace t = simulate(c);
    CHECK(oracle::check_tiling(t) == "");
    CHECK(oracle::check_work_conservation(t) == "");
    CHECK(oracle::check_dependencies(t) == "");
    for (const auto& lane : t.lanes)
      for (const auto& s : lane) CHECK(s.activity != Activity::Transition);
  }
}
