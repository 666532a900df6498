#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dvfsim/costmodel.hpp"
#include "dvfsim/dag.hpp"
#include "dvfsim/policies.hpp"
#include "dvfsim/power.hpp"

namespace dvfsim {

struct SimConfig {
  Factorization kind = Factorization::Cholesky;
  int n_blocks = 4;
  std::optional<TaskGraph> graph;  // overrides kind / n_blocks when set
  ProcessGrid grid;
  GearTable table = builtin_gear_table("opteron-2380");
  PowerParams power = PowerParams::defaults();
  std::optional<KernelCost> cost;  // dense kernel counts for the block size when unset
  CommModel comm;
  double transition_latency = kDefaultTransitionLatency;
  PolicyKind policy = PolicyKind::Orig;
  PolicyParams policy_params;
  std::uint64_t seed = 0;  // reserved; every policy is deterministic

  TaskGraph build_graph() const;
  KernelCost kernel_cost() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

enum class Activity : std::uint8_t { Compute, Communicate, Idle, Transition };

std::string_view to_string(Activity activity);

/// A stretch of constant gear and activity on one process. A transition
/// segment runs at `from_gear` -> `gear`. Compute segments carry the cycles
/// they retired; communicate segments the task whose block is sent and the
/// receiving process.
struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  GearIndex gear = 0;
  GearIndex from_gear = 0;
  Activity activity = Activity::Idle;
  std::optional<std::size_t> task;
  std::int64_t cycles = 0;
  int peer = -1;

  double duration() const { return t_end - t_start; }
};

struct ScheduleEntry {
  double start = 0.0;   // first compute cycle
  double finish = 0.0;  // last compute cycle
  int process = 0;
};

struct MessageRecord {
  std::size_t task = 0;  // producer
  int from_process = 0;
  int to_process = 0;
  double depart = 0.0;
  double arrive = 0.0;
};

struct DoneFlagRecord {
  std::size_t from = 0;
  std::size_t to = 0;
  double sent = 0.0;
  double delivered = 0.0;
};

struct SimTrace {
  PolicyKind policy = PolicyKind::Orig;
  TaskGraph graph;
  GearTable table;
  PowerParams power;
  KernelCost cost;
  std::vector<std::vector<Segment>> lanes;  // per process, tiling [0, makespan]
  std::vector<ScheduleEntry> schedule;      // indexed like graph.tasks()
  std::vector<MessageRecord> messages;
  std::vector<DoneFlagRecord> done_flags;   // TX only
  double makespan = 0.0;

  int process_count() const { return static_cast<int>(lanes.size()); }
};

/// Runs the task graph on the process grid under the configured policy.
/// Deterministic: equal configs give identical traces.
SimTrace simulate(const SimConfig& config);

/// Latest finish time of every task in the gear-free (orig) schedule of
/// `config`, keeping each process's realized order of computation and sends.
std::vector<double> latest_finish_times(const SimConfig& config);

struct ProcessEnergy {
  int process = 0;
  double energy = 0.0;         // J
  double busy_fraction = 0.0;  // compute + communicate share of the makespan
};

struct EnergyReport {
  double total_energy = 0.0;
  double makespan = 0.0;
  std::vector<ProcessEnergy> per_process;
  double flop_count = 0.0;
  double mflops_per_watt = 0.0;
};

/// Sums node power times duration over all segments; transitions are billed
/// at the more expensive of the two gears.
EnergyReport replay_energy(const SimTrace& trace, const PowerParams& params, const GearTable& table);

/// process,t_start,t_end,ghz,volts,watts,activity,task
std::string trace_csv(const SimTrace& trace);
/// task,kind,row,col,process,start,finish
std::string schedule_csv(const SimTrace& trace);

}  // namespace dvfsim
