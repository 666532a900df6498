#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dvfsim/costmodel.hpp"
#include "dvfsim/dag.hpp"
#include "dvfsim/power.hpp"

namespace dvfsim {

enum class PolicyKind : std::uint8_t { Orig, ScLib, Fermata, CpuSpeed, Cp, CpTheo, Tx };

std::string_view to_string(PolicyKind kind);
/// Accepts orig, sc-lib, fermata, cpuspeed, cp, cp-theo, tx.
PolicyKind parse_policy(std::string_view name);
std::span<const PolicyKind> all_policies();

struct PolicyParams {
  double interval = 0.01;               // OS-level sampling interval, s
  double lambda = 0.5;                  // RELAX relaxation factor
  double utilization_threshold = 0.7;   // CPUSpeed step-down threshold

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct SplitGear {
  GearIndex high;
  GearIndex low;
  double duration_high = 0.0;
  double duration_low = 0.0;
};

/// A single gear, or a pair of neighbouring gears approximating a
/// frequency that the table does not offer.
struct PolicyDecision {
  std::variant<GearIndex, SplitGear> target;

  static PolicyDecision single(GearIndex g) { return {g}; }
  bool is_split() const { return std::holds_alternative<SplitGear>(target); }
  GearIndex gear() const { return std::get<GearIndex>(target); }
  const SplitGear& split() const { return std::get<SplitGear>(target); }
};

// --- workload predictors -------------------------------------------------

struct PredictorState {
  double last_observed = 0.0;
  double last_predicted = 0.0;
  double lambda = 1.0;
};

/// W'(i+1) = W(i).
double past_predict(PredictorState& state, double observed);

/// W'(i+1) = (1 - lambda) W'(i) + lambda W(i).
double relax_predict(PredictorState& state, double observed);

// --- decision functions --------------------------------------------------

/// Gear for `task` under slack reclamation. Tasks on the critical path, or
/// with an outgoing explicit dependency, run at f_high. Others are slowed to
/// fill `slack`: an available gear directly, a split pair between the two
/// neighbouring gears otherwise, clamped to f_low. No slack means f_high.
PolicyDecision cp_decide(const TaskGraph& graph, const CritPath& crit_path, const TaskRef& task, double slack,
                         const GearTable& table, const KernelCost& cost);

enum class Phase : std::uint8_t { Compute, Communicate, Idle };
enum class ScLevel : std::uint8_t { Library, OsPredicted };

/// Scheduled communication: f_high to compute, f_low to communicate. Idle
/// leaves the gear alone (nullopt), except that the library level treats
/// idling inside a known MPI span like communication.
std::optional<PolicyDecision> sc_decide(Phase phase, ScLevel level, const GearTable& table,
                                        bool in_mpi_span = false);

// --- TX race-to-halt -----------------------------------------------------

struct DoneFlag {
  TaskRef from;
  TaskRef to;
};

/// Per-process TX bookkeeping. A task leaves `pending_in` of its dependent
/// only through a delivered DoneFlag.
struct TxState {
  std::map<TaskRef, std::set<TaskRef>> pending_in;
  std::set<std::pair<TaskRef, TaskRef>> done_flags_sent;
  GearIndex current_gear = 0;

  /// Seeds pending_in with the full TDS_in of every task in `owned`.
  static TxState for_tasks(const TaskGraph& graph, std::span<const std::size_t> owned);
};

namespace tx {
struct DepDoneFlag {
  TaskRef from;
  TaskRef task;
};
struct TaskReady {
  TaskRef task;
};
struct TaskFinished {
  TaskRef task;
};
}  // namespace tx

using TxEvent = std::variant<tx::DepDoneFlag, tx::TaskReady, tx::TaskFinished>;

struct TxOutcome {
  PolicyDecision decision;
  bool may_start = false;
  std::vector<DoneFlag> done_flags;  // ascending by dependent task
};

/// Halt at f_low while dependencies are pending, race at f_high once they
/// are all in, and on completion notify every dependent and halt again.
/// Throws ProtocolError for a DoneFlag that is not pending.
TxOutcome tx_step(TxState& state, const TaskGraph& graph, const GearTable& table, const TxEvent& event);

// --- runtime controllers driven by the simulator -------------------------

enum class WaitReason : std::uint8_t { BeforeFirstTask, BetweenTasks, AfterLastTask };

struct ProcessView {
  int process = 0;
  GearIndex gear = 0;
  double now = 0.0;
  int inflight = 0;         // messages to this process currently on the wire
  double free_since = 0.0;  // when the process finished its previous task's sends
};

/// Seconds a process spent in each state during one sampling interval.
struct IntervalStats {
  double compute = 0.0;
  double communicate = 0.0;
  double comm_wait = 0.0;  // idle with a receive in flight
  double idle = 0.0;
  double transition = 0.0;

  double total() const { return compute + communicate + comm_wait + idle + transition; }
};

struct ControllerContext {
  const TaskGraph* graph = nullptr;
  const GearTable* table = nullptr;
  const KernelCost* cost = nullptr;
  PolicyParams params;
  double transition_latency = kDefaultTransitionLatency;
  std::vector<std::vector<std::size_t>> programs;  // task indices per process
  std::vector<double> deadlines;                   // cp-theo: latest compute end per task
};

class GearController {
 public:
  virtual ~GearController() = default;

  /// Sampling period for interval-based (OS-level) policies.
  virtual std::optional<double> tick_interval() const { return std::nullopt; }

  virtual PolicyDecision plan_compute(const ProcessView& view, std::size_t task) = 0;
  virtual GearIndex communicate_gear(const ProcessView& view) = 0;
  /// nullopt keeps the current gear.
  virtual std::optional<GearIndex> wait_gear(const ProcessView& view, WaitReason reason) = 0;
  /// New directive after a sampling interval, nullopt if unchanged.
  virtual std::optional<GearIndex> on_tick(const ProcessView&, const IntervalStats&) { return std::nullopt; }
  virtual void on_compute_end(const ProcessView&, std::size_t /*task*/, double /*elapsed*/) {}

  virtual bool uses_done_flags() const { return false; }
  virtual bool may_start(int /*process*/, std::size_t /*task*/) { return true; }
  virtual void deliver_done_flag(int /*process*/, std::size_t /*from*/, std::size_t /*to*/) {}
  /// DoneFlags to send once `task` has finished.
  virtual std::vector<DoneFlag> task_finished(int /*process*/, std::size_t /*task*/) { return {}; }
};

std::unique_ptr<GearController> make_controller(PolicyKind kind, ControllerContext context);

}  // namespace dvfsim
