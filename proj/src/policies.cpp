#include "dvfsim/policies.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "dvfsim/error.hpp"

namespace dvfsim {

namespace {

constexpr std::array<PolicyKind, 7> kAllPolicies{PolicyKind::Orig,     PolicyKind::ScLib, PolicyKind::Fermata,
                                                 PolicyKind::CpuSpeed, PolicyKind::Cp,    PolicyKind::CpTheo,
                                                 PolicyKind::Tx};

// Gear changes around one stretched task: into the low gear, between the
// split pieces, and back up afterwards.
constexpr double kTransitionsPerStretch = 3.0;

double high_duration(const ControllerContext& ctx, std::size_t task) {
  return task_duration(*ctx.cost, ctx.graph->task(task), ctx.table->f_high());
}

class OrigController final : public GearController {
 public:
  PolicyDecision plan_compute(const ProcessView&, std::size_t) override { return PolicyDecision::single(0); }
  GearIndex communicate_gear(const ProcessView&) override { return 0; }
  std::optional<GearIndex> wait_gear(const ProcessView&, WaitReason) override { return std::nullopt; }
};

// Library-level scheduled communication, shared by the policies that
// instrument MPI calls.
class ScLibController : public GearController {
 public:
  explicit ScLibController(ControllerContext ctx) : ctx_(std::move(ctx)) {}

  PolicyDecision plan_compute(const ProcessView&, std::size_t) override {
    return *sc_decide(Phase::Compute, ScLevel::Library, *ctx_.table);
  }
  GearIndex communicate_gear(const ProcessView&) override {
    return sc_decide(Phase::Communicate, ScLevel::Library, *ctx_.table)->gear();
  }
  std::optional<GearIndex> wait_gear(const ProcessView& view, WaitReason) override {
    auto d = sc_decide(Phase::Idle, ScLevel::Library, *ctx_.table, view.inflight > 0);
    if (!d) return std::nullopt;
    return d->gear();
  }

 protected:
  ControllerContext ctx_;
};

// OS-level controllers only see interval statistics and hold one gear
// directive per process between samples.
class IntervalController : public GearController {
 public:
  explicit IntervalController(ControllerContext ctx)
      : ctx_(std::move(ctx)), directive_(ctx_.programs.size(), 0) {}

  std::optional<double> tick_interval() const override { return ctx_.params.interval; }
  PolicyDecision plan_compute(const ProcessView& view, std::size_t) override {
    return PolicyDecision::single(directive_.at(view.process));
  }
  GearIndex communicate_gear(const ProcessView& view) override { return directive_.at(view.process); }
  std::optional<GearIndex> wait_gear(const ProcessView&, WaitReason) override { return std::nullopt; }

 protected:
  ControllerContext ctx_;
  std::vector<GearIndex> directive_;
};

class FermataController final : public IntervalController {
 public:
  explicit FermataController(ControllerContext ctx)
      : IntervalController(std::move(ctx)), predictors_(directive_.size()) {}

  std::optional<GearIndex> on_tick(const ProcessView& view, const IntervalStats& stats) override {
    const double total = stats.total();
    if (!(total > 0.0)) return std::nullopt;
    auto& p = predictors_.at(view.process);
    const double compute = past_predict(p[0], stats.compute / total);
    const double comm = past_predict(p[1], (stats.communicate + stats.comm_wait) / total);
    const double idle = past_predict(p[2], (stats.idle + stats.transition) / total);
    Phase phase = Phase::Compute;
    if (comm > compute && comm >= idle) phase = Phase::Communicate;
    else if (idle > compute && idle > comm) phase = Phase::Idle;
    auto d = sc_decide(phase, ScLevel::OsPredicted, *ctx_.table);
    if (!d) return std::nullopt;
    directive_.at(view.process) = d->gear();
    return d->gear();
  }

 private:
  std::vector<std::array<PredictorState, 3>> predictors_;
};

class CpuSpeedController final : public IntervalController {
 public:
  explicit CpuSpeedController(ControllerContext ctx) : IntervalController(std::move(ctx)) {
    predictors_.assign(directive_.size(), PredictorState{1.0, 1.0, ctx_.params.lambda});
  }

  std::optional<GearIndex> on_tick(const ProcessView& view, const IntervalStats& stats) override {
    const double total = stats.total();
    if (!(total > 0.0)) return std::nullopt;
    const double busy = (stats.compute + stats.communicate + stats.comm_wait + stats.transition) / total;
    const double util = relax_predict(predictors_.at(view.process), busy);
    GearIndex& g = directive_.at(view.process);
    const GearIndex next = util >= ctx_.params.utilization_threshold ? 0 : std::min(g + 1, ctx_.table->low_index());
    if (next == g) return std::nullopt;
    g = next;
    return g;
  }

 private:
  std::vector<PredictorState> predictors_;
};

// Critical-path slack reclamation on top of library scheduled communication.
// Slack per task kind is predicted from the previous task of that kind on the
// same process.
class CpPredictedController final : public ScLibController {
 public:
  explicit CpPredictedController(ControllerContext ctx)
      : ScLibController(std::move(ctx)), crit_(generate_crit_path(*ctx_.graph)), state_(ctx_.programs.size()) {}

  PolicyDecision plan_compute(const ProcessView& view, std::size_t task) override {
    auto& s = state_.at(view.process);
    if (s.prev) {
      // Only the time blocked before this task is observable, as it would
      // be to a runtime that intercepts MPI calls.
      const double gap = std::max(0.0, view.now - view.free_since);
      past_predict(s.by_kind[static_cast<std::size_t>(ctx_.graph->task(*s.prev).kind)], gap);
    }
    const auto kind = static_cast<std::size_t>(ctx_.graph->task(task).kind);
    const double slack = s.by_kind[kind].last_predicted - kTransitionsPerStretch * ctx_.transition_latency;
    return cp_decide(*ctx_.graph, crit_, ctx_.graph->task(task), slack, *ctx_.table, *ctx_.cost);
  }

  void on_compute_end(const ProcessView& view, std::size_t task, double) override {
    state_.at(view.process).prev = task;
  }

 private:
  struct PerProcess {
    std::optional<std::size_t> prev;
    std::array<PredictorState, 4> by_kind{};
  };
  CritPath crit_;
  std::vector<PerProcess> state_;
};

// Critical-path slack reclamation with exact per-task deadlines. Only
// computation is scaled; communication and waiting keep whatever gear the
// process is in, so the schedule of the gear-free run is preserved.
class CpTheoController final : public GearController {
 public:
  explicit CpTheoController(ControllerContext ctx) : ctx_(std::move(ctx)), crit_(generate_crit_path(*ctx_.graph)) {
    if (ctx_.deadlines.size() != ctx_.graph->size())
      throw ConfigError("cp-theo needs one deadline per task (" + std::to_string(ctx_.graph->size()) + "), got " +
                        std::to_string(ctx_.deadlines.size()));
  }

  PolicyDecision plan_compute(const ProcessView& view, std::size_t task) override {
    const double slack = ctx_.deadlines[task] - view.now - high_duration(ctx_, task) -
                         kTransitionsPerStretch * ctx_.transition_latency;
    return cp_decide(*ctx_.graph, crit_, ctx_.graph->task(task), slack, *ctx_.table, *ctx_.cost);
  }
  GearIndex communicate_gear(const ProcessView& view) override { return view.gear; }
  std::optional<GearIndex> wait_gear(const ProcessView&, WaitReason) override { return std::nullopt; }

 private:
  ControllerContext ctx_;
  CritPath crit_;
};

class TxController final : public GearController {
 public:
  explicit TxController(ControllerContext ctx) : ctx_(std::move(ctx)), owner_(ctx_.graph->size(), -1) {
    for (std::size_t p = 0; p < ctx_.programs.size(); ++p) {
      states_.push_back(TxState::for_tasks(*ctx_.graph, ctx_.programs[p]));
      for (auto t : ctx_.programs[p]) owner_.at(t) = static_cast<int>(p);
    }
  }

  PolicyDecision plan_compute(const ProcessView&, std::size_t) override { return PolicyDecision::single(0); }
  GearIndex communicate_gear(const ProcessView&) override { return ctx_.table->low_index(); }
  std::optional<GearIndex> wait_gear(const ProcessView&, WaitReason) override { return ctx_.table->low_index(); }

  bool uses_done_flags() const override { return true; }

  bool may_start(int process, std::size_t task) override {
    return tx_step(states_.at(process), *ctx_.graph, *ctx_.table, tx::TaskReady{ctx_.graph->task(task)}).may_start;
  }

  void deliver_done_flag(int process, std::size_t from, std::size_t to) override {
    if (owner_.at(to) != process)
      throw ProtocolError("DoneFlag for " + to_string(ctx_.graph->task(to)) + " delivered to process " +
                          std::to_string(process));
    tx_step(states_.at(process), *ctx_.graph, *ctx_.table,
            tx::DepDoneFlag{ctx_.graph->task(from), ctx_.graph->task(to)});
  }

  std::vector<DoneFlag> task_finished(int process, std::size_t task) override {
    return tx_step(states_.at(process), *ctx_.graph, *ctx_.table, tx::TaskFinished{ctx_.graph->task(task)})
        .done_flags;
  }

 private:
  ControllerContext ctx_;
  std::vector<TxState> states_;
  std::vector<int> owner_;
};

}  // namespace

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Orig: return "orig";
    case PolicyKind::ScLib: return "sc-lib";
    case PolicyKind::Fermata: return "fermata";
    case PolicyKind::CpuSpeed: return "cpuspeed";
    case PolicyKind::Cp: return "cp";
    case PolicyKind::CpTheo: return "cp-theo";
    case PolicyKind::Tx: return "tx";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  for (auto k : kAllPolicies)
    if (to_string(k) == name) return k;
  throw ConfigError("unknown policy '" + std::string(name) +
                    "' (expected orig, sc-lib, fermata, cpuspeed, cp, cp-theo or tx)");
}

std::span<const PolicyKind> all_policies() { return kAllPolicies; }

double past_predict(PredictorState& state, double observed) {
  state.last_observed = observed;
  state.last_predicted = observed;
  return observed;
}

double relax_predict(PredictorState& state, double observed) {
  if (state.lambda < 0.0 || state.lambda > 1.0) throw DomainError("RELAX lambda must lie in [0, 1]");
  state.last_observed = observed;
  state.last_predicted = (1.0 - state.lambda) * state.last_predicted + state.lambda * observed;
  return state.last_predicted;
}

PolicyDecision cp_decide(const TaskGraph& graph, const CritPath& crit_path, const TaskRef& task, double slack,
                         const GearTable& table, const KernelCost& cost) {
  const std::size_t idx = graph.index_of(task);
  if (crit_path.contains(task) || graph.has_explicit_out(idx) || !(slack > 0.0))
    return PolicyDecision::single(table.high_index());

  const auto cycles = static_cast<double>(task_cycles(cost, task));
  const double t_high = cycles / (table.f_high() * 1e9);
  if (!(t_high > 0.0)) return PolicyDecision::single(table.high_index());
  const double f_opt = ideal_frequency(table, t_high, slack);
  if (f_opt <= table.f_low()) return PolicyDecision::single(table.low_index());
  if (auto g = table.find(f_opt); g >= 0) return PolicyDecision::single(static_cast<GearIndex>(g));

  const SplitSchedule s = split_schedule(table, f_opt, cycles / 1e9);
  return {SplitGear{s.high, s.low, s.t_high, s.t_low}};
}

std::optional<PolicyDecision> sc_decide(Phase phase, ScLevel level, const GearTable& table, bool in_mpi_span) {
  switch (phase) {
    case Phase::Compute: return PolicyDecision::single(table.high_index());
    case Phase::Communicate: return PolicyDecision::single(table.low_index());
    case Phase::Idle:
      if (level == ScLevel::Library && in_mpi_span) return PolicyDecision::single(table.low_index());
      return std::nullopt;
  }
  return std::nullopt;
}

TxState TxState::for_tasks(const TaskGraph& graph, std::span<const std::size_t> owned) {
  TxState s;
  for (auto t : owned) {
    auto& pending = s.pending_in[graph.task(t)];
    for (auto d : graph.tds_in(t)) pending.insert(graph.task(d));
  }
  return s;
}

TxOutcome tx_step(TxState& state, const TaskGraph& graph, const GearTable& table, const TxEvent& event) {
  auto pending_of = [&](const TaskRef& task) -> std::set<TaskRef>& {
    auto it = state.pending_in.find(task);
    if (it == state.pending_in.end())
      throw ProtocolError("task " + to_string(task) + " is not tracked by this process");
    return it->second;
  };

  TxOutcome out{PolicyDecision::single(table.low_index()), false, {}};
  if (const auto* e = std::get_if<tx::DepDoneFlag>(&event)) {
    auto& pending = pending_of(e->task);
    if (pending.erase(e->from) == 0)
      throw ProtocolError("unexpected DoneFlag " + to_string(e->from) + " -> " + to_string(e->task));
    out.may_start = pending.empty();
    out.decision = PolicyDecision::single(state.current_gear);
    return out;
  }
  if (const auto* e = std::get_if<tx::TaskReady>(&event)) {
    out.may_start = pending_of(e->task).empty();
    state.current_gear = out.may_start ? table.high_index() : table.low_index();
    out.decision = PolicyDecision::single(state.current_gear);
    return out;
  }
  const auto& finished = std::get<tx::TaskFinished>(event).task;
  if (!pending_of(finished).empty())
    throw ProtocolError("task " + to_string(finished) + " finished with dependencies outstanding");
  for (auto d : graph.tds_out(graph.index_of(finished))) {
    const TaskRef& to = graph.task(d);
    if (!state.done_flags_sent.emplace(finished, to).second)
      throw ProtocolError("task " + to_string(finished) + " finished twice");
    out.done_flags.push_back({finished, to});
  }
  state.current_gear = table.low_index();
  out.decision = PolicyDecision::single(state.current_gear);
  return out;
}

std::unique_ptr<GearController> make_controller(PolicyKind kind, ControllerContext context) {
  if (!context.graph || !context.table || !context.cost) throw ConfigError("controller context is incomplete");
  switch (kind) {
    case PolicyKind::Orig: return std::make_unique<OrigController>();
    case PolicyKind::ScLib: return std::make_unique<ScLibController>(std::move(context));
    case PolicyKind::Fermata: return std::make_unique<FermataController>(std::move(context));
    case PolicyKind::CpuSpeed: return std::make_unique<CpuSpeedController>(std::move(context));
    case PolicyKind::Cp: return std::make_unique<CpPredictedController>(std::move(context));
    case PolicyKind::CpTheo: return std::make_unique<CpTheoController>(std::move(context));
    case PolicyKind::Tx: return std::make_unique<TxController>(std::move(context));
  }
  throw ConfigError("unknown policy");
}

}  // namespace dvfsim
