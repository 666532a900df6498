#include "dvfsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>
#include <sstream>

#include "dvfsim/error.hpp"

namespace dvfsim {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

enum class EventType : std::uint8_t { ActivityEnd, DoneFlagArrive, Tick };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventType type = EventType::ActivityEnd;
  int process = 0;
  std::uint64_t token = 0;
  std::size_t from = 0;
  std::size_t to = 0;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

// Free: between two activities inside one engine step, no segment open.
enum class State : std::uint8_t { Free, Idle, Computing, Sending, Transitioning };

struct Piece {
  GearIndex gear = 0;
  std::int64_t cycles = 0;
};

struct PendingSend {
  int dest = 0;
  std::vector<DoneFlag> flags;
};

struct Proc {
  std::vector<std::size_t> program;
  std::size_t pc = 0;
  State state = State::Free;
  GearIndex gear = 0;
  std::uint64_t token = 0;

  // open segment
  double seg_start = 0.0;
  Activity seg_activity = Activity::Idle;
  GearIndex seg_from = 0;
  std::optional<std::size_t> seg_task;
  int seg_peer = -1;

  bool in_task = false;
  std::size_t task = 0;
  std::deque<Piece> pieces;
  double piece_start = 0.0;
  double plan_time = 0.0;
  bool started = false;

  std::size_t sending_task = 0;
  std::deque<PendingSend> sends;
  double free_since = 0.0;
  int inflight = 0;

  IntervalStats stats;
  double last_account = 0.0;
};

class Engine {
 public:
  Engine(const SimConfig& cfg, TaskGraph graph, std::vector<double> deadlines)
      : cfg_(cfg),
        trace_{cfg.policy, std::move(graph), cfg.table, cfg.power, cfg.kernel_cost(), {}, {}, {}, {}, 0.0} {
    const TaskGraph& g = trace_.graph;
    const int procs = cfg.grid.process_count();
    owner_.resize(g.size());
    for (std::size_t t = 0; t < g.size(); ++t) owner_[t] = owner_process(cfg.grid, g.task(t));
    auto programs = program_order(g, cfg.grid);
    procs_.resize(static_cast<std::size_t>(procs));
    for (int p = 0; p < procs; ++p) procs_[p].program = programs[p];
    remaining_.resize(g.size());
    for (std::size_t t = 0; t < g.size(); ++t) remaining_[t] = g.tds_in(t).size();
    trace_.lanes.resize(static_cast<std::size_t>(procs));
    trace_.schedule.resize(g.size());

    ControllerContext ctx;
    ctx.graph = &trace_.graph;
    ctx.table = &trace_.table;
    ctx.cost = &trace_.cost;
    ctx.params = cfg.policy_params;
    ctx.transition_latency = cfg.transition_latency;
    ctx.programs = std::move(programs);
    ctx.deadlines = std::move(deadlines);
    controller_ = make_controller(cfg.policy, std::move(ctx));
    block_bytes_ = CommModel::block_bytes(cfg.grid.block_size);
  }

  SimTrace run() {
    for (int p = 0; p < static_cast<int>(procs_.size()); ++p) advance(p);
    if (auto dt = controller_->tick_interval()) {
      tick_ = *dt;
      if (!(tick_ > 0.0)) throw ConfigError("policy.interval must be positive");
      push({tick_, 0, EventType::Tick});
    }
    while (!finished() && !queue_.empty()) {
      Event e = queue_.top();
      queue_.pop();
      now_ = e.time;
      switch (e.type) {
        case EventType::ActivityEnd:
          if (e.token == procs_[e.process].token) activity_end(e.process);
          break;
        case EventType::DoneFlagArrive: deliver_flag(e.from, e.to); break;
        case EventType::Tick: tick(); break;
      }
    }
    if (!finished())
      throw ProtocolError("simulation stalled with " + std::to_string(trace_.graph.size() - tasks_done_) +
                          " tasks outstanding");
    trace_.makespan = now_;
    for (int p = 0; p < static_cast<int>(procs_.size()); ++p) close_segment(p);
    return std::move(trace_);
  }

 private:
  bool finished() const {
    if (tasks_done_ != trace_.graph.size()) return false;
    return std::all_of(procs_.begin(), procs_.end(),
                       [](const Proc& p) { return p.sends.empty() && p.state != State::Sending; });
  }

  void push(Event e) {
    e.seq = seq_++;
    queue_.push(e);
  }

  double ghz(GearIndex g) const { return cfg_.table[g].ghz; }

  ProcessView view(int p) const {
    const Proc& pr = procs_[p];
    return {p, pr.gear, now_, pr.inflight, pr.free_since};
  }

  void account(int p) {
    Proc& pr = procs_[p];
    const double dt = now_ - pr.last_account;
    pr.last_account = now_;
    if (dt <= 0.0) return;
    switch (pr.state) {
      case State::Computing: pr.stats.compute += dt; break;
      case State::Sending: pr.stats.communicate += dt; break;
      case State::Transitioning: pr.stats.transition += dt; break;
      case State::Idle: (pr.inflight > 0 ? pr.stats.comm_wait : pr.stats.idle) += dt; break;
      case State::Free: break;
    }
  }

  void close_segment(int p, std::int64_t cycles = 0) {
    Proc& pr = procs_[p];
    if (pr.state == State::Free) return;
    if (now_ > pr.seg_start || cycles > 0)
      trace_.lanes[p].push_back(
          {pr.seg_start, now_, pr.gear, pr.seg_from, pr.seg_activity, pr.seg_task, cycles, pr.seg_peer});
    pr.seg_start = now_;
  }

  void open(int p, State state, Activity activity, std::optional<std::size_t> task = std::nullopt, int peer = -1) {
    Proc& pr = procs_[p];
    account(p);
    pr.state = state;
    pr.seg_start = now_;
    pr.seg_activity = activity;
    pr.seg_from = pr.gear;
    pr.seg_task = task;
    pr.seg_peer = peer;
  }

  // Ends the current activity's segment and leaves the process Free.
  void release(int p, std::int64_t cycles = 0) {
    account(p);
    close_segment(p, cycles);
    procs_[p].state = State::Free;
  }

  void leave_idle(int p) {
    if (procs_[p].state == State::Idle) release(p);
  }

  void begin_transition(int p, GearIndex target) {
    Proc& pr = procs_[p];
    leave_idle(p);
    if (cfg_.transition_latency <= 0.0) {
      account(p);
      pr.gear = target;
      return;
    }
    open(p, State::Transitioning, Activity::Transition);
    pr.seg_from = pr.gear;
    pr.gear = target;
    push({now_ + cfg_.transition_latency, 0, EventType::ActivityEnd, p, ++pr.token});
  }

  // Moves the process forward from a quiescent point: between pieces of a
  // task, between sends, or while looking for its next task.
  void advance(int p) {
    for (;;) {
      Proc& pr = procs_[p];
      if (pr.in_task) {
        if (pr.pieces.empty()) {
          finish_task(p);
          continue;
        }
        const Piece piece = pr.pieces.front();
        if (piece.gear != pr.gear) {
          begin_transition(p, piece.gear);
          if (pr.state == State::Transitioning) return;
          continue;
        }
        leave_idle(p);
        if (!pr.started) {
          pr.started = true;
          trace_.schedule[pr.task].start = now_;
        }
        open(p, State::Computing, Activity::Compute, pr.task);
        pr.piece_start = now_;
        push({now_ + static_cast<double>(piece.cycles) / (ghz(pr.gear) * 1e9), 0, EventType::ActivityEnd, p,
              ++pr.token});
        return;
      }
      if (!pr.sends.empty()) {
        const GearIndex g = controller_->communicate_gear(view(p));
        if (g != pr.gear) {
          begin_transition(p, g);
          if (pr.state == State::Transitioning) return;
          continue;
        }
        leave_idle(p);
        const int dest = pr.sends.front().dest;
        open(p, State::Sending, Activity::Communicate, pr.sending_task, dest);
        account(dest);
        ++procs_[dest].inflight;
        const double d = message_duration(cfg_.comm, block_bytes_, ghz(pr.gear), cfg_.table);
        trace_.messages.push_back({pr.sending_task, p, dest, now_, now_ + d});
        push({now_ + d, 0, EventType::ActivityEnd, p, ++pr.token});
        wake(dest);
        return;
      }
      if (pr.pc < pr.program.size()) {
        const std::size_t t = pr.program[pr.pc];
        if (remaining_[t] == 0 && controller_->may_start(p, t)) {
          const PolicyDecision d = controller_->plan_compute(view(p), t);
          pr.in_task = true;
          pr.task = t;
          pr.started = false;
          pr.plan_time = now_;
          pr.pieces = make_pieces(d, task_cycles(trace_.cost, trace_.graph.task(t)));
          continue;
        }
        if (wait(p, pr.pc == 0 ? WaitReason::BeforeFirstTask : WaitReason::BetweenTasks)) continue;
        return;
      }
      if (wait(p, WaitReason::AfterLastTask)) continue;
      return;
    }
  }

  // Returns true when the caller should re-run advance (gear changed
  // instantly); otherwise the process is idle or transitioning.
  bool wait(int p, WaitReason reason) {
    Proc& pr = procs_[p];
    if (auto g = controller_->wait_gear(view(p), reason); g && *g != pr.gear) {
      begin_transition(p, *g);
      return pr.state != State::Transitioning;
    }
    if (pr.state != State::Idle) open(p, State::Idle, Activity::Idle);
    return false;
  }

  std::deque<Piece> make_pieces(const PolicyDecision& d, std::int64_t cycles) const {
    if (!d.is_split()) return {{d.gear(), cycles}};
    const SplitGear& s = d.split();
    const auto low = std::clamp<std::int64_t>(std::llround(s.duration_low * ghz(s.low) * 1e9), 0, cycles);
    std::deque<Piece> out;
    if (low > 0) out.push_back({s.low, low});
    if (cycles - low > 0) out.push_back({s.high, cycles - low});
    return out;
  }

  void wake(int p) {
    if (procs_[p].state == State::Idle) advance(p);
  }

  void activity_end(int p) {
    Proc& pr = procs_[p];
    switch (pr.state) {
      case State::Computing: {
        const Piece piece = pr.pieces.front();
        pr.pieces.pop_front();
        release(p, piece.cycles);
        advance(p);
        break;
      }
      case State::Sending: {
        PendingSend send = std::move(pr.sends.front());
        pr.sends.pop_front();
        release(p);
        arrive(send.dest, pr.sending_task);
        const double delay = doneflag_duration(cfg_.comm, ghz(pr.gear), cfg_.table);
        for (const DoneFlag& f : send.flags) {
          const std::size_t from = trace_.graph.index_of(f.from);
          const std::size_t to = trace_.graph.index_of(f.to);
          trace_.done_flags.push_back({from, to, now_, now_ + delay});
          if (delay <= 0.0) deliver_flag(from, to);
          else push({now_ + delay, 0, EventType::DoneFlagArrive, 0, 0, from, to});
        }
        if (pr.sends.empty()) pr.free_since = now_;
        if (!finished()) advance(p);
        break;
      }
      case State::Transitioning:
        release(p);
        advance(p);
        break;
      case State::Free:
      case State::Idle: break;
    }
  }

  void arrive(int dest, std::size_t task) {
    Proc& q = procs_[dest];
    account(dest);
    --q.inflight;
    for (auto t : trace_.graph.tds_out(task))
      if (owner_[t] == dest) --remaining_[t];
    wake(dest);
  }

  void finish_task(int p) {
    Proc& pr = procs_[p];
    const std::size_t t = pr.task;
    pr.in_task = false;
    ++pr.pc;
    ++tasks_done_;
    trace_.schedule[t].finish = now_;
    trace_.schedule[t].process = p;
    controller_->on_compute_end(view(p), t, now_ - pr.plan_time);

    std::vector<int> remote;
    for (auto d : trace_.graph.tds_out(t)) {
      if (owner_[d] == p) --remaining_[d];
      else remote.push_back(owner_[d]);
    }
    std::sort(remote.begin(), remote.end());
    remote.erase(std::unique(remote.begin(), remote.end()), remote.end());
    for (int q : remote) pr.sends.push_back({q, {}});
    pr.sending_task = t;

    if (controller_->uses_done_flags()) {
      for (const DoneFlag& f : controller_->task_finished(p, t)) {
        const std::size_t to = trace_.graph.index_of(f.to);
        if (owner_[to] == p) {
          trace_.done_flags.push_back({t, to, now_, now_});
          controller_->deliver_done_flag(p, t, to);
        } else {
          auto it = std::find_if(pr.sends.begin(), pr.sends.end(),
                                 [&](const PendingSend& s) { return s.dest == owner_[to]; });
          it->flags.push_back(f);
        }
      }
    }
    if (pr.sends.empty()) pr.free_since = now_;
  }

  void deliver_flag(std::size_t from, std::size_t to) {
    const int p = owner_[to];
    for (auto it = trace_.done_flags.rbegin(); it != trace_.done_flags.rend(); ++it)
      if (it->from == from && it->to == to) {
        it->delivered = now_;
        break;
      }
    controller_->deliver_done_flag(p, from, to);
    wake(p);
  }

  void tick() {
    for (int p = 0; p < static_cast<int>(procs_.size()); ++p) {
      Proc& pr = procs_[p];
      account(p);
      const IntervalStats stats = pr.stats;
      pr.stats = {};
      auto g = controller_->on_tick(view(p), stats);
      if (!g || *g == pr.gear) continue;
      if (pr.state == State::Computing) {
        Piece& piece = pr.pieces.front();
        const auto done = std::clamp<std::int64_t>(
            std::llround((now_ - pr.piece_start) * ghz(pr.gear) * 1e9), 0, piece.cycles);
        if (done == piece.cycles) continue;  // its end event is due now
        piece.cycles -= done;
        release(p, done);
        for (auto& rest : pr.pieces) rest.gear = *g;
        ++pr.token;
        begin_transition(p, *g);
        if (pr.state != State::Transitioning) advance(p);
      } else if (pr.state == State::Idle) {
        begin_transition(p, *g);
        if (pr.state != State::Transitioning) advance(p);
      }
    }
    if (!finished()) push({now_ + tick_, 0, EventType::Tick});
  }

  const SimConfig& cfg_;
  SimTrace trace_;
  std::vector<int> owner_;
  std::vector<Proc> procs_;
  std::vector<std::size_t> remaining_;
  std::unique_ptr<GearController> controller_;
  std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  double tick_ = 0.0;
  double block_bytes_ = 0.0;
  std::size_t tasks_done_ = 0;
};

}  // namespace

TaskGraph SimConfig::build_graph() const { return graph ? *graph : generate_graph(kind, n_blocks); }

KernelCost SimConfig::kernel_cost() const {
  return cost ? *cost : KernelCost::dense(graph ? graph->kind() : kind, grid.block_size);
}

void SimConfig::validate() const {
  if (!graph && n_blocks < 1) throw ConfigError("graph.n_blocks must be >= 1");
  if (grid.p_rows < 1) throw ConfigError("grid.p_rows must be >= 1");
  if (grid.p_cols < 1) throw ConfigError("grid.p_cols must be >= 1");
  if (grid.block_size < 1) throw ConfigError("grid.block_size must be >= 1");
  if (power.ac < 0.0 || power.i_sub < 0.0 || power.p_const < 0.0)
    throw ConfigError("power: ac, i_sub and p_const must be non-negative");
  for (auto c : kernel_cost().cycles)
    if (c <= 0) throw ConfigError("cost.cycles must all be positive");
  if (!(comm.latency_startup >= 0.0)) throw ConfigError("comm.latency_startup must be non-negative");
  if (!(comm.bytes_per_second > 0.0)) throw ConfigError("comm.bytes_per_second must be positive");
  if (!(comm.cpu_bound_fraction >= 0.0 && comm.cpu_bound_fraction <= 1.0))
    throw ConfigError("comm.cpu_bound_fraction must lie in [0, 1]");
  if (!(transition_latency >= 0.0)) throw ConfigError("transition_latency must be non-negative");
  if (!(policy_params.interval > 0.0)) throw ConfigError("policy.interval must be positive");
  if (!(policy_params.lambda >= 0.0 && policy_params.lambda <= 1.0))
    throw ConfigError("policy.lambda must lie in [0, 1]");
  if (!(policy_params.utilization_threshold >= 0.0 && policy_params.utilization_threshold <= 1.0))
    throw ConfigError("policy.utilization_threshold must lie in [0, 1]");
}

std::string_view to_string(Activity activity) {
  switch (activity) {
    case Activity::Compute: return "compute";
    case Activity::Communicate: return "communicate";
    case Activity::Idle: return "idle";
    case Activity::Transition: return "transition";
  }
  return "?";
}

std::vector<double> latest_finish_times(const SimConfig& config) {
  SimConfig pilot = config;
  pilot.policy = PolicyKind::Orig;
  const SimTrace trace = simulate(pilot);
  const TaskGraph& g = trace.graph;

  // One node per busy segment; lanes chain in order, each message links
  // its send to the receiving process's consumers of that block.
  std::vector<double> durations;
  std::vector<WeightedEdge> edges;
  std::vector<std::size_t> compute_node(g.size());
  struct Send {
    std::size_t node, task;
    int dest;
  };
  std::vector<Send> sends;
  for (int p = 0; p < trace.process_count(); ++p) {
    std::optional<std::size_t> prev;
    for (const Segment& s : trace.lanes[p]) {
      if (s.activity == Activity::Idle) continue;
      const std::size_t node = durations.size();
      durations.push_back(s.duration());
      if (prev) edges.push_back({*prev, node, 0.0});
      prev = node;
      if (s.activity == Activity::Compute) compute_node[*s.task] = node;
      if (s.activity == Activity::Communicate) sends.push_back({node, *s.task, s.peer});
    }
  }
  for (const Send& s : sends)
    for (auto t : g.tds_out(s.task))
      if (trace.schedule[t].process == s.dest) edges.push_back({s.node, compute_node[t], 0.0});

  const CpmSchedule cpm = critical_path_method(durations, edges);
  std::vector<double> out(g.size());
  for (std::size_t t = 0; t < g.size(); ++t) out[t] = cpm.latest_finish[compute_node[t]];
  return out;
}

SimTrace simulate(const SimConfig& config) {
  config.validate();
  TaskGraph graph = config.build_graph();
  if (graph.empty()) throw DomainError("task graph is empty");
  std::vector<double> deadlines;
  if (config.policy == PolicyKind::CpTheo) deadlines = latest_finish_times(config);
  return Engine(config, std::move(graph), std::move(deadlines)).run();
}

EnergyReport replay_energy(const SimTrace& trace, const PowerParams& params, const GearTable& table) {
  EnergyReport r;
  r.makespan = trace.makespan;
  for (int p = 0; p < trace.process_count(); ++p) {
    double energy = 0.0;
    double busy = 0.0;
    for (const Segment& s : trace.lanes[p]) {
      double watts = node_power(params, table[s.gear]);
      if (s.activity == Activity::Transition) watts = std::max(watts, node_power(params, table[s.from_gear]));
      energy += watts * s.duration();
      if (s.activity == Activity::Compute || s.activity == Activity::Communicate) busy += s.duration();
    }
    r.per_process.push_back({p, energy, trace.makespan > 0.0 ? busy / trace.makespan : 0.0});
    r.total_energy += energy;
  }
  return r;
}

std::string trace_csv(const SimTrace& trace) {
  std::ostringstream out;
  out << "process,t_start,t_end,ghz,volts,watts,activity,task\n";
  for (int p = 0; p < trace.process_count(); ++p)
    for (const Segment& s : trace.lanes[p]) {
      GearIndex billed = s.gear;
      if (s.activity == Activity::Transition &&
          node_power(trace.power, trace.table[s.from_gear]) > node_power(trace.power, trace.table[s.gear]))
        billed = s.from_gear;
      const Gear& g = trace.table[billed];
      out << p << ',' << fmt_double(s.t_start) << ',' << fmt_double(s.t_end) << ',' << fmt_double(g.ghz) << ','
          << fmt_double(g.volts) << ',' << fmt_double(node_power(trace.power, g)) << ',' << to_string(s.activity)
          << ',' << (s.task ? to_string(trace.graph.task(*s.task)) : "") << '\n';
    }
  return out.str();
}

std::string schedule_csv(const SimTrace& trace) {
  std::ostringstream out;
  out << "task,kind,row,col,process,start,finish\n";
  for (std::size_t t = 0; t < trace.graph.size(); ++t) {
    const TaskRef& ref = trace.graph.task(t);
    const ScheduleEntry& e = trace.schedule[t];
    out << to_string(ref) << ',' << to_string(ref.kind) << ',' << ref.row << ',' << ref.col << ',' << e.process
        << ',' << fmt_double(e.start) << ',' << fmt_double(e.finish) << '\n';
  }
  return out.str();
}

}  // namespace dvfsim
