#include "dvfsim/dag.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>
#include <tuple>

#include "dvfsim/error.hpp"

namespace dvfsim {

namespace {

int kind_rank(TaskKind kind) {
  switch (kind) {
    case TaskKind::Factorize: return 0;
    case TaskKind::Solve: return 1;
    case TaskKind::Update1:
    case TaskKind::Update2: return 2;
  }
  return 3;
}

std::string_view short_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Factorize: return "F";
    case TaskKind::Solve: return "S";
    case TaskKind::Update1: return "U1";
    case TaskKind::Update2: return "U2";
  }
  return "?";
}

void check_shape(Factorization fact, int n, const TaskRef& t) {
  auto fail = [&](const char* why) {
    throw DomainError("task " + to_string(t) + " invalid for " + std::string(to_string(fact)) + " N=" +
                      std::to_string(n) + ": " + why);
  };
  if (t.row < 1 || t.col < 1 || t.row > n || t.col > n) fail("block index out of range");
  if (t.step < 1 || t.step > std::min(t.row, t.col)) fail("step out of range");
  switch (t.kind) {
    case TaskKind::Factorize:
      if (t.row != t.col || t.step != t.row) fail("factorize must sit on the diagonal at its own step");
      break;
    case TaskKind::Update2:
      if (t.row != t.col) fail("update2 must sit on the diagonal");
      if (t.step >= t.row) fail("update2 must precede the diagonal factorization");
      break;
    case TaskKind::Solve:
      if (fact == Factorization::LU ? t.row == t.col : t.row <= t.col) fail("solve block on wrong side");
      if (t.step != std::min(t.row, t.col)) fail("solve step must equal its panel index");
      break;
    case TaskKind::Update1:
      if (t.row == t.col) fail("update1 must be off-diagonal");
      if (fact == Factorization::Cholesky && t.row < t.col) fail("cholesky works on the lower triangle");
      break;
  }
}

class GraphBuilder {
 public:
  explicit GraphBuilder(Factorization kind) : kind_(kind) {}

  TaskRef add(TaskKind kind, int row, int col, int step) {
    TaskRef t{kind, row, col, step};
    tasks_.insert(t);
    return t;
  }

  void depend(const TaskRef& from, const TaskRef& to) {
    edges_.push_back({from, to, from.same_block(to) ? DepKind::Implicit : DepKind::Explicit});
  }

  TaskGraph build(int n) && {
    return TaskGraph(kind_, n, std::vector<TaskRef>(tasks_.begin(), tasks_.end()), std::move(edges_));
  }

 private:
  Factorization kind_;
  std::set<TaskRef> tasks_;
  std::vector<DepEdge> edges_;
};

TaskKind update_kind(int row, int col) { return row == col ? TaskKind::Update2 : TaskKind::Update1; }

// Right-looking lower-triangular Cholesky; dependency cases follow the TDS
// generation rules, plus implicit chaining of successive updates on a block.
TaskGraph cholesky_graph(int n) {
  GraphBuilder b(Factorization::Cholesky);
  for (int k = 1; k <= n; ++k) {
    const TaskRef f = b.add(TaskKind::Factorize, k, k, k);
    if (k > 1) b.depend(TaskRef{TaskKind::Update2, k, k, k - 1}, f);
    for (int j = k + 1; j <= n; ++j) {
      const TaskRef s = b.add(TaskKind::Solve, j, k, k);
      b.depend(f, s);
      if (k > 1) b.depend(TaskRef{TaskKind::Update1, j, k, k - 1}, s);
    }
    for (int i = k + 1; i <= n; ++i) {
      for (int j = k + 1; j <= i; ++j) {
        const TaskRef u = b.add(update_kind(i, j), i, j, k);
        b.depend(TaskRef{TaskKind::Solve, i, k, k}, u);
        if (i != j) b.depend(TaskRef{TaskKind::Solve, j, k, k}, u);
        if (k > 1) b.depend(TaskRef{u.kind, i, j, k - 1}, u);
      }
    }
  }
  return std::move(b).build(n);
}

// Right-looking LU without pivoting: column and row panels are both Solve.
TaskGraph lu_graph(int n) {
  GraphBuilder b(Factorization::LU);
  for (int k = 1; k <= n; ++k) {
    const TaskRef f = b.add(TaskKind::Factorize, k, k, k);
    if (k > 1) b.depend(TaskRef{TaskKind::Update2, k, k, k - 1}, f);
    for (int i = k + 1; i <= n; ++i) {
      const TaskRef col_panel = b.add(TaskKind::Solve, i, k, k);
      b.depend(f, col_panel);
      if (k > 1) b.depend(TaskRef{TaskKind::Update1, i, k, k - 1}, col_panel);
      const TaskRef row_panel = b.add(TaskKind::Solve, k, i, k);
      b.depend(f, row_panel);
      if (k > 1) b.depend(TaskRef{TaskKind::Update1, k, i, k - 1}, row_panel);
    }
    for (int i = k + 1; i <= n; ++i) {
      for (int j = k + 1; j <= n; ++j) {
        const TaskRef u = b.add(update_kind(i, j), i, j, k);
        b.depend(TaskRef{TaskKind::Solve, i, k, k}, u);
        b.depend(TaskRef{TaskKind::Solve, k, j, k}, u);
        if (k > 1) b.depend(TaskRef{u.kind, i, j, k - 1}, u);
      }
    }
  }
  return std::move(b).build(n);
}

// Tiled QR: panel Solves chained down the column, the factorized diagonal
// updates row k, and each trailing update chains on the block above it.
TaskGraph qr_graph(int n) {
  GraphBuilder b(Factorization::QR);
  for (int k = 1; k <= n; ++k) {
    const TaskRef f = b.add(TaskKind::Factorize, k, k, k);
    if (k > 1) b.depend(TaskRef{TaskKind::Update2, k, k, k - 1}, f);
    TaskRef above = f;
    for (int i = k + 1; i <= n; ++i) {
      const TaskRef s = b.add(TaskKind::Solve, i, k, k);
      b.depend(above, s);
      if (k > 1) b.depend(TaskRef{TaskKind::Update1, i, k, k - 1}, s);
      above = s;
    }
    for (int j = k + 1; j <= n; ++j) {
      const TaskRef u = b.add(TaskKind::Update1, k, j, k);
      b.depend(f, u);
      if (k > 1) b.depend(TaskRef{TaskKind::Update1, k, j, k - 1}, u);
    }
    for (int i = k + 1; i <= n; ++i) {
      for (int j = k + 1; j <= n; ++j) {
        const TaskRef u = b.add(update_kind(i, j), i, j, k);
        b.depend(TaskRef{TaskKind::Solve, i, k, k}, u);
        b.depend(TaskRef{update_kind(i - 1, j), i - 1, j, k}, u);
        if (k > 1) b.depend(TaskRef{u.kind, i, j, k - 1}, u);
      }
    }
  }
  return std::move(b).build(n);
}

}  // namespace

std::string_view to_string(Factorization kind) {
  switch (kind) {
    case Factorization::Cholesky: return "cholesky";
    case Factorization::LU: return "lu";
    case Factorization::QR: return "qr";
  }
  return "?";
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Factorize: return "factorize";
    case TaskKind::Solve: return "solve";
    case TaskKind::Update1: return "update1";
    case TaskKind::Update2: return "update2";
  }
  return "?";
}

std::string_view to_string(DepKind kind) { return kind == DepKind::Explicit ? "explicit" : "implicit"; }

Factorization parse_factorization(std::string_view name) {
  if (name == "cholesky") return Factorization::Cholesky;
  if (name == "lu") return Factorization::LU;
  if (name == "qr") return Factorization::QR;
  throw DomainError("unknown factorization '" + std::string(name) + "' (expected cholesky, lu or qr)");
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "factorize") return TaskKind::Factorize;
  if (name == "solve") return TaskKind::Solve;
  if (name == "update1") return TaskKind::Update1;
  if (name == "update2") return TaskKind::Update2;
  throw DomainError("unknown task kind '" + std::string(name) + "'");
}

DepKind parse_dep_kind(std::string_view name) {
  if (name == "explicit") return DepKind::Explicit;
  if (name == "implicit") return DepKind::Implicit;
  throw DomainError("unknown dependency kind '" + std::string(name) + "'");
}

std::strong_ordering operator<=>(const TaskRef& a, const TaskRef& b) {
  return std::tuple(a.step, kind_rank(a.kind), a.row, a.col, static_cast<int>(a.kind)) <=>
         std::tuple(b.step, kind_rank(b.kind), b.row, b.col, static_cast<int>(b.kind));
}

std::string to_string(const TaskRef& task) {
  std::string s(short_name(task.kind));
  s += '(' + std::to_string(task.row) + ',' + std::to_string(task.col) + ")@" + std::to_string(task.step);
  return s;
}

TaskGraph::TaskGraph(Factorization kind, int n_blocks, std::vector<TaskRef> tasks, std::vector<DepEdge> edges)
    : kind_(kind), n_blocks_(n_blocks), tasks_(std::move(tasks)) {
  if (n_blocks_ < 1) throw DomainError("n_blocks must be >= 1");
  std::sort(tasks_.begin(), tasks_.end());
  if (std::adjacent_find(tasks_.begin(), tasks_.end()) != tasks_.end())
    throw DomainError("duplicate task in graph");
  for (const auto& t : tasks_) check_shape(kind_, n_blocks_, t);

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  tds_in_.resize(tasks_.size());
  tds_out_.resize(tasks_.size());
  explicit_out_.assign(tasks_.size(), false);
  for (auto& e : edges_) {
    const auto from = find(e.from);
    const auto to = find(e.to);
    if (!from || !to) throw DomainError("edge " + to_string(e.from) + " -> " + to_string(e.to) + " names unknown task");
    if (*from == *to) throw DomainError("self edge on " + to_string(e.from));
    const DepKind expected = e.from.same_block(e.to) ? DepKind::Implicit : DepKind::Explicit;
    if (e.kind != expected)
      throw DomainError("edge " + to_string(e.from) + " -> " + to_string(e.to) + " has wrong dependency kind");
    tds_out_[*from].push_back(*to);
    tds_in_[*to].push_back(*from);
    if (e.kind == DepKind::Explicit) explicit_out_[*from] = true;
  }
  for (auto& v : tds_in_) std::sort(v.begin(), v.end());
  for (auto& v : tds_out_) std::sort(v.begin(), v.end());
  topological_order();
}

bool TaskGraph::edge_kinds_equal(const TaskGraph& other) const {
  return std::equal(edges_.begin(), edges_.end(), other.edges_.begin(), other.edges_.end(),
                    [](const DepEdge& a, const DepEdge& b) { return a == b && a.kind == b.kind; });
}

std::optional<std::size_t> TaskGraph::find(const TaskRef& task) const {
  auto it = std::lower_bound(tasks_.begin(), tasks_.end(), task);
  if (it == tasks_.end() || *it != task) return std::nullopt;
  return static_cast<std::size_t>(it - tasks_.begin());
}

std::size_t TaskGraph::index_of(const TaskRef& task) const {
  if (auto i = find(task)) return *i;
  throw DomainError("task " + to_string(task) + " not in graph");
}

std::vector<TaskRef> TaskGraph::tds_in(const TaskRef& task) const {
  std::vector<TaskRef> out;
  for (auto i : tds_in(index_of(task))) out.push_back(tasks_[i]);
  return out;
}

std::vector<TaskRef> TaskGraph::tds_out(const TaskRef& task) const {
  std::vector<TaskRef> out;
  for (auto i : tds_out(index_of(task))) out.push_back(tasks_[i]);
  return out;
}

std::vector<std::size_t> TaskGraph::topological_order() const {
  std::vector<std::size_t> indegree(tasks_.size());
  for (std::size_t i = 0; i < tasks_.size(); ++i) indegree[i] = tds_in_[i].size();
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < tasks_.size(); ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::vector<std::size_t> order;
  order.reserve(tasks_.size());
  while (!ready.empty()) {
    const auto i = ready.front();
    ready.pop_front();
    order.push_back(i);
    for (auto j : tds_out_[i])
      if (--indegree[j] == 0) ready.push_back(j);
  }
  if (order.size() != tasks_.size()) throw DomainError("task graph has a cycle");
  return order;
}

bool is_last_instance(Factorization kind, const TaskRef& task) {
  if (task.kind != TaskKind::Update1 && task.kind != TaskKind::Update2) return false;
  // Block (i, j) is last touched by an update at step min(i, j) - 1, except
  // QR's upper-triangle blocks whose final update is the row-k update.
  const int last = (kind == Factorization::QR && task.row < task.col) ? task.row : std::min(task.row, task.col) - 1;
  return task.step == last;
}

TaskGraph generate_graph(Factorization kind, int n_blocks) {
  if (n_blocks < 1) throw DomainError("n_blocks must be >= 1, got " + std::to_string(n_blocks));
  switch (kind) {
    case Factorization::Cholesky: return cholesky_graph(n_blocks);
    case Factorization::LU: return lu_graph(n_blocks);
    case Factorization::QR: return qr_graph(n_blocks);
  }
  throw DomainError("unknown factorization");
}

ProcessCoord map_owner(const ProcessGrid& grid, int i, int j) {
  if (grid.p_rows < 1 || grid.p_cols < 1) throw DomainError("process grid dimensions must be >= 1");
  if (i < 1 || j < 1)
    throw DomainError("block index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
  return {(i - 1) % grid.p_rows, (j - 1) % grid.p_cols};
}

int owner_process(const ProcessGrid& grid, const TaskRef& task) {
  return grid.linear(map_owner(grid, task.row, task.col));
}

std::vector<std::vector<std::size_t>> program_order(const TaskGraph& graph, const ProcessGrid& grid) {
  std::vector<std::vector<std::size_t>> lanes(static_cast<std::size_t>(grid.process_count()));
  for (std::size_t i = 0; i < graph.size(); ++i)
    lanes[static_cast<std::size_t>(owner_process(grid, graph.task(i)))].push_back(i);
  return lanes;
}

bool CritPath::contains(const TaskRef& task) const {
  return std::find(tasks.begin(), tasks.end(), task) != tasks.end();
}

CritPath generate_crit_path(const TaskGraph& graph) {
  if (graph.empty()) throw DomainError("critical path of an empty graph");
  std::set<TaskRef> on_path;
  auto feeds_path = [&](std::size_t i) {
    for (auto j : graph.tds_out(i))
      if (on_path.contains(graph.task(j))) return true;
    return false;
  };

  // Every Factorize; never an Update1.
  for (const auto& t : graph.tasks())
    if (t.kind == TaskKind::Factorize) on_path.insert(t);
  // Update2 tasks directly depended on by a path member.
  for (std::size_t i = 0; i < graph.size(); ++i)
    if (graph.task(i).kind == TaskKind::Update2 && feeds_path(i)) on_path.insert(graph.task(i));
  // Solve(j, i), i < j, in ascending (i, j) order.
  std::vector<std::size_t> solves;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& t = graph.task(i);
    if (t.kind == TaskKind::Solve && t.col < t.row) solves.push_back(i);
  }
  std::sort(solves.begin(), solves.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = graph.task(a);
    const auto& y = graph.task(b);
    return std::pair(x.col, x.row) < std::pair(y.col, y.row);
  });
  for (auto i : solves)
    if (feeds_path(i)) on_path.insert(graph.task(i));

  // std::set iterates in program order, which is a topological order.
  return CritPath{std::vector<TaskRef>(on_path.begin(), on_path.end())};
}

double CpmSchedule::slack(std::size_t i) const {
  return std::max(0.0, latest_finish.at(i) - earliest_finish.at(i));
}

CpmSchedule critical_path_method(std::span<const double> durations, std::span<const WeightedEdge> edges) {
  const std::size_t n = durations.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> succ(n), pred(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& e : edges) {
    if (e.from >= n || e.to >= n) throw DomainError("CPM edge references unknown node");
    succ[e.from].emplace_back(e.to, e.weight);
    pred[e.to].emplace_back(e.from, e.weight);
    ++indegree[e.to];
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    const auto i = ready.front();
    ready.pop_front();
    order.push_back(i);
    for (auto [j, w] : succ[i])
      if (--indegree[j] == 0) ready.push_back(j);
  }
  if (order.size() != n) throw DomainError("CPM input has a cycle");

  CpmSchedule s;
  s.earliest_finish.assign(n, 0.0);
  for (auto i : order) {
    double start = 0.0;
    for (auto [p, w] : pred[i]) start = std::max(start, s.earliest_finish[p] + w);
    s.earliest_finish[i] = start + durations[i];
    s.makespan = std::max(s.makespan, s.earliest_finish[i]);
  }
  s.latest_finish.assign(n, s.makespan);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto i = *it;
    double finish = s.makespan;
    for (auto [j, w] : succ[i]) finish = std::min(finish, s.latest_finish[j] - durations[j] - w);
    s.latest_finish[i] = finish;
  }
  return s;
}

std::map<TaskRef, double> compute_slack(const TaskGraph& graph, const std::map<TaskRef, double>& durations,
                                        const EdgeDelay& delay) {
  std::vector<double> d(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    auto it = durations.find(graph.task(i));
    if (it == durations.end()) throw DomainError("missing duration for " + to_string(graph.task(i)));
    if (!(it->second > 0.0)) throw DomainError("duration of " + to_string(graph.task(i)) + " must be positive");
    d[i] = it->second;
  }
  std::vector<WeightedEdge> edges;
  edges.reserve(graph.edges().size());
  for (const auto& e : graph.edges())
    edges.push_back({graph.index_of(e.from), graph.index_of(e.to), delay ? delay(e) : 0.0});
  const auto cpm = critical_path_method(d, edges);
  std::map<TaskRef, double> slack;
  for (std::size_t i = 0; i < graph.size(); ++i) slack.emplace(graph.task(i), cpm.slack(i));
  return slack;
}

}  // namespace dvfsim
