#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dvfsim {

enum class Factorization : std::uint8_t { Cholesky, LU, QR };

// Diagonal-block updates are Update2, off-diagonal ones Update1; they are
// distinguished because their kernels differ in cost.
enum class TaskKind : std::uint8_t { Factorize, Solve, Update1, Update2 };

// Explicit: the two tasks touch different blocks. Implicit: same block.
enum class DepKind : std::uint8_t { Explicit, Implicit };

std::string_view to_string(Factorization kind);
std::string_view to_string(TaskKind kind);
std::string_view to_string(DepKind kind);
Factorization parse_factorization(std::string_view name);
TaskKind parse_task_kind(std::string_view name);
DepKind parse_dep_kind(std::string_view name);

/// One unit of work on block (row, col) during elimination step `step`.
/// Indices are 1-based. Repeated updates on the same block are told apart
/// by their step.
struct TaskRef {
  TaskKind kind = TaskKind::Factorize;
  int row = 1;
  int col = 1;
  int step = 1;

  bool same_block(const TaskRef& other) const { return row == other.row && col == other.col; }

  friend bool operator==(const TaskRef&, const TaskRef&) = default;

  /// Program order: step-major, then Factorize < Solve < Update, then row,
  /// then column. This is a topological order of every generated graph and
  /// the order in which a single process executes the tasks it owns.
  friend std::strong_ordering operator<=>(const TaskRef& a, const TaskRef& b);
};

/// Short label, e.g. "F(1,1)@1", "S(3,1)@1", "U1(4,2)@1".
std::string to_string(const TaskRef& task);

struct DepEdge {
  TaskRef from;  // depended task
  TaskRef to;    // dependent task
  DepKind kind = DepKind::Explicit;

  friend bool operator==(const DepEdge& a, const DepEdge& b) { return a.from == b.from && a.to == b.to; }
  friend std::strong_ordering operator<=>(const DepEdge& a, const DepEdge& b) {
    if (auto c = a.from <=> b.from; c != 0) return c;
    return a.to <=> b.to;
  }
};

/// Blocked-factorization task DAG with both task dependency sets per task.
///
/// Tasks are kept in program order and addressed by index; `tds_in(i)` lists
/// the tasks task i waits on, `tds_out(i)` those waiting on it. Edges are a
/// set: duplicates passed to the constructor collapse to one.
class TaskGraph {
 public:
  TaskGraph(Factorization kind, int n_blocks, std::vector<TaskRef> tasks, std::vector<DepEdge> edges);

  Factorization kind() const { return kind_; }
  int n_blocks() const { return n_blocks_; }
  std::size_t size() const { return tasks_.size(); }
  bool empty() const { return tasks_.empty(); }

  std::span<const TaskRef> tasks() const { return tasks_; }
  std::span<const DepEdge> edges() const { return edges_; }
  const TaskRef& task(std::size_t index) const { return tasks_.at(index); }

  std::optional<std::size_t> find(const TaskRef& task) const;
  /// Throws DomainError when the task is not part of the graph.
  std::size_t index_of(const TaskRef& task) const;

  std::span<const std::size_t> tds_in(std::size_t index) const { return tds_in_.at(index); }
  std::span<const std::size_t> tds_out(std::size_t index) const { return tds_out_.at(index); }
  std::vector<TaskRef> tds_in(const TaskRef& task) const;
  std::vector<TaskRef> tds_out(const TaskRef& task) const;

  /// True when some dependent works on a different block.
  bool has_explicit_out(std::size_t index) const { return explicit_out_.at(index); }

  /// Kahn's algorithm; throws DomainError when the graph has a cycle.
  std::vector<std::size_t> topological_order() const;

  friend bool operator==(const TaskGraph& a, const TaskGraph& b) {
    return a.kind_ == b.kind_ && a.n_blocks_ == b.n_blocks_ && a.tasks_ == b.tasks_ &&
           a.edges_ == b.edges_ && a.edge_kinds_equal(b);
  }

 private:
  bool edge_kinds_equal(const TaskGraph& other) const;

  Factorization kind_;
  int n_blocks_;
  std::vector<TaskRef> tasks_;
  std::vector<DepEdge> edges_;
  std::vector<std::vector<std::size_t>> tds_in_;
  std::vector<std::vector<std::size_t>> tds_out_;
  std::vector<bool> explicit_out_;
};

/// Whether an update task is the final update of its block before the
/// block is solved or factorized. Non-update tasks always return false.
bool is_last_instance(Factorization kind, const TaskRef& task);

/// Builds the task graph of an N x N blocked factorization. Throws
/// DomainError for N < 1.
TaskGraph generate_graph(Factorization kind, int n_blocks);

struct ProcessCoord {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const ProcessCoord&, const ProcessCoord&) = default;
};

/// 2-D block cyclic layout: block (i, j) lives on process
/// ((i-1) mod p_rows, (j-1) mod p_cols).
struct ProcessGrid {
  int p_rows = 1;
  int p_cols = 1;
  int block_size = 256;

  int process_count() const { return p_rows * p_cols; }
  int linear(ProcessCoord c) const { return c.row * p_cols + c.col; }
};

ProcessCoord map_owner(const ProcessGrid& grid, int i, int j);
/// Linear process id owning the task's block.
int owner_process(const ProcessGrid& grid, const TaskRef& task);

/// Task indices owned by each process, in program order.
std::vector<std::vector<std::size_t>> program_order(const TaskGraph& graph, const ProcessGrid& grid);

/// Critical path built from TDS analysis, ordered by dependency.
struct CritPath {
  std::vector<TaskRef> tasks;

  bool contains(const TaskRef& task) const;
};

CritPath generate_crit_path(const TaskGraph& graph);

struct WeightedEdge {
  std::size_t from;
  std::size_t to;
  double weight = 0.0;
};

/// Forward/backward critical-path-method passes over a DAG given by node
/// durations and weighted edges (weight = delay between the end of `from`
/// and the start of `to`).
struct CpmSchedule {
  std::vector<double> earliest_finish;
  std::vector<double> latest_finish;
  double makespan = 0.0;

  double slack(std::size_t i) const;
};

CpmSchedule critical_path_method(std::span<const double> durations, std::span<const WeightedEdge> edges);

using EdgeDelay = std::function<double(const DepEdge&)>;

/// slack(t) = latest_end(t) - earliest_end(t). `delay`, when set, weights
/// each edge (communication time between processes).
std::map<TaskRef, double> compute_slack(const TaskGraph& graph, const std::map<TaskRef, double>& durations,
                                        const EdgeDelay& delay = {});

}  // namespace dvfsim
