#pragma once

#include <array>
#include <cstdint>

#include "dvfsim/dag.hpp"
#include "dvfsim/power.hpp"

namespace dvfsim {

/// Cycle count of each task kind on one b x b block. Compute-bound: a task
/// of C cycles takes C / f seconds at f.
struct KernelCost {
  std::array<std::int64_t, 4> cycles{};  // indexed by TaskKind

  std::int64_t cycles_for(TaskKind kind) const;

  /// Standard dense-kernel flop counts:
  ///   Cholesky  F b^3/3,  S b^3, U1 2b^3, U2 b^3
  ///   LU        F 2b^3/3, S b^3, U1 2b^3, U2 2b^3
  ///   QR        F 2b^3,   S b^3, U1 2b^3, U2 2b^3
  static KernelCost dense(Factorization kind, int block_size);

  friend bool operator==(const KernelCost&, const KernelCost&) = default;
};

std::int64_t task_cycles(const KernelCost& cost, const TaskRef& task);

/// Seconds to run `task` at `ghz`.
double task_duration(const KernelCost& cost, const TaskRef& task, double ghz);

/// Point-to-point message cost. Only the start-up part is CPU-sensitive,
/// and only by `cpu_bound_fraction`; the transfer itself is bandwidth bound.
struct CommModel {
  double latency_startup = 5e-5;      // seconds at f_high
  double bytes_per_second = 1.25e8;   // ~1 Gb/s Ethernet
  double cpu_bound_fraction = 0.1;    // uncalibrated
  bool zero_latency_doneflags = false;

  /// Payload of one double-precision b x b block.
  static double block_bytes(int block_size) { return 8.0 * block_size * block_size; }

  friend bool operator==(const CommModel&, const CommModel&) = default;
};

double message_duration(const CommModel& comm, double bytes, double ghz, const GearTable& table);

/// Delivery delay of a zero-payload TX DoneFlag sent at `ghz`.
double doneflag_duration(const CommModel& comm, double ghz, const GearTable& table);

inline constexpr double kDefaultTransitionLatency = 1e-4;

}  // namespace dvfsim
