#include "dvfsim/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include "dvfsim/error.hpp"

namespace dvfsim {

std::int64_t KernelCost::cycles_for(TaskKind kind) const {
  const auto i = static_cast<std::size_t>(kind);
  if (i >= cycles.size()) throw DomainError("unknown task kind " + std::to_string(i));
  return cycles[i];
}

KernelCost KernelCost::dense(Factorization kind, int block_size) {
  if (block_size < 1) throw DomainError("block size must be >= 1");
  const double b3 = std::pow(static_cast<double>(block_size), 3);
  // Every kernel costs at least one cycle, even for tiny blocks.
  auto c = [](double v) { return std::max<std::int64_t>(1, std::llround(v)); };
  KernelCost k;
  switch (kind) {
    case Factorization::Cholesky: k.cycles = {c(b3 / 3.0), c(b3), c(2.0 * b3), c(b3)}; break;
    case Factorization::LU: k.cycles = {c(2.0 * b3 / 3.0), c(b3), c(2.0 * b3), c(2.0 * b3)}; break;
    case Factorization::QR: k.cycles = {c(2.0 * b3), c(b3), c(2.0 * b3), c(2.0 * b3)}; break;
  }
  return k;
}

std::int64_t task_cycles(const KernelCost& cost, const TaskRef& task) { return cost.cycles_for(task.kind); }

double task_duration(const KernelCost& cost, const TaskRef& task, double ghz) {
  if (!(ghz > 0.0)) throw DomainError("frequency must be positive");
  return static_cast<double>(cost.cycles_for(task.kind)) / (ghz * 1e9);
}

double message_duration(const CommModel& comm, double bytes, double ghz, const GearTable& table) {
  if (bytes < 0.0) throw DomainError("message size must be non-negative");
  if (!(ghz > 0.0)) throw DomainError("frequency must be positive");
  const double startup = comm.latency_startup * (1.0 + comm.cpu_bound_fraction * (table.f_high() / ghz - 1.0));
  return startup + bytes / comm.bytes_per_second;
}

double doneflag_duration(const CommModel& comm, double ghz, const GearTable& table) {
  return comm.zero_latency_doneflags ? 0.0 : message_duration(comm, 0.0, ghz, table);
}

}  // namespace dvfsim
