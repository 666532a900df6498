#pragma once

// Independent reference computations used to check the library. None of
// these call the code they are checking.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dvfsim/dag.hpp"
#include "dvfsim/sim.hpp"

namespace oracle {

/// Longest node-weighted path by enumerating every source-to-sink path.
/// Adjacency is rebuilt from the raw edge list.
double brute_force_longest_path(const dvfsim::TaskGraph& graph, const std::function<double(const dvfsim::TaskRef&)>& w,
                                std::uint64_t* paths_seen = nullptr);

/// F + S + U1 + U2 instance counts of a right-looking N x N Cholesky.
struct TaskCounts {
  std::int64_t factorize = 0, solve = 0, update1 = 0, update2 = 0;
  std::int64_t total() const { return factorize + solve + update1 + update2; }
};
TaskCounts cholesky_counts(int n);

/// Flops executed by naive loop nests of the four Cholesky block kernels.
std::int64_t potrf_flops(int b);
std::int64_t trsm_flops(int b);
std::int64_t gemm_flops(int b);
std::int64_t syrk_flops(int b);

/// Returns an empty string when the property holds, otherwise a description
/// of the first violation.
std::string check_tiling(const dvfsim::SimTrace& trace);
std::string check_work_conservation(const dvfsim::SimTrace& trace);
std::string check_dependencies(const dvfsim::SimTrace& trace);
/// TX: every task starts at or after the delivery of each of its DoneFlags,
/// and exactly one DoneFlag exists per edge.
std::string check_done_flags(const dvfsim::SimTrace& trace);

/// Sum of node power times duration, transitions at the dearer gear.
double hand_energy(const dvfsim::SimTrace& trace);

}  // namespace oracle
