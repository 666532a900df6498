#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dvfsim/policies.hpp"
#include "dvfsim/sim.hpp"

namespace dvfsim {

/// Energy plus throughput metrics of one trace. flop_count sums task cycle
/// counts (one cycle is one flop under the compute-bound model). Throws
/// DomainError for an empty trace.
EnergyReport metrics(const SimTrace& trace, const PowerParams& params, const GearTable& table,
                     const KernelCost& cost);

/// Shorthand using the trace's own power parameters, table and costs.
EnergyReport metrics(const SimTrace& trace);

struct ComparisonRow {
  PolicyKind policy = PolicyKind::Orig;
  EnergyReport report;
  double savings_pct = 0.0;  // (E_base - E) / E_base * 100
  double loss_pct = 0.0;     // (T - T_base) / T_base * 100
};

/// One row per report, relative to `baseline`. Percentages are relative to
/// the simulated model, not to any measured cluster. Throws DomainError when
/// the baseline is missing.
std::vector<ComparisonRow> compare(const std::vector<std::pair<PolicyKind, EnergyReport>>& reports,
                                   PolicyKind baseline);

/// {policy, total_energy_j, makespan_s, mflops_per_watt, savings_pct,
/// loss_pct, per_process: [{process, energy_j, busy_fraction}]}
std::string report_json(const ComparisonRow& row);
/// Array of report_json objects.
std::string comparison_json(const std::vector<ComparisonRow>& rows);
/// Same columns; per_process is an embedded JSON string.
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace dvfsim
