#include "dvfsim/report.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dvfsim/error.hpp"

namespace dvfsim {

namespace {

nlohmann::json row_json(const ComparisonRow& row) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& p : row.report.per_process)
    per.push_back({{"process", p.process}, {"energy_j", p.energy}, {"busy_fraction", p.busy_fraction}});
  return {{"policy", to_string(row.policy)},
          {"total_energy_j", row.report.total_energy},
          {"makespan_s", row.report.makespan},
          {"mflops_per_watt", row.report.mflops_per_watt},
          {"savings_pct", row.savings_pct},
          {"loss_pct", row.loss_pct},
          {"per_process", per}};
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

EnergyReport metrics(const SimTrace& trace, const PowerParams& params, const GearTable& table,
                     const KernelCost& cost) {
  if (trace.graph.empty() || trace.lanes.empty()) throw DomainError("cannot report on an empty trace");
  EnergyReport r = replay_energy(trace, params, table);
  for (const TaskRef& t : trace.graph.tasks()) r.flop_count += static_cast<double>(task_cycles(cost, t));
  if (r.makespan > 0.0 && r.total_energy > 0.0)
    r.mflops_per_watt = (r.flop_count / r.makespan / 1e6) / (r.total_energy / r.makespan);
  return r;
}

EnergyReport metrics(const SimTrace& trace) { return metrics(trace, trace.power, trace.table, trace.cost); }

std::vector<ComparisonRow> compare(const std::vector<std::pair<PolicyKind, EnergyReport>>& reports,
                                   PolicyKind baseline) {
  auto base = std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.first == baseline; });
  if (base == reports.end())
    throw DomainError("baseline policy '" + std::string(to_string(baseline)) + "' not among the reports");
  const double e0 = base->second.total_energy;
  const double t0 = base->second.makespan;
  if (!(e0 > 0.0) || !(t0 > 0.0)) throw DomainError("baseline energy and makespan must be positive");
  std::vector<ComparisonRow> rows;
  for (const auto& [policy, report] : reports)
    rows.push_back({policy, report, (e0 - report.total_energy) / e0 * 100.0, (report.makespan - t0) / t0 * 100.0});
  return rows;
}

std::string report_json(const ComparisonRow& row) { return row_json(row).dump(2); }

std::string comparison_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back(row_json(r));
  return arr.dump(2);
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "policy,total_energy_j,makespan_s,mflops_per_watt,savings_pct,loss_pct,per_process\n";
  for (const auto& r : rows) {
    out << to_string(r.policy) << ',' << r.report.total_energy << ',' << r.report.makespan << ','
        << r.report.mflops_per_watt << ',' << r.savings_pct << ',' << r.loss_pct << ','
        << csv_quote(row_json(r)["per_process"].dump()) << '\n';
  }
  return out.str();
}

}  // namespace dvfsim
