#include "dvfsim/power.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "dvfsim/error.hpp"

namespace dvfsim {

namespace {

constexpr double kFreqTolerance = 1e-9;

bool same_freq(double a, double b) { return std::abs(a - b) <= kFreqTolerance * std::max(std::abs(a), std::abs(b)); }

void check_ratio(const GearTable& table, SlackRatio n) {
  const double max_n = table.f_high() / table.f_low();
  if (n.value() > max_n * (1.0 + 1e-12))
    throw DomainError("slack ratio " + std::to_string(n.value()) + " exceeds f_high/f_low = " + std::to_string(max_n));
}

}  // namespace

GearTable::GearTable(std::string name, std::vector<Gear> gears) : name_(std::move(name)), gears_(std::move(gears)) {
  if (gears_.empty()) throw DomainError("gear table '" + name_ + "' is empty");
  for (std::size_t i = 0; i < gears_.size(); ++i) {
    if (!(gears_[i].ghz > 0.0) || !(gears_[i].volts > 0.0))
      throw DomainError("gear table '" + name_ + "': frequency and voltage must be positive");
    if (i > 0 && !(gears_[i].ghz < gears_[i - 1].ghz))
      throw DomainError("gear table '" + name_ + "': frequencies must be strictly decreasing");
    if (i > 0 && gears_[i].volts > gears_[i - 1].volts)
      throw DomainError("gear table '" + name_ + "': voltages must be non-increasing");
  }
}

std::ptrdiff_t GearTable::find(double ghz) const {
  for (std::size_t i = 0; i < gears_.size(); ++i)
    if (same_freq(gears_[i].ghz, ghz)) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

std::pair<GearIndex, GearIndex> GearTable::bracket(double ghz) const {
  if (auto i = find(ghz); i >= 0) return {static_cast<GearIndex>(i), static_cast<GearIndex>(i)};
  if (ghz > f_high() || ghz < f_low())
    throw DomainError("frequency " + std::to_string(ghz) + " GHz outside [" + std::to_string(f_low()) + ", " +
                      std::to_string(f_high()) + "]");
  GearIndex below = 0;
  while (gears_[below].ghz > ghz) ++below;
  return {below - 1, below};
}

std::span<const std::pair<std::string_view, GearTable>> builtin_gear_tables() {
  static const std::array<std::pair<std::string_view, GearTable>, 5> tables{{
      {"opteron-2380", GearTable("AMD Opteron 2380", {{2.5, 1.300}, {1.8, 1.200}, {1.3, 1.100}, {0.8, 1.025}})},
      {"opteron-846",
       GearTable("AMD Opteron 846 / Athlon64 3200+", {{2.0, 1.500}, {1.8, 1.400}, {1.6, 1.300}, {0.8, 0.900}})},
      {"opteron-2218", GearTable("AMD Opteron 2218", {{2.4, 1.250}, {2.2, 1.200}, {1.8, 1.150}, {1.0, 1.100}})},
      {"pentium-m", GearTable("Intel Pentium M", {{1.4, 1.484}, {1.2, 1.436}, {1.0, 1.308}, {0.8, 1.180}})},
      {"core-i7-2760qm",
       GearTable("Intel Core i7-2760QM", {{2.4, 1.060}, {2.0, 0.970}, {1.6, 0.890}, {0.8, 0.760}})},
  }};
  return tables;
}

const GearTable& builtin_gear_table(std::string_view key) {
  for (const auto& [k, table] : builtin_gear_tables())
    if (k == key || table.name() == key) return table;
  throw DomainError("unknown gear table '" + std::string(key) + "'");
}

PowerParams PowerParams::calibrated(const GearTable& table, double watts_high, double watts_low, double i_sub) {
  const Gear& h = table.high();
  const Gear& l = table.low();
  const double dyn_h = h.ghz * h.volts * h.volts;
  const double dyn_l = l.ghz * l.volts * l.volts;
  const double ac = (watts_high - watts_low - i_sub * (h.volts - l.volts)) / (dyn_h - dyn_l);
  PowerParams p{ac, i_sub, watts_high - ac * dyn_h - i_sub * h.volts};
  if (p.ac < 0.0 || p.p_const < 0.0) throw DomainError("power calibration yields negative coefficients");
  return p;
}

PowerParams PowerParams::defaults() {
  static const PowerParams p = calibrated(builtin_gear_table("opteron-2380"), 950.0 / 16.0, 700.0 / 16.0, 2.0);
  return p;
}

SlackRatio::SlackRatio(double n) : n_(n) {
  if (!(n >= 1.0)) throw DomainError("slack ratio must be >= 1, got " + std::to_string(n));
}

double node_power(const PowerParams& params, const Gear& gear) {
  return params.ac * gear.ghz * gear.volts * gear.volts + params.i_sub * gear.volts + params.p_const;
}

double energy_race_to_halt(const PowerParams& params, const GearTable& table, double T, SlackRatio n) {
  check_ratio(table, n);
  return node_power(params, table.high()) * T + node_power(params, table.low()) * (n.value() - 1.0) * T;
}

double energy_cp_stretch(const PowerParams& params, const GearTable& table, double T, SlackRatio n, double v_m) {
  check_ratio(table, n);
  if (!(v_m > 0.0)) throw DomainError("stretch voltage must be positive");
  // ac * (f_h / n) * v_m^2 * nT collapses to ac * f_h * v_m^2 * T.
  return params.ac * table.f_high() * v_m * v_m * T + n.value() * params.i_sub * v_m * T +
         n.value() * params.p_const * T;
}

double energy_ratio(const PowerParams& params, const GearTable& table, SlackRatio n, double v_m) {
  const double race = energy_race_to_halt(params, table, 1.0, n);
  if (race == 0.0) throw DomainError("race-to-halt energy is zero; ratio undefined");
  return energy_cp_stretch(params, table, 1.0, n, v_m) / race;
}

double stretch_voltage(const GearTable& table, SlackRatio n) {
  check_ratio(table, n);
  const double f_m = table.f_high() / n.value();
  for (const auto& g : table.gears())
    if (g.ghz <= f_m || same_freq(g.ghz, f_m)) return g.volts;
  return table.low().volts;
}

double ideal_frequency(const GearTable& table, double T, double slack) {
  if (!(T > 0.0)) throw DomainError("task time must be positive");
  if (slack < 0.0) throw DomainError("slack must be non-negative");
  return table.f_high() * T / (T + slack);
}

SplitSchedule split_schedule(const GearTable& table, double f_opt, double work) {
  if (work < 0.0) throw DomainError("work must be non-negative");
  const auto [hi, lo] = table.bracket(f_opt);
  const double span = work / f_opt;
  if (hi == lo) return {hi, lo, span, 0.0};
  const double fh = table[hi].ghz;
  const double fl = table[lo].ghz;
  // x + y = span, fh x + fl y = work
  const double t_high = (work - fl * span) / (fh - fl);
  const double t_low = (fh * span - work) / (fh - fl);
  return {hi, lo, t_high, t_low};
}

}  // namespace dvfsim
