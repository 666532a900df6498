#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dvfsim {

/// One DVFS operating point.
struct Gear {
  double ghz = 0.0;
  double volts = 0.0;

  friend bool operator==(const Gear&, const Gear&) = default;
};

/// Index into a GearTable; 0 is the fastest gear.
using GearIndex = std::size_t;

/// Operating points of one processor model, fastest first. Frequencies are
/// strictly decreasing and voltages non-increasing.
class GearTable {
 public:
  GearTable(std::string name, std::vector<Gear> gears);

  const std::string& name() const { return name_; }
  std::span<const Gear> gears() const { return gears_; }
  std::size_t size() const { return gears_.size(); }
  const Gear& operator[](GearIndex i) const { return gears_.at(i); }

  GearIndex high_index() const { return 0; }
  GearIndex low_index() const { return gears_.size() - 1; }
  const Gear& high() const { return gears_.front(); }
  const Gear& low() const { return gears_.back(); }
  double f_high() const { return high().ghz; }
  double f_low() const { return low().ghz; }

  /// Index of the gear running at `ghz` (relative tolerance 1e-9), if any.
  std::ptrdiff_t find(double ghz) const;

  /// Slowest gear at or above `ghz` and fastest gear at or below it. Both
  /// are equal when `ghz` is an available frequency. Throws DomainError
  /// when `ghz` lies outside [f_low, f_high].
  std::pair<GearIndex, GearIndex> bracket(double ghz) const;

  friend bool operator==(const GearTable&, const GearTable&) = default;

 private:
  std::string name_;
  std::vector<Gear> gears_;
};

/// The five published processor tables, keyed "opteron-2380",
/// "opteron-846", "opteron-2218", "pentium-m" and "core-i7-2760qm".
std::span<const std::pair<std::string_view, GearTable>> builtin_gear_tables();

/// Looks a built-in table up by key or by its display name. Throws
/// DomainError for unknown names.
const GearTable& builtin_gear_table(std::string_view key);

/// Node power coefficients: P = ac*f*V^2 + i_sub*V + p_const.
///   ac       switched capacitance (active fraction times load), W / (GHz V^2)
///   i_sub    CPU subthreshold leakage current, A
///   p_const  leakage power of everything except the CPU, W
struct PowerParams {
  double ac = 0.0;
  double i_sub = 0.0;
  double p_const = 0.0;

  /// Solves ac and p_const so that a node draws `watts_high` at the
  /// table's fastest gear and `watts_low` at its slowest, for a given i_sub.
  static PowerParams calibrated(const GearTable& table, double watts_high, double watts_low, double i_sub);

  /// Demo defaults, NOT measured values: calibrated on the Opteron 2380
  /// table to 950/16 W at f_high and 700/16 W at f_low with i_sub = 2 A.
  static PowerParams defaults();

  friend bool operator==(const PowerParams&, const PowerParams&) = default;
};

/// (T + T') / T for a task of run time T with slack T'. Must be >= 1.
class SlackRatio {
 public:
  explicit SlackRatio(double n);
  double value() const { return n_; }

 private:
  double n_;
};

double node_power(const PowerParams& params, const Gear& gear);

/// Energy of running a task for T at f_high and idling its slack at f_low.
double energy_race_to_halt(const PowerParams& params, const GearTable& table, double T, SlackRatio n);

/// Energy of running the task across T + slack at f_high / n with supply
/// voltage `v_m`.
double energy_cp_stretch(const PowerParams& params, const GearTable& table, double T, SlackRatio n, double v_m);

/// energy_cp_stretch / energy_race_to_halt. Throws DomainError when the
/// race-to-halt energy is zero.
double energy_ratio(const PowerParams& params, const GearTable& table, SlackRatio n, double v_m);

/// Supply voltage used to stretch a task by `n`: the voltage of the fastest
/// available gear at or below f_high / n (the slowest gear if none is).
double stretch_voltage(const GearTable& table, SlackRatio n);

/// Frequency that fills T + slack exactly under compute-bound scaling:
/// f_high * T / (T + slack). Not clamped to the table.
double ideal_frequency(const GearTable& table, double T, double slack);

/// Two-gear approximation of a frequency that is not available.
struct SplitSchedule {
  GearIndex high;      // slowest gear at or above f_opt
  GearIndex low;       // fastest gear at or below f_opt
  double t_high = 0.0; // seconds at `high`
  double t_low = 0.0;  // seconds at `low`
};

/// Splits `work` (giga-cycles) between the gears bracketing f_opt so that
/// t_high * f(high) + t_low * f(low) = work and t_high + t_low = work / f_opt.
SplitSchedule split_schedule(const GearTable& table, double f_opt, double work);

}  // namespace dvfsim
