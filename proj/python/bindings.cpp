#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <functional>
#include <map>
#include <string>

#include "dvfsim/dag.hpp"
#include "dvfsim/error.hpp"
#include "dvfsim/io.hpp"
#include "dvfsim/policies.hpp"
#include "dvfsim/power.hpp"
#include "dvfsim/report.hpp"
#include "dvfsim/sim.hpp"

namespace py = pybind11;
using namespace dvfsim;

namespace {

py::dict report_dict(const EnergyReport& r) {
  py::list per;
  for (const auto& p : r.per_process) {
    py::dict d;
    d["process"] = p.process;
    d["energy_j"] = p.energy;
    d["busy_fraction"] = p.busy_fraction;
    per.append(d);
  }
  py::dict d;
  d["total_energy_j"] = r.total_energy;
  d["makespan_s"] = r.makespan;
  d["flop_count"] = r.flop_count;
  d["mflops_per_watt"] = r.mflops_per_watt;
  d["per_process"] = per;
  return d;
}

const GearTable& table_of(const std::string& key) { return builtin_gear_table(key); }

}  // namespace

PYBIND11_MODULE(_dvfsim, m) {
  m.doc() = "DVFS scheduling simulator core";

  static py::exception<DomainError> domain_error(m, "DomainError", PyExc_ValueError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<ProtocolError> protocol_error(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DomainError& e) {
      domain_error(e.what());
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const ProtocolError& e) {
      protocol_error(e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  py::class_<TaskRef>(m, "TaskRef")
      .def(py::init([](const std::string& kind, int row, int col, int step) {
             return TaskRef{parse_task_kind(kind), row, col, step};
           }),
           py::arg("kind"), py::arg("row"), py::arg("col"), py::arg("step") = 1)
      .def_property_readonly("kind", [](const TaskRef& t) { return std::string(to_string(t.kind)); })
      .def_readonly("row", &TaskRef::row)
      .def_readonly("col", &TaskRef::col)
      .def_readonly("step", &TaskRef::step)
      .def("__repr__", [](const TaskRef& t) { return to_string(t); })
      .def("__eq__", [](const TaskRef& a, const TaskRef& b) { return a == b; })
      .def("__lt__", [](const TaskRef& a, const TaskRef& b) { return a < b; })
      .def("__hash__", [](const TaskRef& t) {
        return std::hash<std::string>{}(to_string(t));
      });

  py::class_<TaskGraph>(m, "TaskGraph")
      .def_property_readonly("kind", [](const TaskGraph& g) { return std::string(to_string(g.kind())); })
      .def_property_readonly("n_blocks", &TaskGraph::n_blocks)
      .def_property_readonly("tasks", [](const TaskGraph& g) { return std::vector<TaskRef>(g.tasks().begin(), g.tasks().end()); })
      .def_property_readonly("edges",
                             [](const TaskGraph& g) {
                               py::list out;
                               for (const auto& e : g.edges())
                                 out.append(py::make_tuple(e.from, e.to, std::string(to_string(e.kind))));
                               return out;
                             })
      .def("tds_in", py::overload_cast<const TaskRef&>(&TaskGraph::tds_in, py::const_))
      .def("tds_out", py::overload_cast<const TaskRef&>(&TaskGraph::tds_out, py::const_))
      .def("to_json", &graph_to_json)
      .def("to_dot", &graph_to_dot)
      .def("__len__", &TaskGraph::size)
      .def("__eq__", [](const TaskGraph& a, const TaskGraph& b) { return a == b; });

  m.def("generate_graph", [](const std::string& kind, int n) { return generate_graph(parse_factorization(kind), n); },
        py::arg("kind"), py::arg("n_blocks"));
  m.def("graph_from_json", [](const std::string& text) { return graph_from_json(text); });
  m.def("generate_crit_path", [](const TaskGraph& g) { return generate_crit_path(g).tasks; });
  m.def(
      "map_owner",
      [](int p_rows, int p_cols, int i, int j) {
        const auto c = map_owner(ProcessGrid{p_rows, p_cols}, i, j);
        return py::make_tuple(c.row, c.col);
      },
      py::arg("p_rows"), py::arg("p_cols"), py::arg("i"), py::arg("j"));
  m.def("compute_slack", [](const TaskGraph& g, const std::map<TaskRef, double>& d) { return compute_slack(g, d); });

  py::class_<PowerParams>(m, "PowerParams")
      .def(py::init<double, double, double>(), py::arg("ac") = 0.0, py::arg("i_sub") = 0.0, py::arg("p_const") = 0.0)
      .def_static("defaults", &PowerParams::defaults)
      .def_readwrite("ac", &PowerParams::ac)
      .def_readwrite("i_sub", &PowerParams::i_sub)
      .def_readwrite("p_const", &PowerParams::p_const);

  m.def("gear_tables", [] {
    std::vector<std::string> keys;
    for (const auto& [k, t] : builtin_gear_tables()) keys.emplace_back(k);
    return keys;
  });
  m.def("gear_table", [](const std::string& key) {
    std::vector<std::pair<double, double>> out;
    for (const auto& g : table_of(key).gears()) out.emplace_back(g.ghz, g.volts);
    return out;
  });
  m.def("node_power", [](const PowerParams& p, double ghz, double volts) { return node_power(p, {ghz, volts}); });
  m.def("energy_race_to_halt", [](const PowerParams& p, const std::string& table, double T, double n) {
    return energy_race_to_halt(p, table_of(table), T, SlackRatio(n));
  });
  m.def("energy_cp_stretch", [](const PowerParams& p, const std::string& table, double T, double n, double v_m) {
    return energy_cp_stretch(p, table_of(table), T, SlackRatio(n), v_m);
  });
  m.def("energy_ratio", [](const PowerParams& p, const std::string& table, double n, double v_m) {
    return energy_ratio(p, table_of(table), SlackRatio(n), v_m);
  });
  m.def("stretch_voltage",
        [](const std::string& table, double n) { return stretch_voltage(table_of(table), SlackRatio(n)); });
  m.def("ideal_frequency",
        [](const std::string& table, double T, double slack) { return ideal_frequency(table_of(table), T, slack); });
  m.def("split_schedule", [](const std::string& table, double f_opt, double work) {
    const GearTable& t = table_of(table);
    const auto s = split_schedule(t, f_opt, work);
    return py::make_tuple(t[s.high].ghz, t[s.low].ghz, s.t_high, s.t_low);
  });

  py::class_<PredictorState>(m, "PredictorState")
      .def(py::init([](double lambda, double initial) { return PredictorState{0.0, initial, lambda}; }),
           py::arg("lambda_") = 1.0, py::arg("initial") = 0.0)
      .def_readonly("last_observed", &PredictorState::last_observed)
      .def_readonly("last_predicted", &PredictorState::last_predicted);
  m.def("past_predict", &past_predict);
  m.def("relax_predict", &relax_predict);

  py::class_<SimTrace>(m, "SimTrace")
      .def_property_readonly("policy", [](const SimTrace& t) { return std::string(to_string(t.policy)); })
      .def_readonly("makespan", &SimTrace::makespan)
      .def_property_readonly("process_count", &SimTrace::process_count)
      .def_readonly("graph", &SimTrace::graph)
      .def("segments",
           [](const SimTrace& t, int p) {
             py::list out;
             for (const auto& s : t.lanes.at(p)) {
               py::dict d;
               d["t_start"] = s.t_start;
               d["t_end"] = s.t_end;
               d["ghz"] = t.table[s.gear].ghz;
               d["activity"] = std::string(to_string(s.activity));
               d["task"] = s.task ? py::object(py::cast(t.graph.task(*s.task))) : py::object(py::none());
               d["cycles"] = s.cycles;
               out.append(d);
             }
             return out;
           })
      .def("schedule",
           [](const SimTrace& t) {
             py::dict out;
             for (std::size_t i = 0; i < t.graph.size(); ++i)
               out[py::cast(t.graph.task(i))] =
                   py::make_tuple(t.schedule[i].start, t.schedule[i].finish, t.schedule[i].process);
             return out;
           })
      .def("trace_csv", &trace_csv)
      .def("schedule_csv", &schedule_csv);

  m.def("_simulate", [](const std::string& config_json) { return simulate(parse_sim_config(config_json)); });
  m.def("metrics", [](const SimTrace& t) { return report_dict(metrics(t)); });
  m.def("compare", [](const std::map<std::string, const SimTrace*>& traces, const std::string& baseline) {
    std::vector<std::pair<PolicyKind, EnergyReport>> reports;
    for (const auto& [name, trace] : traces) reports.emplace_back(parse_policy(name), metrics(*trace));
    py::list out;
    for (const auto& row : compare(reports, parse_policy(baseline))) {
      py::dict d = report_dict(row.report);
      d["policy"] = std::string(to_string(row.policy));
      d["savings_pct"] = row.savings_pct;
      d["loss_pct"] = row.loss_pct;
      out.append(d);
    }
    return out;
  });
  m.def("policies", [] {
    std::vector<std::string> out;
    for (auto k : all_policies()) out.emplace_back(to_string(k));
    return out;
  });
}
