#include "dvfsim/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dvfsim/error.hpp"

namespace dvfsim {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

json task_json(const TaskRef& t) {
  return {{"kind", to_string(t.kind)}, {"row", t.row}, {"col", t.col}, {"step", t.step}};
}

// Field access with the dotted path of the field in error messages.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  void only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) throw ConfigError("unknown field " + (path_.empty() ? k : path_ + "." + k));
  }

  Reader object(const char* key) const {
    require(key);
    return Reader(j_.at(key), field(key));
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number()) throw ConfigError(field(key) + " must be a number");
    return j_.at(key).get<double>();
  }
  double number(const char* key) const {
    require(key);
    return number(key, 0.0);
  }
  std::int64_t integer(const char* key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number_integer()) throw ConfigError(field(key) + " must be an integer");
    return j_.at(key).get<std::int64_t>();
  }
  std::int64_t integer(const char* key) const {
    require(key);
    return integer(key, 0);
  }
  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(field(key) + " must be true or false");
    return j_.at(key).get<bool>();
  }
  std::string string(const char* key) const {
    require(key);
    if (!j_.at(key).is_string()) throw ConfigError(field(key) + " must be a string");
    return j_.at(key).get<std::string>();
  }

  void require(const char* key) const {
    if (!has(key)) throw ConfigError("missing field " + field(key));
  }

 private:
  const json& j_;
  std::string path_;
};

int to_int(std::int64_t v, const std::string& field) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(field + " is out of range");
  return static_cast<int>(v);
}

template <class F>
auto rethrow_as_config(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

TaskRef parse_task(const json& j, const std::string& path) {
  Reader r(j, path);
  r.only({"kind", "row", "col", "step"});
  const auto kind = rethrow_as_config(r.field("kind"), [&] { return parse_task_kind(r.string("kind")); });
  return {kind, to_int(r.integer("row"), r.field("row")), to_int(r.integer("col"), r.field("col")),
          to_int(r.integer("step"), r.field("step"))};
}

GearTable parse_gear_table(const json& j) {
  if (j.is_string())
    return rethrow_as_config("gear_table", [&] { return builtin_gear_table(j.get<std::string>()); });
  Reader r(j, "gear_table");
  r.only({"name", "gears"});
  const json& gears = r.raw("gears");
  if (!gears.is_array()) throw ConfigError("gear_table.gears must be an array");
  std::vector<Gear> out;
  for (std::size_t i = 0; i < gears.size(); ++i) {
    Reader g(gears[i], "gear_table.gears[" + std::to_string(i) + "]");
    g.only({"ghz", "volts"});
    out.push_back({g.number("ghz"), g.number("volts")});
  }
  return rethrow_as_config("gear_table", [&] { return GearTable(r.string("name"), std::move(out)); });
}

void parse_policy_into(const json& j, SimConfig& cfg) {
  if (j.is_string()) {
    cfg.policy = parse_policy(j.get<std::string>());
    return;
  }
  Reader r(j, "policy");
  r.only({"name", "interval", "lambda", "utilization_threshold"});
  cfg.policy = parse_policy(r.string("name"));
  cfg.policy_params.interval = r.number("interval", cfg.policy_params.interval);
  cfg.policy_params.lambda = r.number("lambda", cfg.policy_params.lambda);
  cfg.policy_params.utilization_threshold =
      r.number("utilization_threshold", cfg.policy_params.utilization_threshold);
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

SimConfig sim_config_from(const Reader& r, const std::filesystem::path& base_dir) {
  SimConfig cfg;
  if (r.integer("schema_version") != kSchemaVersion)
    throw ConfigError("schema_version must be " + std::to_string(kSchemaVersion));

  Reader graph = r.object("graph");
  if (graph.has("file")) {
    graph.only({"file"});
    std::filesystem::path file = graph.string("file");
    if (file.is_relative()) file = base_dir / file;
    cfg.graph = graph_from_json(read_file(file));
    cfg.kind = cfg.graph->kind();
    cfg.n_blocks = cfg.graph->n_blocks();
  } else {
    graph.only({"kind", "n_blocks"});
    cfg.kind = rethrow_as_config("graph.kind", [&] { return parse_factorization(graph.string("kind")); });
    cfg.n_blocks = to_int(graph.integer("n_blocks"), "graph.n_blocks");
  }

  if (r.has("grid")) {
    Reader g = r.object("grid");
    g.only({"p_rows", "p_cols", "block_size"});
    cfg.grid.p_rows = to_int(g.integer("p_rows", cfg.grid.p_rows), g.field("p_rows"));
    cfg.grid.p_cols = to_int(g.integer("p_cols", cfg.grid.p_cols), g.field("p_cols"));
    cfg.grid.block_size = to_int(g.integer("block_size", cfg.grid.block_size), g.field("block_size"));
  }
  if (r.has("gear_table")) cfg.table = parse_gear_table(r.raw("gear_table"));
  if (r.has("power")) {
    Reader p = r.object("power");
    p.only({"ac", "i_sub", "p_const"});
    cfg.power = {p.number("ac", cfg.power.ac), p.number("i_sub", cfg.power.i_sub),
                 p.number("p_const", cfg.power.p_const)};
  }
  if (r.has("cost")) {
    Reader c = r.object("cost");
    c.only({"cycles"});
    Reader cyc = c.object("cycles");
    cyc.only({"factorize", "solve", "update1", "update2"});
    KernelCost k = KernelCost::dense(cfg.kind, std::max(cfg.grid.block_size, 1));
    const char* names[] = {"factorize", "solve", "update1", "update2"};
    for (std::size_t i = 0; i < 4; ++i) k.cycles[i] = cyc.integer(names[i], k.cycles[i]);
    cfg.cost = k;
  }
  if (r.has("comm")) {
    Reader c = r.object("comm");
    c.only({"latency_startup", "bytes_per_second", "cpu_bound_fraction", "zero_latency_doneflags"});
    cfg.comm.latency_startup = c.number("latency_startup", cfg.comm.latency_startup);
    cfg.comm.bytes_per_second = c.number("bytes_per_second", cfg.comm.bytes_per_second);
    cfg.comm.cpu_bound_fraction = c.number("cpu_bound_fraction", cfg.comm.cpu_bound_fraction);
    cfg.comm.zero_latency_doneflags = c.boolean("zero_latency_doneflags", cfg.comm.zero_latency_doneflags);
  }
  cfg.transition_latency = r.number("transition_latency", cfg.transition_latency);
  if (r.has("policy")) parse_policy_into(r.raw("policy"), cfg);
  const auto seed = r.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.validate();
  return cfg;
}

constexpr std::initializer_list<const char*> kSimKeys = {
    "schema_version", "graph", "grid", "gear_table", "power", "cost", "comm", "transition_latency", "policy", "seed"};

}  // namespace

std::string graph_to_json(const TaskGraph& graph) {
  json tasks = json::array();
  for (const auto& t : graph.tasks()) tasks.push_back(task_json(t));
  json edges = json::array();
  for (const auto& e : graph.edges())
    edges.push_back({{"from", task_json(e.from)}, {"to", task_json(e.to)}, {"kind", to_string(e.kind)}});
  json doc = {{"n_blocks", graph.n_blocks()}, {"kind", to_string(graph.kind())}, {"tasks", tasks}, {"edges", edges}};
  return doc.dump(2) + "\n";
}

TaskGraph graph_from_json(std::string_view text) {
  const json doc = parse_document(text);
  Reader r(doc, "graph");
  r.only({"n_blocks", "kind", "tasks", "edges"});
  const auto kind = rethrow_as_config("graph.kind", [&] { return parse_factorization(r.string("kind")); });
  const int n = to_int(r.integer("n_blocks"), "graph.n_blocks");
  if (!r.raw("tasks").is_array()) throw ConfigError("graph.tasks must be an array");
  if (!r.raw("edges").is_array()) throw ConfigError("graph.edges must be an array");
  std::vector<TaskRef> tasks;
  for (std::size_t i = 0; i < r.raw("tasks").size(); ++i)
    tasks.push_back(parse_task(r.raw("tasks")[i], "graph.tasks[" + std::to_string(i) + "]"));
  std::vector<DepEdge> edges;
  for (std::size_t i = 0; i < r.raw("edges").size(); ++i) {
    Reader e(r.raw("edges")[i], "graph.edges[" + std::to_string(i) + "]");
    e.only({"from", "to", "kind"});
    const auto dk = rethrow_as_config(e.field("kind"), [&] { return parse_dep_kind(e.string("kind")); });
    edges.push_back({parse_task(e.raw("from"), e.field("from")), parse_task(e.raw("to"), e.field("to")), dk});
  }
  return rethrow_as_config("graph", [&] { return TaskGraph(kind, n, std::move(tasks), std::move(edges)); });
}

std::string graph_to_dot(const TaskGraph& graph) {
  std::ostringstream out;
  out << "digraph \"" << to_string(graph.kind()) << "_" << graph.n_blocks() << "\" {\n";
  for (const auto& t : graph.tasks()) out << "  \"" << to_string(t) << "\";\n";
  for (const auto& e : graph.edges())
    out << "  \"" << to_string(e.from) << "\" -> \"" << to_string(e.to) << "\""
        << (e.kind == DepKind::Implicit ? " [style=dashed]" : "") << ";\n";
  out << "}\n";
  return out.str();
}

SimConfig parse_sim_config(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_document(text);
  Reader r(doc, "");
  r.only(kSimKeys);
  return sim_config_from(r, base_dir);
}

ExperimentSpec parse_experiment(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_document(text);
  Reader r(doc, "");
  std::set<std::string> keys(kSimKeys.begin(), kSimKeys.end());
  for (const auto& [k, v] : doc.items())
    if (!keys.count(k) && k != "policies" && k != "baseline" && k != "out_dir")
      throw ConfigError("unknown field " + k);

  json sim = doc;
  sim.erase("policies");
  sim.erase("baseline");
  sim.erase("out_dir");
  ExperimentSpec spec{sim_config_from(Reader(sim, ""), base_dir), {}, PolicyKind::Orig, {}};

  r.require("policies");
  if (!r.raw("policies").is_array()) throw ConfigError("policies must be an array");
  for (const auto& p : r.raw("policies")) {
    if (!p.is_string()) throw ConfigError("policies entries must be strings");
    const PolicyKind k = parse_policy(p.get<std::string>());
    if (std::find(spec.policies.begin(), spec.policies.end(), k) != spec.policies.end())
      throw ConfigError("policies lists '" + p.get<std::string>() + "' twice");
    spec.policies.push_back(k);
  }
  if (spec.policies.size() < 2) throw ConfigError("policies must name at least two policies");
  if (r.has("baseline")) spec.baseline = parse_policy(r.string("baseline"));
  else spec.baseline = spec.policies.front();
  if (std::find(spec.policies.begin(), spec.policies.end(), spec.baseline) == spec.policies.end())
    throw ConfigError("baseline must be one of the listed policies");
  if (r.has("out_dir")) {
    spec.out_dir = r.string("out_dir");
    if (spec.out_dir.is_relative()) spec.out_dir = base_dir / spec.out_dir;
  }
  return spec;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  return parse_sim_config(read_file(path), path.parent_path());
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_file(path), path.parent_path());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace dvfsim
