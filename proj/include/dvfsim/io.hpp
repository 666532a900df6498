#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dvfsim/dag.hpp"
#include "dvfsim/policies.hpp"
#include "dvfsim/sim.hpp"

namespace dvfsim {

/// {n_blocks, kind, tasks: [{kind, row, col, step}], edges: [{from, to, kind}]}
std::string graph_to_json(const TaskGraph& graph);
/// Throws ConfigError on malformed documents.
TaskGraph graph_from_json(std::string_view text);
/// Explicit edges solid, implicit edges dashed.
std::string graph_to_dot(const TaskGraph& graph);

/// A simulation config plus the policies to sweep.
struct ExperimentSpec {
  SimConfig config;
  std::vector<PolicyKind> policies;
  PolicyKind baseline = PolicyKind::Orig;
  std::filesystem::path out_dir;
};

/// Parses a versioned (schema_version 1) JSON config. Relative graph file
/// paths resolve against `base_dir`. Throws ConfigError naming the field.
SimConfig parse_sim_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentSpec parse_experiment(std::string_view text, const std::filesystem::path& base_dir = {});

SimConfig load_sim_config(const std::filesystem::path& path);
ExperimentSpec load_experiment(const std::filesystem::path& path);

/// Throw IoError with the path in the message.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dvfsim
