#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "syncdmpc/controller.hpp"
#include "syncdmpc/coupling_graph.hpp"
#include "syncdmpc/reference.hpp"

namespace syncdmpc {

/// kind: full | ring | example | custom | conflict. Custom edges are
/// (a, b, weight); `weight` scales every generated edge of the other kinds.
/// "conflict" couples agents whose reference paths pass within
/// conflict_distance of each other (0 selects 2 d_safe) and is resolved once
/// the paths exist.
struct TopologySpec {
  std::string kind = "full";
  std::vector<std::tuple<AgentId, AgentId, double>> edges;
  double weight = 1.0;
  double conflict_distance = 0.0;  // [m]
  /// Conflict kind only: when positive, two agents conflict only if their
  /// references come within reach at times at most this far apart.
  double conflict_window = 0.0;  // [s]
};

/// Goals on the line y = arena_height - top_margin, evenly spaced in x,
/// facing +y.
struct GoalFormation {
  double top_margin = 0.4;  // [m]
};

struct StartSampling {
  double margin = 0.4;           // [m] from the arena walls
  double top_clearance = 1.4;    // [m] starts stay below arena_height - top_clearance
  double heading_min = 0.0;
  double heading_max = 6.283185307179586;
  int max_attempts = 10000;
  /// Start-to-goal assignment: "sorted_x" gives the leftmost start the
  /// leftmost goal; "sampled" keeps the sampling order, so paths cross.
  std::string assignment = "sorted_x";
};

struct ReferenceSpec {
  SpeedProfile profile;
  double turn_radius = 0.0;  // [m]; 0 selects the vehicle's tightest turn
};

struct ScenarioConfig {
  double arena_width = 4.0;
  double arena_height = 4.0;
  int num_agents = 3;
  std::uint64_t seed = 1;
  GoalFormation goal_formation;
  StartSampling start_sampling;
  TopologySpec topology;
  ReferenceSpec reference;
  VehicleParams vehicle;
  OcpParams ocp;
  SyncConfig sync;
  QpSettings qp;
  std::string controller = "scdmpc";  // cmpc | scdmpc
  int max_steps = 150;
  int max_outer_iterations = 10;
  double eps_feas = 1e-3;
  double goal_tolerance_position = 0.05;  // [m]
  double goal_tolerance_heading = 0.05;   // [rad]
  /// A run with more non-converged steps counts as failed by the CLI; -1 disables.
  int max_non_converged_steps = -1;

  /// Throws Error with the offending key.
  void validate() const;
  /// Controller settings with the arena copied into the OCP parameters.
  ControllerConfig controller_config() const;
};

/// Parses a JSON document. Keys are the snake_case field names above; missing
/// keys keep their defaults and unknown keys are rejected.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
/// Canonical JSON with every field.
std::string dump_config(const ScenarioConfig& cfg);

/// Coupling graph over agents 1..n for a topology spec.
/// Graph for every kind except "conflict", which needs the reference paths.
CouplingGraph build_topology(const TopologySpec& spec, int n);

}  // namespace syncdmpc
