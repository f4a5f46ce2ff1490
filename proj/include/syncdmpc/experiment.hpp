#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "syncdmpc/config.hpp"
#include "syncdmpc/network.hpp"
#include "syncdmpc/reference.hpp"

namespace syncdmpc {

/// Initialized scenario: graph, start states, goals and mission references.
struct World {
  ScenarioConfig config;
  CouplingGraph graph;
  std::map<AgentId, VehicleState> starts;
  std::map<AgentId, Pose> goals;
  std::map<AgentId, DubinsPath> paths;
  std::map<AgentId, ReferenceTrajectory> references;
};

/// Smallest distance from a point of `a` to `b` (sampled every 1 cm along a).
double path_distance(const DubinsPath& a, const DubinsPath& b);

/// Couples every pair whose paths come closer than `reach`.
CouplingGraph conflict_topology(const std::map<AgentId, DubinsPath>& paths, double reach, double weight);

/// Couples every pair whose references come closer than `reach` at sample
/// times at most `window` seconds apart. References rest at their goals past
/// the end.
CouplingGraph conflict_topology(const std::map<AgentId, ReferenceTrajectory>& refs, double reach,
                                double window, double weight);

/// Goal line at the arena top, evenly spaced, ids left to right.
std::map<AgentId, Pose> formation_goals(const ScenarioConfig& cfg);

/// Random collision-free starts (ids ordered by x) plus references.
/// Deterministic in the seed.
World generate_scenario(const ScenarioConfig& cfg);

/// World with explicit start poses (at rest) and goals.
World make_world(const ScenarioConfig& cfg, const std::map<AgentId, Pose>& starts,
                 const std::map<AgentId, Pose>& goals);

/// One trajectory-log line: the state at `step` and the input applied from it.
/// The last line of each agent (terminal = true) carries zero input and
/// diagnostics.
struct LogRow {
  int step = 0;
  AgentId agent = 0;
  VehicleState state;
  VehicleInput input;
  double v_ref = 0.0;
  double path_distance = 0.0;
  int outer_iterations = 0;
  int sync_iterations = 0;
  bool converged = true;
  bool relaxed = false;
  double work = 0.0;
  double disagreement = 0.0;
  double max_slack = 0.0;
  bool terminal = false;
};

struct TimingRow {
  int step = 0;
  AgentId agent = 0;
  double solve_time = 0.0;  // [s]
  double sync_time = 0.0;   // [s]
  double step_compute_time = 0.0;
};

struct AgentMetrics {
  double path_deviation = 0.0;   // [m*s]
  double speed_deviation = 0.0;  // [m]
  int arrival_step = -1;
};

struct MetricsReport {
  std::string controller;
  int num_agents = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | collision | solver_failure
  std::string message;
  std::map<AgentId, AgentMetrics> agents;
  double mean_path_deviation = 0.0;
  double mean_speed_deviation = 0.0;
  int steps = 0;          // control steps executed
  int arrival_step = -1;  // first step with every agent at its goal
  double min_distance = 0.0;          // over all pairs
  double min_coupled_distance = 0.0;  // over coupling-graph edges only
  double max_step_work = 0.0;
  double mean_step_work = 0.0;
  int max_outer_iterations = 0;
  double mean_outer_iterations = 0.0;
  int max_sync_iterations = 0;
  long total_sync_iterations = 0;
  int non_converged_steps = 0;
  int relaxed_steps = 0;
  double max_disagreement = 0.0;  // over converged steps
  // Wall clock, filled from the timing rows.
  double max_compute_time = 0.0;
  double mean_compute_time = 0.0;

  bool success() const { return status == "ok"; }
};

struct RolloutOptions {
  bool trace_messages = false;
};

struct RolloutResult {
  MetricsReport metrics;
  std::vector<LogRow> log;
  std::vector<TimingRow> timing;
  std::vector<TraceEntry> trace;
};

/// Closed loop with the configured controller until every agent is within
/// the goal tolerances or max_steps. Collisions (distance below the vehicle
/// length) and solver failures end the run with a failure status.
RolloutResult rollout(const World& world, const RolloutOptions& opts = {});

/// Deterministic metrics from a trajectory log alone (plus the paths and
/// references of `world`). Timing fields stay zero.
MetricsReport compute_metrics(const World& world, const std::vector<LogRow>& log);
void apply_timing(MetricsReport& m, const std::vector<TimingRow>& timing);

struct CompareRow {
  std::string controller;
  int num_agents = 0;
  int runs = 0;
  int successes = 0;
  double mean_path_deviation = 0.0;
  double mean_speed_deviation = 0.0;
  double max_path_deviation = 0.0;
  double mean_max_step_work = 0.0;
  double mean_outer_iterations = 0.0;
  int max_outer_iterations = 0;
  double mean_sync_iterations = 0.0;  // per run
  int non_converged_steps = 0;
  int relaxed_steps = 0;
  double min_distance = 0.0;
  double mean_arrival_step = 0.0;  // over runs that arrived
  int arrivals = 0;
  double max_disagreement = 0.0;
  // Wall clock.
  double mean_max_compute_time = 0.0;
  double max_max_compute_time = 0.0;
  double mean_compute_time = 0.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;  // ordered by agent count, then controller
  std::vector<MetricsReport> runs;
};

/// Runs every (agent count, controller, seed) combination on `base`.
CompareResult compare(const ScenarioConfig& base, const std::vector<int>& agent_counts,
                      const std::vector<std::uint64_t>& seeds,
                      const std::vector<std::string>& controllers = {"cmpc", "scdmpc"});

/// Least-squares slope of log(y) against log(n).
double log_log_slope(const std::vector<double>& n, const std::vector<double>& y);

// CSV writers. Everything except the timing files is a pure function of the
// scenario and therefore byte-identical across runs.
void write_log_csv(std::ostream& os, const std::vector<LogRow>& log);
std::vector<LogRow> read_log_csv(std::istream& is);
void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& timing);
void write_metrics_csv(std::ostream& os, const MetricsReport& m);
void write_compare_csv(std::ostream& os, const CompareResult& r);
void write_compare_timing_csv(std::ostream& os, const CompareResult& r);
/// Long format: series,controller,num_agents,value for the deviation and
/// work series.
void write_plot_data_csv(std::ostream& os, const CompareResult& r);

}  // namespace syncdmpc
