#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "syncdmpc/coupling_graph.hpp"
#include "syncdmpc/ocp.hpp"

namespace syncdmpc {

/// Everything one agent predicts: its plan for each member of its sub-graph.
struct PredictionBundle {
  AgentId owner = 0;
  std::map<AgentId, Prediction> targets;
};

/// All agents' bundles keyed by owner.
using Bundles = std::map<AgentId, PredictionBundle>;

struct SyncConfig {
  double eps_position = 1e-4;  // [m]
  double eps_heading = 1e-3;   // [rad]
  double eps_speed = 1e-4;     // [m/s]
  int max_iterations = 500;
  double self_weight = 1.0;
  /// Reject inputs whose averaging support lacks a spanning tree up front.
  bool check_precondition = true;

  void validate() const;
  Eigen::Vector4d tolerance() const { return {eps_position, eps_position, eps_heading, eps_speed}; }
};

/// Owners holding a prediction of `target`, ascending.
std::vector<AgentId> predictors(const Bundles& bundles, AgentId target);

/// Largest |x_{q->j}(k) - x_{q'->j}(k)| per state component over all predictor
/// pairs and steps.
Eigen::Vector4d max_disagreement(const Bundles& bundles, AgentId target);

/// Largest disagreement over all targets, measured in units of the tolerance
/// of each component; consistent iff <= 1.
double scaled_disagreement(const Bundles& bundles, const SyncConfig& cfg);

bool consistent(const Bundles& bundles, const SyncConfig& cfg);

/// States received by one agent in a sync round: sender -> target -> states.
using SyncInbox = std::map<AgentId, std::map<AgentId, std::vector<VehicleState>>>;

/// One agent's averaging update. For each target j it holds, the new value is
/// the normalized 1/w_{q->j} combination over itself and the senders in
/// `inbox` that predict j.
std::map<AgentId, std::vector<VehicleState>> sync_update(const PredictionBundle& own,
                                                         const SyncInbox& inbox,
                                                         const CouplingGraph& graph,
                                                         double self_weight);

/// One synchronous round: every agent averages the previous round's values of
/// the agents it hears (its closed neighborhood). Inputs are left untouched.
Bundles sync_step(const Bundles& bundles, const CouplingGraph& graph, double self_weight = 1.0);

/// Averaging matrix for `target` under the bundle structure.
SyncMatrix bundle_sync_matrix(const Bundles& bundles, const CouplingGraph& graph,
                              AgentId target, double self_weight = 1.0);

struct SyncResult {
  Bundles bundles;                                      // synchronized
  std::map<AgentId, std::vector<VehicleState>> states;  // consensus per target
  int iterations = 0;
};

/// Repeats sync_step until consistent. Throws when the spanning-tree
/// precondition fails for a target (if checked) or the iteration limit is hit.
SyncResult synchronize(const Bundles& bundles, const CouplingGraph& graph, const SyncConfig& cfg);

}  // namespace syncdmpc
