#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "syncdmpc/controller.hpp"
#include "syncdmpc/network.hpp"

namespace syncdmpc {

/// One agent's controller state. Holds references and linearization points
/// for every member of its sub-graph during a time step.
class Agent {
 public:
  Agent(AgentId id, CouplingSubGraph sub, const ControllerConfig& cfg);

  AgentId id() const { return id_; }
  const CouplingSubGraph& subgraph() const { return sub_; }

  /// Resets references to the mission references in `members` and the
  /// linearization points to the previous step's plans advanced one step
  /// (mission reference when no plan exists yet).
  void begin_step(const std::map<AgentId, MemberInfo>& members);

  /// Solves the local problem; the result predicts every sub-graph member
  /// and becomes the candidate. Adds to the step's solve time and work.
  const PredictionBundle& plan();

  /// Candidate <- synchronized states, with inputs fitted inside the input
  /// and rate boxes.
  void set_candidate(const std::map<AgentId, std::vector<VehicleState>>& xbar);

  /// Feasibility of the candidate over the sub-graph.
  FeasibilityReport check_candidate() const;

  /// r_j <- candidate_j on position and speed; linearize around it.
  void adopt_candidate();

  /// Feasibility of `states` (one sequence per sub-graph member) under this
  /// step's initial states and previous inputs.
  FeasibilityReport feasible(const std::map<AgentId, std::vector<VehicleState>>& states) const;

  /// Input to apply: candidate u(0) when converged, own planned u(0)
  /// otherwise. Stores the matching predictions for the next step.
  VehicleInput finish_step(bool converged);

  const std::map<AgentId, Prediction>& candidate() const { return candidate_; }
  const PredictionBundle& bundle() const { return bundle_; }
  AgentStepDiag& diag() { return diag_; }
  const AgentStepDiag& diag() const { return diag_; }

 private:
  AgentId id_;
  CouplingSubGraph sub_;
  ControllerConfig cfg_;
  std::map<AgentId, MemberInfo> info_;
  std::map<AgentId, OcpMember> data_;
  std::map<AgentId, Prediction> previous_plan_;
  PredictionBundle bundle_;
  std::map<AgentId, Prediction> candidate_;
  AgentStepDiag diag_;
};

/// Per-agent states of a bundle, keyed by target.
std::map<AgentId, std::vector<VehicleState>> bundle_states(const PredictionBundle& b);

/// Local consistency test: own values against every received copy of the
/// same target.
bool locally_consistent(const std::map<AgentId, std::vector<VehicleState>>& own,
                        const SyncInbox& received, const SyncConfig& cfg);

/// Distributed controller: every agent plans its sub-graph, predictions are
/// exchanged and synchronized when inconsistent. A component stops once its
/// consistent predictions are feasible; otherwise they become the references
/// of the next plan, up to the outer limit. All interaction goes through the
/// message bus.
class ScdmpcController : public Controller {
 public:
  ScdmpcController(const CouplingGraph& graph, ControllerConfig cfg);

  std::string name() const override { return "scdmpc"; }
  StepOutcome step(const std::map<AgentId, MemberInfo>& members) override;

  MessageBus& bus() { return bus_; }
  const Agent& agent(AgentId id) const { return agents_.at(id); }
  const ControllerConfig& config() const { return cfg_; }

 private:
  /// Sync rounds for `group` (agents whose consistency vote failed). Sets
  /// each member's candidate; returns the agents left without consensus.
  std::set<AgentId> synchronize_group(const std::vector<AgentId>& group,
                                      std::map<AgentId, SyncInbox> inbox);

  CouplingGraph graph_;
  ControllerConfig cfg_;
  MessageBus bus_;
  std::map<AgentId, Agent> agents_;
};

}  // namespace syncdmpc
