#pragma once

#include <map>
#include <string>

#include "syncdmpc/controller.hpp"

namespace syncdmpc {

/// Centralized baseline: one joint problem over every agent and coupling
/// edge, unit weights. Re-linearizes around its own solution while the plan
/// fails the feasibility check, up to the outer iteration limit.
class CentralizedController : public Controller {
 public:
  CentralizedController(const CouplingGraph& graph, ControllerConfig cfg);

  std::string name() const override { return "cmpc"; }
  StepOutcome step(const std::map<AgentId, MemberInfo>& members) override;

  const ControllerConfig& config() const { return cfg_; }

 private:
  CouplingGraph graph_;
  ControllerConfig cfg_;
  std::map<AgentId, Prediction> previous_plan_;
};

}  // namespace syncdmpc
