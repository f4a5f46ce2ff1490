#include "syncdmpc/centralized.hpp"

#include <chrono>

namespace syncdmpc {

CentralizedController::CentralizedController(const CouplingGraph& graph, ControllerConfig cfg)
    : graph_(graph), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (graph_.empty()) throw Error("cmpc: empty coupling graph");
}

StepOutcome CentralizedController::step(const std::map<AgentId, MemberInfo>& members) {
  std::map<AgentId, OcpMember> data;
  std::map<AgentId, VehicleState> initial;
  std::map<AgentId, VehicleInput> previous;
  for (AgentId i : graph_.nodes()) {
    const auto it = members.find(i);
    if (it == members.end()) throw Error("cmpc: missing data for agent " + std::to_string(i));
    const MemberInfo& m = it->second;
    const auto prev = previous_plan_.find(i);
    const Prediction lin = prev != previous_plan_.end() ? shift_prediction(prev->second, cfg_.vehicle)
                                                        : as_prediction(m.state, m.reference, cfg_.vehicle);
    data[i] = OcpMember{m.state, m.previous_input, m.reference, nominal_from(m.state, lin, cfg_.ocp.N_p)};
    initial[i] = m.state;
    previous[i] = m.previous_input;
  }

  StepOutcome out;
  std::map<AgentId, Prediction> plan;
  bool relaxed = false;
  double slack = 0.0;
  out.converged = false;
  const auto t0 = std::chrono::steady_clock::now();
  for (int iter = 1; iter <= cfg_.max_outer_iterations; ++iter) {
    auto res = solve_with_fallback(
        [&](bool relax) { return build_centralized_ocp(graph_, data, cfg_.vehicle, cfg_.ocp, relax); },
        cfg_.qp);
    plan = extract(res.ocp.layout, res.solution.z);
    relaxed = relaxed || res.relaxed;
    slack = max_slack(res.ocp.layout, res.solution.z);
    out.work += res.work;
    out.outer_iterations = iter;
    std::map<AgentId, std::vector<VehicleState>> states;
    std::map<AgentId, NominalTrajectory> nominal;
    for (const auto& [i, p] : plan) {
      states[i] = p.states;
      nominal[i] = data.at(i).nominal;
    }
    if (check_feasibility(initial, states, graph_.edges(), cfg_, previous, nominal).feasible) {
      out.converged = true;
      break;
    }
    for (auto& [i, d] : data) d.nominal = nominal_from(d.initial, plan.at(i), cfg_.ocp.N_p);
  }
  previous_plan_ = plan;
  out.compute_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& [i, p] : plan) {
    AgentStepDiag d;
    d.input = p.inputs.front();
    d.outer_iterations = out.outer_iterations;
    d.converged = out.converged;
    d.relaxed = relaxed;
    d.solve_time = out.compute_time;
    d.work = out.work;
    d.max_slack = slack;
    d.plan = p;
    out.agents[i] = d;
  }
  return out;
}

}  // namespace syncdmpc
