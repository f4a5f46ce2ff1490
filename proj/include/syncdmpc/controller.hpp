#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "syncdmpc/ocp.hpp"
#include "syncdmpc/qp.hpp"
#include "syncdmpc/sync.hpp"
#include "syncdmpc/vehicle_model.hpp"

namespace syncdmpc {

/// Settings shared by the distributed and centralized controllers.
struct ControllerConfig {
  VehicleParams vehicle;
  OcpParams ocp;
  SyncConfig sync;
  QpSettings qp;
  int max_outer_iterations = 10;
  double eps_feas = 1e-3;  // [m] on distances; also bounds the dynamics residual

  void validate() const;
};

/// Inputs that reproduce consecutive states under the model as closely as the
/// input box allows: acceleration from the speed change, steering from the
/// heading change. Returns one input per transition. With `previous`, each
/// input also stays within the rate limits of its predecessor.
std::vector<VehicleInput> fit_inputs(const VehicleState& initial, const std::vector<VehicleState>& states,
                                     const VehicleParams& vehicle,
                                     const std::optional<VehicleInput>& previous = std::nullopt);

struct InputFit {
  std::vector<VehicleInput> inputs;
  double residual = 0.0;  // worst |state mismatch| under the linearized model
};

/// Bounded inputs that reproduce consecutive states under the model linearized
/// along `nominal`: per step, the least-squares input correction around the
/// nominal input, clipped to the box and the rate window of its predecessor.
InputFit fit_inputs(const VehicleState& initial, const std::vector<VehicleState>& states,
                    const NominalTrajectory& nominal, const VehicleParams& vehicle,
                    const std::optional<VehicleInput>& previous = std::nullopt);

/// Prediction along `states` with fitted inputs.
Prediction as_prediction(const VehicleState& initial, const std::vector<VehicleState>& states,
                         const VehicleParams& vehicle,
                         const std::optional<VehicleInput>& previous = std::nullopt);

/// Previous-step prediction advanced one step: drop the first entry and extend
/// the tail by simulating the held last input.
Prediction shift_prediction(const Prediction& p, const VehicleParams& vehicle);

struct FeasibilityReport {
  bool feasible = true;
  double dynamics_residual = 0.0;  // worst |state mismatch| after the best bounded input
  double box_violation = 0.0;      // worst excursion outside the speed and arena boxes
  double min_distance = 0.0;       // smallest pairwise distance over the horizon (inf without pairs)
};

/// Checks state sequences k = 1..N_p that start from `initial` for dynamic
/// reachability, state boxes and true pairwise distance on `pairs`.
/// Reachability is judged under the linearization along `nominal`; members
/// without one are linearized along their own sequence. Members listed in
/// `previous` also respect the input rate limits.
FeasibilityReport check_feasibility(const std::map<AgentId, VehicleState>& initial,
                                    const std::map<AgentId, std::vector<VehicleState>>& states,
                                    const std::vector<std::pair<AgentId, AgentId>>& pairs,
                                    const ControllerConfig& cfg,
                                    const std::map<AgentId, VehicleInput>& previous = {},
                                    const std::map<AgentId, NominalTrajectory>& nominal = {});

/// Everything known about one agent at the start of a time step.
struct MemberInfo {
  VehicleState state;
  VehicleInput previous_input;
  std::vector<VehicleState> reference;  // mission reference k = 1..N_p
};

struct AgentStepDiag {
  VehicleInput input;
  int outer_iterations = 0;
  int sync_iterations = 0;
  bool converged = true;
  bool relaxed = false;       // some solve dropped the arena box rows
  double solve_time = 0.0;    // [s] wall clock, own QP solves
  double sync_time = 0.0;     // [s] wall clock, own sync updates and checks
  double work = 0.0;          // factorization work of own solves
  double max_slack = 0.0;     // largest coupling slack in the final plan
  Prediction plan;            // own final self-prediction
};

struct StepOutcome {
  std::map<AgentId, AgentStepDiag> agents;
  int outer_iterations = 0;
  int sync_iterations = 0;
  bool converged = true;
  double disagreement = 0.0;  // final scaled plan disagreement (<= 1 is consistent)
  double compute_time = 0.0;  // [s] per-step computation as deployed
  double work = 0.0;          // deterministic counterpart of compute_time
  long messages = 0;
  long bytes = 0;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// One receding-horizon step for every agent in `members`.
  virtual StepOutcome step(const std::map<AgentId, MemberInfo>& members) = 0;
};

/// Solves an OCP, retrying with the arena rows dropped when the hard problem
/// is not solved. Throws when the relaxed problem fails too.
struct OcpSolve {
  Ocp ocp;
  QpSolution solution;
  bool relaxed = false;
  double work = 0.0;
};

template <class Builder>
OcpSolve solve_with_fallback(Builder&& build, const QpSettings& settings) {
  OcpSolve out;
  out.ocp = build(false);
  out.solution = solve(out.ocp.qp, settings);
  out.work = out.solution.work;
  if (!out.solution.optimal()) {
    out.relaxed = true;
    out.ocp = build(true);
    out.solution = solve(out.ocp.qp, settings);
    out.work += out.solution.work;
    if (!out.solution.optimal()) {
      throw Error("controller: relaxed problem not solved (" + to_string(out.solution.status) + ")");
    }
  }
  return out;
}

}  // namespace syncdmpc
