#pragma once

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "syncdmpc/coupling_graph.hpp"
#include "syncdmpc/qp.hpp"
#include "syncdmpc/vehicle_model.hpp"

namespace syncdmpc {

/// Horizons, tracking weights, safety distance and arena box.
/// Weight vectors are diagonals over (x, y, psi, v) and (a, delta).
struct OcpParams {
  int N_p = 10;
  int N_u = 5;
  Eigen::Vector4d Q{10.0, 10.0, 0.0, 1.0};
  /// Terminal heading weight lets agents meet the goal heading tolerance.
  Eigen::Vector4d Q_f{10.0, 10.0, 5.0, 1.0};
  Eigen::Vector2d R{0.1, 1.0};
  double d_safe = 0.35;        // [m]
  /// Added to d_safe in the planning rows only, so averages of plans that
  /// each keep d_safe + margin still clear d_safe.
  double safety_margin = 0.01;  // [m]
  double arena_width = 4.0;    // [m], positions live in [0, width] x [0, height]
  double arena_height = 4.0;   // [m]
  /// Weight of the inter-agent coupling objective. Only 0 is supported; the
  /// field keeps the term addressable.
  double coupling_objective_weight = 0.0;

  void validate() const;
  /// Linear cost per metre of coupling-constraint slack.
  double slack_penalty() const;
};

/// Predicted states k = 1..N_p and free inputs k = 0..N_u-1 of one agent.
struct Prediction {
  std::vector<VehicleState> states;
  std::vector<VehicleInput> inputs;

  /// Input applied at step k; held at the last free input past N_u.
  VehicleInput input_at(int k) const;
};

/// Linearization point: states k = 0..N_p (entry 0 is the measured state) and
/// inputs k = 0..N_p-1.
struct NominalTrajectory {
  std::vector<VehicleState> states;
  std::vector<VehicleInput> inputs;
};

/// Nominal trajectory that follows `prediction` from `initial`.
NominalTrajectory nominal_from(const VehicleState& initial, const Prediction& prediction, int N_p);

/// Per-member data of one optimal control problem.
struct OcpMember {
  VehicleState initial;
  VehicleInput previous_input;           // reference for the input variation at k = 0
  std::vector<VehicleState> reference;   // r(k), k = 1..N_p
  NominalTrajectory nominal;
};

/// One linearized safety-distance row: n'(p_j - p_q) >= bound at step k.
struct CouplingRow {
  Eigen::Vector2d normal = Eigen::Vector2d::UnitX();
  double bound = 0.0;
  bool degenerate = false;  // coincident nominal positions; normal fell back to +x
};

/// Inner approximation of ||p_j - p_q|| >= d_safe around nominal positions.
std::vector<CouplingRow> convexify_coupling(const std::vector<Eigen::Vector2d>& p_j,
                                            const std::vector<Eigen::Vector2d>& p_q,
                                            double d_safe);

/// Variable ordering. Each member owns a block [states k=1..N_p | inputs
/// k=0..N_u-1]; blocks follow ascending member id. Coupling slacks come last,
/// N_p per pair.
struct OcpLayout {
  std::vector<AgentId> members;
  std::vector<std::pair<AgentId, AgentId>> pairs;
  int N_p = 0;
  int N_u = 0;

  Eigen::Index block_size() const { return 4 * N_p + 2 * N_u; }
  Eigen::Index member_index(AgentId id) const;
  Eigen::Index state_index(AgentId id, int k, int component) const;
  Eigen::Index input_index(AgentId id, int k, int component) const;
  Eigen::Index slack_index(std::size_t pair, int k) const;
  Eigen::Index num_variables() const;
};

struct Ocp {
  OcpLayout layout;
  QuadraticProgram qp;
  std::map<AgentId, double> weights;
  int degenerate_rows = 0;
};

/// Generic builder: members in `data`, cost weights per member, coupling
/// constraints for every listed pair. With `relax_positions` the arena box
/// rows are dropped (fallback when the hard problem is infeasible).
Ocp build_ocp(const std::map<AgentId, OcpMember>& data, const std::map<AgentId, double>& weights,
              const std::vector<std::pair<AgentId, AgentId>>& pairs, const VehicleParams& vehicle,
              const OcpParams& params, bool relax_positions = false);

/// Local problem of the sub-graph center: members V_i, pairs E_i, weights
/// w_{i->j} (edge weight, self weight for the center).
Ocp build_local_ocp(const CouplingSubGraph& sub, const std::map<AgentId, OcpMember>& data,
                    const VehicleParams& vehicle, const OcpParams& params,
                    double self_weight = 1.0, bool relax_positions = false);

/// Joint problem over all agents and edges with unit weights.
Ocp build_centralized_ocp(const CouplingGraph& g, const std::map<AgentId, OcpMember>& data,
                          const VehicleParams& vehicle, const OcpParams& params,
                          bool relax_positions = false);

/// Per-member predictions from a primal vector.
std::map<AgentId, Prediction> extract(const OcpLayout& layout, const Eigen::VectorXd& z);

/// Largest coupling slack in a primal vector (0 without pairs).
double max_slack(const OcpLayout& layout, const Eigen::VectorXd& z);

}  // namespace syncdmpc
