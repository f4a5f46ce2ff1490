#include "syncdmpc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace syncdmpc {

void ControllerConfig::validate() const {
  vehicle.validate();
  ocp.validate();
  sync.validate();
  if (max_outer_iterations < 1) throw Error("controller: max_outer_iterations must be >= 1");
  if (!(eps_feas > 0.0)) throw Error("controller: eps_feas must be positive");
}

std::vector<VehicleInput> fit_inputs(const VehicleState& initial, const std::vector<VehicleState>& states,
                                     const VehicleParams& p, const std::optional<VehicleInput>& previous) {
  const std::size_t n = states.size();
  // Steering has no effect at rest; such steps take the next demanded angle so
  // the rate limit does not hold back a later turn.
  std::vector<std::optional<double>> demand(n);
  VehicleState prev = initial;
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(prev.v) > 1e-6) {
      demand[k] = std::atan((states[k].psi - prev.psi) * p.wheelbase / (p.dt * prev.v));
    }
    prev = states[k];
  }
  std::optional<double> next;
  for (std::size_t k = n; k-- > 0;) {
    if (demand[k]) next = demand[k];
    else demand[k] = next;
  }
  // Box intersected with the rate window around the preceding input.
  auto bounded = [](double value, double lo, double hi, std::optional<double> centre, double rate) {
    if (centre) {
      const double l = std::max(lo, *centre - rate);
      const double h = std::min(hi, *centre + rate);
      if (l <= h) return std::clamp(value, l, h);
    }
    return std::clamp(value, lo, hi);
  };
  std::vector<VehicleInput> out;
  out.reserve(n);
  std::optional<VehicleInput> last = previous;
  prev = initial;
  for (std::size_t k = 0; k < n; ++k) {
    VehicleInput u;
    u.a = bounded((states[k].v - prev.v) / p.dt, p.a_min, p.a_max,
                  last ? std::optional<double>(last->a) : std::nullopt, p.da_max);
    u.delta = bounded(demand[k].value_or(last ? last->delta : 0.0), -p.delta_max, p.delta_max,
                      last ? std::optional<double>(last->delta) : std::nullopt, p.ddelta_max);
    out.push_back(u);
    last = u;
    prev = states[k];
  }
  return out;
}

InputFit fit_inputs(const VehicleState& initial, const std::vector<VehicleState>& states,
                    const NominalTrajectory& nominal, const VehicleParams& p,
                    const std::optional<VehicleInput>& previous) {
  if (nominal.states.size() < states.size() || nominal.inputs.size() < states.size()) {
    throw Error("fit_inputs: nominal shorter than the state sequence");
  }
  InputFit fit;
  fit.inputs.reserve(states.size());
  std::optional<VehicleInput> last = previous;
  Eigen::Vector4d prev = initial.vec();
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Linearization lin = linearize(nominal.states[k], nominal.inputs[k], p);
    const Eigen::Vector2d un(nominal.inputs[k].a, nominal.inputs[k].delta);
    const Eigen::Vector4d target = states[k].vec() - lin.apply(prev, un);
    // Minimum-norm correction keeps the nominal steering where it has no effect.
    const Eigen::Vector2d du = lin.B.completeOrthogonalDecomposition().solve(target);
    Eigen::Vector2d lo(p.a_min, -p.delta_max), hi(p.a_max, p.delta_max);
    if (last) {
      lo = lo.cwiseMax(Eigen::Vector2d(last->a - p.da_max, last->delta - p.ddelta_max));
      hi = hi.cwiseMin(Eigen::Vector2d(last->a + p.da_max, last->delta + p.ddelta_max));
      hi = hi.cwiseMax(lo);
    }
    const Eigen::Vector2d u = (un + du).cwiseMax(lo).cwiseMin(hi);
    fit.residual = std::max(fit.residual, (lin.apply(prev, u) - states[k].vec()).cwiseAbs().maxCoeff());
    fit.inputs.push_back({u(0), u(1)});
    last = fit.inputs.back();
    prev = states[k].vec();
  }
  return fit;
}

Prediction as_prediction(const VehicleState& initial, const std::vector<VehicleState>& states,
                         const VehicleParams& vehicle, const std::optional<VehicleInput>& previous) {
  return {states, fit_inputs(initial, states, vehicle, previous)};
}

Prediction shift_prediction(const Prediction& p, const VehicleParams& vehicle) {
  if (p.states.empty() || p.inputs.empty()) throw Error("shift_prediction: empty prediction");
  Prediction out;
  out.states.assign(p.states.begin() + 1, p.states.end());
  out.inputs.assign(p.inputs.begin() + (p.inputs.size() > 1 ? 1 : 0), p.inputs.end());
  out.states.push_back(step(p.states.back(), out.inputs.back(), vehicle));
  return out;
}

FeasibilityReport check_feasibility(const std::map<AgentId, VehicleState>& initial,
                                    const std::map<AgentId, std::vector<VehicleState>>& states,
                                    const std::vector<std::pair<AgentId, AgentId>>& pairs,
                                    const ControllerConfig& cfg,
                                    const std::map<AgentId, VehicleInput>& previous,
                                    const std::map<AgentId, NominalTrajectory>& nominal) {
  const auto& p = cfg.vehicle;
  FeasibilityReport r;
  r.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& [id, seq] : states) {
    VehicleState prev = initial.at(id);
    const auto last = previous.find(id);
    const std::optional<VehicleInput> before =
        last == previous.end() ? std::nullopt : std::optional(last->second);
    const auto nom = nominal.find(id);
    const InputFit fit =
        fit_inputs(prev, seq,
                   nom != nominal.end() ? nom->second
                                        : nominal_from(prev, as_prediction(prev, seq, p, before),
                                                       static_cast<int>(seq.size())),
                   p, before);
    r.dynamics_residual = std::max(r.dynamics_residual, fit.residual);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto& s = seq[k];
      r.box_violation = std::max({r.box_violation, p.v_min - s.v, s.v - p.v_max, -s.x,
                                  s.x - cfg.ocp.arena_width, -s.y, s.y - cfg.ocp.arena_height});
      prev = s;
    }
  }
  for (const auto& [a, b] : pairs) {
    const auto& sa = states.at(a);
    const auto& sb = states.at(b);
    for (std::size_t k = 0; k < sa.size(); ++k) {
      r.min_distance = std::min(r.min_distance, std::hypot(sa[k].x - sb[k].x, sa[k].y - sb[k].y));
    }
  }
  r.feasible = r.dynamics_residual <= cfg.eps_feas && r.box_violation <= cfg.eps_feas &&
               r.min_distance >= cfg.ocp.d_safe - cfg.eps_feas;
  return r;
}

}  // namespace syncdmpc
