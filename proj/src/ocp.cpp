#include "syncdmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace syncdmpc {

void OcpParams::validate() const {
  if (N_u < 1 || N_u > N_p) throw Error("ocp: require 1 <= N_u <= N_p");
  if ((Q.array() < 0.0).any() || (Q_f.array() < 0.0).any() || (R.array() < 0.0).any()) {
    throw Error("ocp: weights must be nonnegative");
  }
  if (!(d_safe > 0.0)) throw Error("ocp: d_safe must be positive");
  if (!(safety_margin >= 0.0)) throw Error("ocp: safety_margin must be nonnegative");
  if (!(arena_width > 0.0) || !(arena_height > 0.0)) throw Error("ocp: arena must be nonempty");
  if (coupling_objective_weight != 0.0) {
    throw Error("ocp: coupling objective is not supported; weight must be 0");
  }
}

double OcpParams::slack_penalty() const { return 1e4 * Q.maxCoeff(); }

VehicleInput Prediction::input_at(int k) const {
  if (inputs.empty()) throw Error("prediction: no inputs");
  return inputs[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(inputs.size()) - 1))];
}

NominalTrajectory nominal_from(const VehicleState& initial, const Prediction& prediction,
                               int N_p) {
  if (static_cast<int>(prediction.states.size()) != N_p) {
    throw Error("nominal: prediction horizon mismatch");
  }
  NominalTrajectory nom;
  nom.states.reserve(static_cast<std::size_t>(N_p) + 1);
  nom.states.push_back(initial);
  nom.states.insert(nom.states.end(), prediction.states.begin(), prediction.states.end());
  for (int k = 0; k < N_p; ++k) nom.inputs.push_back(prediction.input_at(k));
  return nom;
}

std::vector<CouplingRow> convexify_coupling(const std::vector<Eigen::Vector2d>& p_j,
                                            const std::vector<Eigen::Vector2d>& p_q,
                                            double d_safe) {
  if (p_j.size() != p_q.size()) throw Error("convexify_coupling: sequence length mismatch");
  std::vector<CouplingRow> rows(p_j.size());
  for (std::size_t k = 0; k < p_j.size(); ++k) {
    const Eigen::Vector2d diff = p_j[k] - p_q[k];
    const double norm = diff.norm();
    rows[k].bound = d_safe;
    if (norm > 1e-9) {
      rows[k].normal = diff / norm;
    } else {
      rows[k].degenerate = true;
    }
  }
  return rows;
}

Eigen::Index OcpLayout::member_index(AgentId id) const {
  const auto it = std::lower_bound(members.begin(), members.end(), id);
  if (it == members.end() || *it != id) {
    throw Error("ocp layout: agent " + std::to_string(id) + " is not a member");
  }
  return static_cast<Eigen::Index>(it - members.begin());
}

Eigen::Index OcpLayout::state_index(AgentId id, int k, int component) const {
  return member_index(id) * block_size() + 4 * (k - 1) + component;
}

Eigen::Index OcpLayout::input_index(AgentId id, int k, int component) const {
  return member_index(id) * block_size() + 4 * N_p + 2 * std::min(k, N_u - 1) + component;
}

Eigen::Index OcpLayout::slack_index(std::size_t pair, int k) const {
  return static_cast<Eigen::Index>(members.size()) * block_size() +
         static_cast<Eigen::Index>(pair) * N_p + (k - 1);
}

Eigen::Index OcpLayout::num_variables() const {
  return static_cast<Eigen::Index>(members.size()) * block_size() +
         static_cast<Eigen::Index>(pairs.size()) * N_p;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Accumulates rows of a sparse constraint block.
struct RowBuilder {
  Triplets trips;
  std::vector<double> rhs;

  Eigen::Index add_row(double bound) {
    rhs.push_back(bound);
    return static_cast<Eigen::Index>(rhs.size()) - 1;
  }
  void set(Eigen::Index row, Eigen::Index col, double value) {
    if (value != 0.0) trips.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
  }
  SparseMatrix matrix(Eigen::Index cols) const {
    SparseMatrix m(static_cast<Eigen::Index>(rhs.size()), cols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }
  Eigen::VectorXd vector() const {
    return Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  }
};

void check_member(AgentId id, const OcpMember& m, const OcpParams& p) {
  const auto N_p = static_cast<std::size_t>(p.N_p);
  const std::string who = "ocp: agent " + std::to_string(id);
  if (m.reference.size() != N_p) throw Error(who + " reference horizon mismatch");
  if (m.nominal.states.size() != N_p + 1 || m.nominal.inputs.size() != N_p) {
    throw Error(who + " nominal trajectory horizon mismatch");
  }
}

}  // namespace

Ocp build_ocp(const std::map<AgentId, OcpMember>& data, const std::map<AgentId, double>& weights,
              const std::vector<std::pair<AgentId, AgentId>>& pairs, const VehicleParams& vehicle,
              const OcpParams& params, bool relax_positions) {
  params.validate();
  vehicle.validate();
  Ocp ocp;
  OcpLayout& L = ocp.layout;
  L.N_p = params.N_p;
  L.N_u = params.N_u;
  for (const auto& [id, m] : data) {
    check_member(id, m, params);
    L.members.push_back(id);
  }
  if (L.members.empty()) throw Error("ocp: no members");
  for (auto [a, b] : pairs) {
    if (!data.count(a) || !data.count(b)) {
      throw Error("ocp: coupling pair (" + std::to_string(a) + ", " + std::to_string(b) +
                  ") references missing member data");
    }
    L.pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(L.pairs.begin(), L.pairs.end());
  L.pairs.erase(std::unique(L.pairs.begin(), L.pairs.end()), L.pairs.end());
  for (AgentId id : L.members) {
    const auto it = weights.find(id);
    if (it == weights.end()) throw Error("ocp: missing weight for agent " + std::to_string(id));
    if (!(it->second >= 0.0)) throw Error("ocp: weights must be nonnegative");
    ocp.weights[id] = it->second;
  }

  const Eigen::Index nz = L.num_variables();
  const int N_p = L.N_p;
  const int N_u = L.N_u;
  Triplets hess;
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(nz);
  double offset = 0.0;
  RowBuilder eq;
  RowBuilder in;

  for (AgentId id : L.members) {
    const OcpMember& m = data.at(id);
    const double w = ocp.weights.at(id);

    // Tracking: w ||x(k) - r(k)||^2_Q for k < N_p, Q_f at k = N_p.
    for (int k = 1; k <= N_p; ++k) {
      const Eigen::Vector4d& Qk = k == N_p ? params.Q_f : params.Q;
      const Eigen::Vector4d r = m.reference[static_cast<std::size_t>(k - 1)].vec();
      for (int c = 0; c < 4; ++c) {
        const double q = w * Qk(c);
        if (q == 0.0) continue;
        const Eigen::Index idx = L.state_index(id, k, c);
        hess.emplace_back(static_cast<int>(idx), static_cast<int>(idx), 2.0 * q);
        lin(idx) -= 2.0 * q * r(c);
        offset += q * r(c) * r(c);
      }
    }
    // Input variation: w ||u(k) - u(k-1)||^2_R, u(-1) = previously applied input.
    const Eigen::Vector2d u_prev = m.previous_input.vec();
    for (int k = 0; k < N_u; ++k) {
      for (int c = 0; c < 2; ++c) {
        const double rw = w * params.R(c);
        if (rw == 0.0) continue;
        const auto cur = static_cast<int>(L.input_index(id, k, c));
        hess.emplace_back(cur, cur, 2.0 * rw);
        if (k == 0) {
          lin(cur) -= 2.0 * rw * u_prev(c);
          offset += rw * u_prev(c) * u_prev(c);
        } else {
          const auto prv = static_cast<int>(L.input_index(id, k - 1, c));
          hess.emplace_back(prv, prv, 2.0 * rw);
          hess.emplace_back(cur, prv, -2.0 * rw);
          hess.emplace_back(prv, cur, -2.0 * rw);
        }
      }
    }

    // Dynamics x(k+1) = A_k x(k) + B_k u(k) + c_k around the nominal trajectory.
    for (int k = 0; k < N_p; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Linearization lz = linearize(m.nominal.states[ks], m.nominal.inputs[ks], vehicle);
      Eigen::Vector4d rhs = lz.c;
      if (k == 0) rhs += lz.A * m.initial.vec();
      for (int r = 0; r < 4; ++r) {
        const Eigen::Index row = eq.add_row(rhs(r));
        eq.set(row, L.state_index(id, k + 1, r), 1.0);
        if (k > 0) {
          for (int c = 0; c < 4; ++c) eq.set(row, L.state_index(id, k, c), -lz.A(r, c));
        }
        for (int c = 0; c < 2; ++c) eq.set(row, L.input_index(id, k, c), -lz.B(r, c));
      }
    }

    // State box: arena on positions, speed bounds. Terminal set is the same box.
    for (int k = 1; k <= N_p; ++k) {
      const Eigen::Index ix = L.state_index(id, k, 0);
      const Eigen::Index iy = L.state_index(id, k, 1);
      const Eigen::Index iv = L.state_index(id, k, 3);
      if (!relax_positions) {
        in.set(in.add_row(params.arena_width), ix, 1.0);
        in.set(in.add_row(0.0), ix, -1.0);
        in.set(in.add_row(params.arena_height), iy, 1.0);
        in.set(in.add_row(0.0), iy, -1.0);
      }
      in.set(in.add_row(vehicle.v_max), iv, 1.0);
      in.set(in.add_row(-vehicle.v_min), iv, -1.0);
    }
    // Input and input-variation boxes.
    for (int k = 0; k < N_u; ++k) {
      const Eigen::Index ia = L.input_index(id, k, 0);
      const Eigen::Index id_ = L.input_index(id, k, 1);
      in.set(in.add_row(vehicle.a_max), ia, 1.0);
      in.set(in.add_row(-vehicle.a_min), ia, -1.0);
      in.set(in.add_row(vehicle.delta_max), id_, 1.0);
      in.set(in.add_row(vehicle.delta_max), id_, -1.0);
      const double limits[2] = {vehicle.da_max, vehicle.ddelta_max};
      for (int c = 0; c < 2; ++c) {
        const Eigen::Index cur = L.input_index(id, k, c);
        const double base = k == 0 ? u_prev(c) : 0.0;
        const Eigen::Index up = in.add_row(limits[c] + base);
        const Eigen::Index down = in.add_row(limits[c] - base);
        in.set(up, cur, 1.0);
        in.set(down, cur, -1.0);
        if (k > 0) {
          const Eigen::Index prv = L.input_index(id, k - 1, c);
          in.set(up, prv, -1.0);
          in.set(down, prv, 1.0);
        }
      }
    }
  }

  // Coupling: -n'p_j + n'p_q - s <= -d_safe and -s <= 0 per k. Positions at
  // k = 1 follow from the measured states alone, so that row would only pin
  // constants (and degenerates the QP when it is tight); its slack stays 0.
  const double penalty = params.slack_penalty();
  for (std::size_t p = 0; p < L.pairs.size(); ++p) {
    const auto [j, q] = L.pairs[p];
    std::vector<Eigen::Vector2d> pj;
    std::vector<Eigen::Vector2d> pq;
    for (int k = 1; k <= N_p; ++k) {
      const auto& sj = data.at(j).nominal.states[static_cast<std::size_t>(k)];
      const auto& sq = data.at(q).nominal.states[static_cast<std::size_t>(k)];
      pj.emplace_back(sj.x, sj.y);
      pq.emplace_back(sq.x, sq.y);
    }
    const auto rows = convexify_coupling(pj, pq, params.d_safe + params.safety_margin);
    for (int k = 1; k <= N_p; ++k) {
      const CouplingRow& cr = rows[static_cast<std::size_t>(k - 1)];
      const Eigen::Index s = L.slack_index(p, k);
      lin(s) += penalty;
      if (k == 1) continue;
      if (cr.degenerate) ++ocp.degenerate_rows;
      const Eigen::Index row = in.add_row(-cr.bound);
      for (int c = 0; c < 2; ++c) {
        in.set(row, L.state_index(j, k, c), -cr.normal(c));
        in.set(row, L.state_index(q, k, c), cr.normal(c));
      }
      in.set(row, s, -1.0);
    }
    for (int k = 1; k <= N_p; ++k) in.set(in.add_row(0.0), L.slack_index(p, k), -1.0);
  }

  QuadraticProgram& qp = ocp.qp;
  qp.H.resize(nz, nz);
  qp.H.setFromTriplets(hess.begin(), hess.end());
  qp.h = lin;
  qp.offset = offset;
  qp.E = eq.matrix(nz);
  qp.e = eq.vector();
  qp.G = in.matrix(nz);
  qp.g = in.vector();
  return ocp;
}

Ocp build_local_ocp(const CouplingSubGraph& sub, const std::map<AgentId, OcpMember>& data,
                    const VehicleParams& vehicle, const OcpParams& params, double self_weight,
                    bool relax_positions) {
  std::map<AgentId, OcpMember> members;
  std::map<AgentId, double> weights;
  for (AgentId j : sub.graph.nodes()) {
    const auto it = data.find(j);
    if (it == data.end()) {
      throw Error("ocp: missing data for agent " + std::to_string(j) + " in sub-graph of " +
                  std::to_string(sub.center));
    }
    members.emplace(j, it->second);
    weights[j] = sync_weight(sub.graph, sub.center, j, self_weight);
  }
  return build_ocp(members, weights, sub.graph.edges(), vehicle, params, relax_positions);
}

Ocp build_centralized_ocp(const CouplingGraph& g, const std::map<AgentId, OcpMember>& data,
                          const VehicleParams& vehicle, const OcpParams& params,
                          bool relax_positions) {
  std::map<AgentId, OcpMember> members;
  std::map<AgentId, double> weights;
  for (AgentId j : g.nodes()) {
    const auto it = data.find(j);
    if (it == data.end()) throw Error("ocp: missing data for agent " + std::to_string(j));
    members.emplace(j, it->second);
    weights[j] = 1.0;
  }
  return build_ocp(members, weights, g.edges(), vehicle, params, relax_positions);
}

std::map<AgentId, Prediction> extract(const OcpLayout& layout, const Eigen::VectorXd& z) {
  if (z.size() != layout.num_variables()) throw Error("extract: primal vector size mismatch");
  std::map<AgentId, Prediction> out;
  for (AgentId id : layout.members) {
    Prediction p;
    for (int k = 1; k <= layout.N_p; ++k) {
      const Eigen::Index i = layout.state_index(id, k, 0);
      p.states.push_back({z(i), z(i + 1), z(i + 2), z(i + 3)});
    }
    for (int k = 0; k < layout.N_u; ++k) {
      const Eigen::Index i = layout.input_index(id, k, 0);
      p.inputs.push_back({z(i), z(i + 1)});
    }
    out.emplace(id, std::move(p));
  }
  return out;
}

double max_slack(const OcpLayout& layout, const Eigen::VectorXd& z) {
  double worst = 0.0;
  for (std::size_t p = 0; p < layout.pairs.size(); ++p) {
    for (int k = 1; k <= layout.N_p; ++k) worst = std::max(worst, z(layout.slack_index(p, k)));
  }
  return worst;
}

}  // namespace syncdmpc
