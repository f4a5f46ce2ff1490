#include "syncdmpc/agent.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "syncdmpc/parallel.hpp"

namespace syncdmpc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Agent::Agent(AgentId id, CouplingSubGraph sub, const ControllerConfig& cfg)
    : id_(id), sub_(std::move(sub)), cfg_(cfg) {
  if (sub_.center != id_) throw Error("agent " + std::to_string(id_) + ": sub-graph center mismatch");
}

void Agent::begin_step(const std::map<AgentId, MemberInfo>& members) {
  info_.clear();
  data_.clear();
  diag_ = AgentStepDiag{};
  const int N_p = cfg_.ocp.N_p;
  for (AgentId j : sub_.graph.nodes()) {
    const auto it = members.find(j);
    if (it == members.end()) {
      throw Error("agent " + std::to_string(id_) + ": no measured state from agent " + std::to_string(j));
    }
    const MemberInfo& m = it->second;
    info_[j] = m;
    OcpMember d;
    d.initial = m.state;
    d.previous_input = m.previous_input;
    d.reference = m.reference;
    const auto prev = previous_plan_.find(j);
    const Prediction lin = prev != previous_plan_.end()
                               ? shift_prediction(prev->second, cfg_.vehicle)
                               : as_prediction(m.state, m.reference, cfg_.vehicle);
    d.nominal = nominal_from(m.state, lin, N_p);
    data_[j] = std::move(d);
  }
}

const PredictionBundle& Agent::plan() {
  const auto t0 = Clock::now();
  auto res = solve_with_fallback(
      [&](bool relax) {
        return build_local_ocp(sub_, data_, cfg_.vehicle, cfg_.ocp, cfg_.sync.self_weight, relax);
      },
      cfg_.qp);
  bundle_.owner = id_;
  bundle_.targets = extract(res.ocp.layout, res.solution.z);
  candidate_ = bundle_.targets;
  diag_.relaxed = diag_.relaxed || res.relaxed;
  diag_.work += res.work;
  diag_.max_slack = max_slack(res.ocp.layout, res.solution.z);
  diag_.solve_time += seconds_since(t0);
  return bundle_;
}

void Agent::set_candidate(const std::map<AgentId, std::vector<VehicleState>>& xbar) {
  candidate_.clear();
  for (const auto& [j, d] : data_) {
    const auto& states = xbar.at(j);
    candidate_[j] = {states, fit_inputs(d.initial, states, d.nominal, cfg_.vehicle, d.previous_input).inputs};
  }
}

FeasibilityReport Agent::check_candidate() const {
  std::map<AgentId, std::vector<VehicleState>> states;
  for (const auto& [j, p] : candidate_) states[j] = p.states;
  return feasible(states);
}

void Agent::adopt_candidate() {
  for (auto& [j, d] : data_) {
    const Prediction& c = candidate_.at(j);
    auto ref = info_.at(j).reference;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      ref[k].x = c.states[k].x;
      ref[k].y = c.states[k].y;
      ref[k].v = c.states[k].v;
    }
    d.reference = std::move(ref);
    d.nominal = nominal_from(d.initial, c, cfg_.ocp.N_p);
  }
}

FeasibilityReport Agent::feasible(const std::map<AgentId, std::vector<VehicleState>>& states) const {
  std::map<AgentId, VehicleState> initial;
  std::map<AgentId, VehicleInput> previous;
  std::map<AgentId, NominalTrajectory> nominal;
  for (const auto& [j, d] : data_) {
    initial[j] = d.initial;
    previous[j] = d.previous_input;
    nominal[j] = d.nominal;
  }
  return check_feasibility(initial, states, sub_.graph.edges(), cfg_, previous, nominal);
}

VehicleInput Agent::finish_step(bool converged) {
  previous_plan_ = converged ? candidate_ : bundle_.targets;
  diag_.plan = previous_plan_.at(id_);
  diag_.input = diag_.plan.inputs.front();
  diag_.converged = converged;
  return diag_.input;
}

std::map<AgentId, std::vector<VehicleState>> bundle_states(const PredictionBundle& b) {
  std::map<AgentId, std::vector<VehicleState>> out;
  for (const auto& [j, p] : b.targets) out[j] = p.states;
  return out;
}

bool locally_consistent(const std::map<AgentId, std::vector<VehicleState>>& own,
                        const SyncInbox& received, const SyncConfig& cfg) {
  const Eigen::Vector4d tol = cfg.tolerance();
  for (const auto& [j, mine] : own) {
    // Spread over all copies seen; pairwise gaps are bounded by it.
    for (std::size_t k = 0; k < mine.size(); ++k) {
      Eigen::Vector4d lo = mine[k].vec(), hi = lo;
      for (const auto& [q, values] : received) {
        const auto it = values.find(j);
        if (it == values.end()) continue;
        lo = lo.cwiseMin(it->second.at(k).vec());
        hi = hi.cwiseMax(it->second.at(k).vec());
      }
      if (((hi - lo).array() > tol.array()).any()) return false;
    }
  }
  return true;
}

ScdmpcController::ScdmpcController(const CouplingGraph& graph, ControllerConfig cfg)
    : graph_(graph), cfg_(std::move(cfg)), bus_(graph) {
  cfg_.validate();
  if (graph_.empty()) throw Error("scdmpc: empty coupling graph");
  for (AgentId i : graph_.nodes()) agents_.emplace(i, Agent(i, subgraph(graph_, i), cfg_));
}

std::set<AgentId> ScdmpcController::synchronize_group(const std::vector<AgentId>& group,
                                                     std::map<AgentId, SyncInbox> inbox) {
  std::map<AgentId, std::map<AgentId, std::vector<VehicleState>>> values;
  for (AgentId i : group) values[i] = bundle_states(agents_.at(i).bundle());
  std::set<AgentId> syncing(group.begin(), group.end());
  for (int round = 0; round < cfg_.sync.max_iterations && !syncing.empty(); ++round) {
    for (AgentId i : syncing) {
      auto& a = agents_.at(i);
      const auto t0 = Clock::now();
      PredictionBundle own;
      own.owner = i;
      for (const auto& [j, seq] : values[i]) own.targets[j].states = seq;
      values[i] = sync_update(own, inbox[i], graph_, cfg_.sync.self_weight);
      a.diag().sync_time += seconds_since(t0);
      ++a.diag().sync_iterations;
    }
    std::vector<Message> pending;
    for (AgentId i : syncing) {
      for (AgentId q : graph_.neighbors(i)) {
        if (syncing.count(q)) pending.push_back({i, q, MessageKind::SyncValue, SyncValuePayload{values[i]}});
      }
    }
    auto delivered = bus_.run_round(std::move(pending));
    std::map<AgentId, bool> flags;
    for (AgentId i : syncing) {
      inbox[i].clear();
      for (auto& m : delivered[i]) inbox[i][m.sender] = std::get<SyncValuePayload>(m.payload).values;
      const auto t0 = Clock::now();
      flags[i] = locally_consistent(values[i], inbox[i], cfg_.sync);
      agents_.at(i).diag().sync_time += seconds_since(t0);
    }
    for (const auto& [i, ok] : flood_vote(bus_, flags, MessageKind::ConsistencyVote)) {
      if (ok) syncing.erase(i);
    }
  }
  for (AgentId i : group) agents_.at(i).set_candidate(values[i]);
  return syncing;
}

StepOutcome ScdmpcController::step(const std::map<AgentId, MemberInfo>& members) {
  const std::size_t msg0 = bus_.messages();
  const std::size_t bytes0 = bus_.bytes();

  std::vector<Message> pending;
  for (AgentId i : graph_.nodes()) {
    const auto it = members.find(i);
    if (it == members.end()) throw Error("scdmpc: missing data for agent " + std::to_string(i));
    for (AgentId q : graph_.neighbors(i)) {
      const auto& m = it->second;
      pending.push_back({i, q, MessageKind::MeasuredState,
                         MeasuredStatePayload{m.state, m.previous_input, m.reference}});
    }
  }
  auto delivered = bus_.run_round(std::move(pending));
  for (auto& [i, a] : agents_) {
    std::map<AgentId, MemberInfo> known{{i, members.at(i)}};
    for (const auto& m : delivered[i]) {
      const auto& p = std::get<MeasuredStatePayload>(m.payload);
      known[m.sender] = MemberInfo{p.state, p.previous_input, p.reference};
    }
    a.begin_step(known);
  }

  std::set<AgentId> active;
  for (const auto& [i, a] : agents_) active.insert(i);
  for (int iter = 1; iter <= cfg_.max_outer_iterations && !active.empty(); ++iter) {
    const std::vector<AgentId> act(active.begin(), active.end());
    parallel_for(act.size(), [&](std::size_t k) { agents_.at(act[k]).plan(); });

    pending.clear();
    for (AgentId i : act) {
      agents_.at(i).diag().outer_iterations = iter;
      for (AgentId q : graph_.neighbors(i)) {
        if (active.count(q)) pending.push_back({i, q, MessageKind::PredictionBundle, agents_.at(i).bundle()});
      }
    }
    delivered = bus_.run_round(std::move(pending));
    std::map<AgentId, SyncInbox> inbox;
    std::map<AgentId, bool> flags;
    for (AgentId i : act) {
      for (const auto& m : delivered[i]) {
        inbox[i][m.sender] = bundle_states(std::get<PredictionBundle>(m.payload));
      }
      const auto t0 = Clock::now();
      flags[i] = locally_consistent(bundle_states(agents_.at(i).bundle()), inbox[i], cfg_.sync);
      agents_.at(i).diag().sync_time += seconds_since(t0);
    }
    std::vector<AgentId> inconsistent;
    for (const auto& [i, ok] : flood_vote(bus_, flags, MessageKind::ConsistencyVote)) {
      if (!ok) inconsistent.push_back(i);
    }
    std::set<AgentId> unsynchronized;
    if (!inconsistent.empty()) {
      std::map<AgentId, SyncInbox> group_inbox;
      for (AgentId i : inconsistent) group_inbox[i] = std::move(inbox[i]);
      unsynchronized = synchronize_group(inconsistent, std::move(group_inbox));
    }
    std::map<AgentId, bool> feasible_flags;
    for (AgentId i : act) {
      auto& a = agents_.at(i);
      const auto t0 = Clock::now();
      feasible_flags[i] = unsynchronized.count(i) == 0 && a.check_candidate().feasible;
      a.diag().sync_time += seconds_since(t0);
    }
    for (const auto& [i, ok] : flood_vote(bus_, feasible_flags, MessageKind::FeasibilityVote)) {
      if (ok) {
        active.erase(i);
      } else {
        agents_.at(i).adopt_candidate();
      }
    }
  }

  StepOutcome out;
  Bundles finals;
  for (auto& [i, a] : agents_) {
    const bool converged = active.count(i) == 0;
    a.finish_step(converged);
    auto& d = a.diag();
    out.agents[i] = d;
    out.outer_iterations = std::max(out.outer_iterations, d.outer_iterations);
    out.sync_iterations = std::max(out.sync_iterations, d.sync_iterations);
    out.converged = out.converged && d.converged;
    out.compute_time = std::max(out.compute_time, d.solve_time + d.sync_time);
    out.work = std::max(out.work, d.work);
    finals[i].owner = i;
    finals[i].targets = converged ? a.candidate() : a.bundle().targets;
  }
  out.disagreement = scaled_disagreement(finals, cfg_.sync);
  out.messages = static_cast<long>(bus_.messages() - msg0);
  out.bytes = static_cast<long>(bus_.bytes() - bytes0);
  return out;
}

}  // namespace syncdmpc
