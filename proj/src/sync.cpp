#include "syncdmpc/sync.hpp"

#include <algorithm>
#include <sstream>
#include <string>

namespace syncdmpc {

void SyncConfig::validate() const {
  if (!(eps_position > 0.0) || !(eps_heading > 0.0) || !(eps_speed > 0.0)) {
    throw Error("sync: tolerances must be positive");
  }
  if (max_iterations < 0) throw Error("sync: max_iterations must be nonnegative");
  if (!(self_weight > 0.0)) throw Error("sync: self weight must be positive");
}

std::vector<AgentId> predictors(const Bundles& bundles, AgentId target) {
  std::vector<AgentId> out;
  for (const auto& [owner, b] : bundles) {
    if (b.targets.count(target)) out.push_back(owner);
  }
  return out;
}

namespace {

std::set<AgentId> all_targets(const Bundles& bundles) {
  std::set<AgentId> out;
  for (const auto& [owner, b] : bundles) {
    for (const auto& [j, p] : b.targets) out.insert(j);
  }
  return out;
}

const std::vector<VehicleState>& states_of(const Bundles& bundles, AgentId owner, AgentId target) {
  return bundles.at(owner).targets.at(target).states;
}

}  // namespace

Eigen::Vector4d max_disagreement(const Bundles& bundles, AgentId target) {
  const auto preds = predictors(bundles, target);
  Eigen::Vector4d worst = Eigen::Vector4d::Zero();
  if (preds.empty()) return worst;
  const std::size_t horizon = states_of(bundles, preds.front(), target).size();
  // Componentwise max-min spread equals the largest pairwise difference.
  for (std::size_t k = 0; k < horizon; ++k) {
    Eigen::Vector4d lo = Eigen::Vector4d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector4d hi = -lo;
    for (AgentId q : preds) {
      const auto& seq = states_of(bundles, q, target);
      if (seq.size() != horizon) {
        throw Error("sync: horizon mismatch in predictions of agent " + std::to_string(target));
      }
      const Eigen::Vector4d v = seq[k].vec();
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    worst = worst.cwiseMax(hi - lo);
  }
  return worst;
}

double scaled_disagreement(const Bundles& bundles, const SyncConfig& cfg) {
  double worst = 0.0;
  const Eigen::Vector4d tol = cfg.tolerance();
  for (AgentId j : all_targets(bundles)) {
    worst = std::max(worst, max_disagreement(bundles, j).cwiseQuotient(tol).maxCoeff());
  }
  return worst;
}

bool consistent(const Bundles& bundles, const SyncConfig& cfg) {
  return scaled_disagreement(bundles, cfg) <= 1.0;
}

std::map<AgentId, std::vector<VehicleState>> sync_update(const PredictionBundle& own,
                                                         const SyncInbox& inbox,
                                                         const CouplingGraph& graph,
                                                         double self_weight) {
  std::map<AgentId, std::vector<VehicleState>> out;
  for (const auto& [j, pred] : own.targets) {
    // Contributors in ascending id: the owner itself and every sender of j.
    std::map<AgentId, const std::vector<VehicleState>*> sources;
    sources[own.owner] = &pred.states;
    for (const auto& [q, values] : inbox) {
      const auto it = values.find(j);
      if (it != values.end()) sources[q] = &it->second;
    }
    double total = 0.0;
    for (const auto& [q, seq] : sources) total += 1.0 / sync_weight(graph, q, j, self_weight);
    std::vector<Eigen::Vector4d> acc(pred.states.size(), Eigen::Vector4d::Zero());
    for (const auto& [q, seq] : sources) {
      if (seq->size() != acc.size()) {
        throw Error("sync: horizon mismatch from agent " + std::to_string(q));
      }
      const double wq = (1.0 / sync_weight(graph, q, j, self_weight)) / total;
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += wq * (*seq)[k].vec();
    }
    auto& dst = out[j];
    for (const auto& v : acc) dst.push_back(VehicleState::from(v));
  }
  return out;
}

Bundles sync_step(const Bundles& bundles, const CouplingGraph& graph, double self_weight) {
  Bundles next = bundles;
  for (const auto& [i, own] : bundles) {
    SyncInbox inbox;
    for (AgentId q : graph.neighbors(i)) {
      const auto it = bundles.find(q);
      if (it == bundles.end()) continue;
      for (const auto& [j, p] : it->second.targets) inbox[q][j] = p.states;
    }
    for (auto& [j, states] : sync_update(own, inbox, graph, self_weight)) {
      next.at(i).targets.at(j).states = std::move(states);
    }
  }
  return next;
}

SyncMatrix bundle_sync_matrix(const Bundles& bundles, const CouplingGraph& graph,
                              AgentId target, double self_weight) {
  std::map<AgentId, std::set<AgentId>> hears;
  std::map<AgentId, std::set<AgentId>> predicts;
  for (const auto& [i, b] : bundles) {
    hears[i] = graph.closed_neighborhood(i);
    for (const auto& [j, p] : b.targets) predicts[i].insert(j);
  }
  return sync_matrix(graph, hears, predicts, target, self_weight);
}

SyncResult synchronize(const Bundles& bundles, const CouplingGraph& graph, const SyncConfig& cfg) {
  cfg.validate();
  const auto targets = all_targets(bundles);
  if (cfg.check_precondition) {
    for (AgentId j : targets) {
      const auto m = bundle_sync_matrix(bundles, graph, j, cfg.self_weight);
      if (!support_has_spanning_tree(m.weights)) {
        throw Error("sync: averaging support for agent " + std::to_string(j) +
                    " has no spanning tree");
      }
    }
  }
  SyncResult res;
  res.bundles = bundles;
  while (!consistent(res.bundles, cfg)) {
    if (res.iterations >= cfg.max_iterations) {
      std::ostringstream msg;
      msg << "sync: no consensus after " << res.iterations
          << " iterations; scaled disagreement " << scaled_disagreement(res.bundles, cfg);
      throw Error(msg.str());
    }
    res.bundles = sync_step(res.bundles, graph, cfg.self_weight);
    ++res.iterations;
  }
  for (AgentId j : targets) {
    const auto preds = predictors(res.bundles, j);
    const AgentId src = std::count(preds.begin(), preds.end(), j) ? j : preds.front();
    res.states[j] = states_of(res.bundles, src, j);
  }
  return res;
}

}  // namespace syncdmpc
