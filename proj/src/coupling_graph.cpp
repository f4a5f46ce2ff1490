#include "syncdmpc/coupling_graph.hpp"

#include <cmath>
#include <deque>
#include <string>

namespace syncdmpc {

void CouplingGraph::add_node(AgentId id) { adjacency_.try_emplace(id); }

void CouplingGraph::add_edge(AgentId a, AgentId b, double weight) {
  if (a == b) {
    throw Error("coupling graph: self-loop on agent " + std::to_string(a));
  }
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw Error("coupling graph: edge (" + std::to_string(a) + "," + std::to_string(b) +
                ") needs a positive finite weight");
  }
  adjacency_[a][b] = weight;
  adjacency_[b][a] = weight;
}

bool CouplingGraph::adjacent(AgentId a, AgentId b) const {
  auto it = adjacency_.find(a);
  return it != adjacency_.end() && it->second.count(b) != 0;
}

double CouplingGraph::weight(AgentId a, AgentId b) const {
  auto it = adjacency_.find(a);
  if (it == adjacency_.end() || it->second.count(b) == 0) {
    throw Error("coupling graph: no edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
  }
  return it->second.at(b);
}

std::set<AgentId> CouplingGraph::neighbors(AgentId id) const {
  auto it = adjacency_.find(id);
  if (it == adjacency_.end()) {
    throw Error("coupling graph: unknown agent " + std::to_string(id));
  }
  std::set<AgentId> out;
  for (const auto& [n, w] : it->second) out.insert(n);
  return out;
}

std::set<AgentId> CouplingGraph::closed_neighborhood(AgentId id) const {
  auto out = neighbors(id);
  out.insert(id);
  return out;
}

std::vector<AgentId> CouplingGraph::nodes() const {
  std::vector<AgentId> out;
  out.reserve(adjacency_.size());
  for (const auto& [id, adj] : adjacency_) out.push_back(id);
  return out;
}

std::vector<std::pair<AgentId, AgentId>> CouplingGraph::edges() const {
  std::vector<std::pair<AgentId, AgentId>> out;
  for (const auto& [a, adj] : adjacency_) {
    for (const auto& [b, w] : adj) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

std::size_t CouplingGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& [a, adj] : adjacency_) twice += adj.size();
  return twice / 2;
}

CouplingSubGraph subgraph(const CouplingGraph& g, AgentId center) {
  if (!g.contains(center)) {
    throw Error("subgraph: unknown agent " + std::to_string(center));
  }
  CouplingSubGraph sub;
  sub.center = center;
  const auto members = g.closed_neighborhood(center);
  for (AgentId m : members) sub.graph.add_node(m);
  for (AgentId a : members) {
    for (AgentId b : g.neighbors(a)) {
      if (a < b && members.count(b)) sub.graph.add_edge(a, b, g.weight(a, b));
    }
  }
  return sub;
}

namespace {

// Breadth-first distances from `source`; unreachable nodes are absent.
std::map<AgentId, int> bfs(const CouplingGraph& g, AgentId source) {
  std::map<AgentId, int> dist{{source, 0}};
  std::deque<AgentId> queue{source};
  while (!queue.empty()) {
    AgentId u = queue.front();
    queue.pop_front();
    for (AgentId v : g.neighbors(u)) {
      if (dist.emplace(v, dist[u] + 1).second) queue.push_back(v);
    }
  }
  return dist;
}

}  // namespace

bool has_spanning_tree(const CouplingGraph& g) {
  if (g.empty()) throw Error("has_spanning_tree: empty graph");
  return bfs(g, g.nodes().front()).size() == g.size();
}

bool has_spanning_tree(const CouplingSubGraph& sub) { return has_spanning_tree(sub.graph); }

int diameter(const CouplingGraph& g) {
  int best = 0;
  for (AgentId id : g.nodes()) {
    for (const auto& [n, d] : bfs(g, id)) best = std::max(best, d);
  }
  return best;
}

double sync_weight(const CouplingGraph& g, AgentId q, AgentId j, double self_weight) {
  if (q == j) return self_weight;
  if (g.adjacent(q, j)) return g.weight(q, j);
  return 1.0;
}

SyncMatrix sync_matrix(const CouplingGraph& g, const std::map<AgentId, std::set<AgentId>>& hears,
                       const std::map<AgentId, std::set<AgentId>>& predicts, AgentId target,
                       double self_weight) {
  SyncMatrix out;
  out.target = target;
  for (const auto& [i, targets] : predicts) {
    if (targets.count(target)) out.predictors.push_back(i);
  }
  if (out.predictors.empty()) {
    throw Error("sync_matrix: agent " + std::to_string(target) + " has no predictors");
  }
  const auto n = static_cast<Eigen::Index>(out.predictors.size());
  out.weights = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const AgentId i = out.predictors[r];
    auto hi = hears.find(i);
    double total = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const AgentId q = out.predictors[c];
      const bool heard = q == i || (hi != hears.end() && hi->second.count(q));
      if (!heard) continue;
      out.weights(r, c) = 1.0 / sync_weight(g, q, target, self_weight);
      total += out.weights(r, c);
    }
    out.weights.row(r) /= total;
  }
  return out;
}

SyncMatrix sync_matrix(const std::vector<CouplingSubGraph>& subgraphs, AgentId target,
                       double self_weight) {
  CouplingGraph merged;
  std::map<AgentId, std::set<AgentId>> members;
  for (const auto& sub : subgraphs) {
    for (AgentId n : sub.graph.nodes()) {
      merged.add_node(n);
      members[sub.center].insert(n);
    }
    for (const auto& [a, b] : sub.graph.edges()) merged.add_edge(a, b, sub.graph.weight(a, b));
  }
  return sync_matrix(merged, members, members, target, self_weight);
}

bool support_has_spanning_tree(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) throw Error("support_has_spanning_tree: empty matrix");
  for (Eigen::Index root = 0; root < n; ++root) {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::deque<Eigen::Index> queue{root};
    seen[static_cast<std::size_t>(root)] = true;
    Eigen::Index count = 1;
    while (!queue.empty()) {
      const Eigen::Index c = queue.front();
      queue.pop_front();
      for (Eigen::Index r = 0; r < n; ++r) {
        if (m(r, c) > 0.0 && !seen[static_cast<std::size_t>(r)]) {
          seen[static_cast<std::size_t>(r)] = true;
          ++count;
          queue.push_back(r);
        }
      }
    }
    if (count == n) return true;
  }
  return false;
}

}  // namespace syncdmpc
