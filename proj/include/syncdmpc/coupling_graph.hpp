#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "syncdmpc/common.hpp"

namespace syncdmpc {

/// Weighted undirected coupling topology. Nodes and edges iterate in
/// ascending id order, which keeps averaging and message order reproducible.
class CouplingGraph {
 public:
  CouplingGraph() = default;

  void add_node(AgentId id);
  /// Adds (or re-weights) the undirected edge {a, b}. Both nodes are created
  /// on demand. Self-loops and non-positive weights are rejected.
  void add_edge(AgentId a, AgentId b, double weight = 1.0);

  bool contains(AgentId id) const { return adjacency_.count(id) != 0; }
  bool adjacent(AgentId a, AgentId b) const;
  double weight(AgentId a, AgentId b) const;

  std::set<AgentId> neighbors(AgentId id) const;
  /// {id} together with its neighbors.
  std::set<AgentId> closed_neighborhood(AgentId id) const;

  std::vector<AgentId> nodes() const;
  std::vector<std::pair<AgentId, AgentId>> edges() const;

  std::size_t size() const { return adjacency_.size(); }
  std::size_t edge_count() const;
  bool empty() const { return adjacency_.empty(); }

 private:
  std::map<AgentId, std::map<AgentId, double>> adjacency_;
};

/// Closed neighborhood of `center` with every parent edge between its members.
struct CouplingSubGraph {
  AgentId center = 0;
  CouplingGraph graph;
};

CouplingSubGraph subgraph(const CouplingGraph& g, AgentId center);

/// Undirected spanning tree exists iff the graph is connected.
bool has_spanning_tree(const CouplingGraph& g);
bool has_spanning_tree(const CouplingSubGraph& sub);

/// Largest eccentricity over all connected components (0 for edgeless graphs).
int diameter(const CouplingGraph& g);

/// Weight w_{q->j} used when q's prediction of j enters an average. Adjacent
/// pairs use the edge weight, q == j uses `self_weight`, anything else 1.
double sync_weight(const CouplingGraph& g, AgentId q, AgentId j, double self_weight);

/// Row-stochastic averaging matrix acting on the predictions of one target.
/// Row r corresponds to predictors[r]; column c to predictors[c].
struct SyncMatrix {
  AgentId target = 0;
  std::vector<AgentId> predictors;
  Eigen::MatrixXd weights;
};

/// General form: `hears[i]` are the agents whose values i reads (including
/// itself), `predicts[i]` the targets agent i holds predictions for.
SyncMatrix sync_matrix(const CouplingGraph& g,
                       const std::map<AgentId, std::set<AgentId>>& hears,
                       const std::map<AgentId, std::set<AgentId>>& predicts,
                       AgentId target, double self_weight = 1.0);

/// Coupling-graph form: every agent hears and predicts its closed neighborhood.
SyncMatrix sync_matrix(const std::vector<CouplingSubGraph>& subgraphs, AgentId target,
                       double self_weight = 1.0);

/// True iff some node reaches every other node along the information flow of
/// the matrix support (entry (r, c) > 0 means c feeds r).
bool support_has_spanning_tree(const Eigen::MatrixXd& m);

}  // namespace syncdmpc
