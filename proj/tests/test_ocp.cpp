#include <doctest.h>

#include <algorithm>
#include <random>

#include "syncdmpc/ocp.hpp"

using namespace syncdmpc;

namespace {

// Member driving straight along +x at constant speed; the reference is the
// exact zero-input rollout, so the member can track it with zero cost.
OcpMember cruising(double x, double y, double v, const VehicleParams& vp, const OcpParams& op) {
  OcpMember m;
  m.initial = {x, y, 0.0, v};
  VehicleState s = m.initial;
  m.nominal.states.push_back(s);
  for (int k = 0; k < op.N_p; ++k) {
    s = step(s, {}, vp);
    m.reference.push_back(s);
    m.nominal.states.push_back(s);
    m.nominal.inputs.push_back({});
  }
  return m;
}

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

// Rows of [M | b] sorted lexicographically, for order-independent comparison.
std::vector<std::vector<double>> canonical_rows(const SparseMatrix& M, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd D = dense(M);
  std::vector<std::vector<double>> rows;
  for (Eigen::Index r = 0; r < D.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < D.cols(); ++c) row.push_back(D(r, c));
    row.push_back(b(r));
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

Eigen::Index box_rows(const OcpParams& op) { return 6 * op.N_p + 8 * op.N_u; }

}  // namespace

TEST_CASE("single agent without neighbors has one block and no coupling rows") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_node(1);
  const auto ocp = build_local_ocp(subgraph(g, 1), {{1, cruising(1, 1, 0.5, vp, op)}}, vp, op);
  CHECK(ocp.layout.members == std::vector<AgentId>{1});
  CHECK(ocp.layout.pairs.empty());
  CHECK(ocp.qp.num_variables() == ocp.layout.block_size());
  CHECK(ocp.qp.num_inequalities() == box_rows(op));
  CHECK(ocp.qp.num_equalities() == 4 * op.N_p);
}

TEST_CASE("agent exactly on a reachable reference has zero optimal cost") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_node(1);
  const auto member = cruising(1.0, 1.0, 0.5, vp, op);
  const auto ocp = build_local_ocp(subgraph(g, 1), {{1, member}}, vp, op);
  const auto sol = solve(ocp.qp);
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.objective) < 1e-7);
  const auto pred = extract(ocp.layout, sol.z).at(1);
  for (int k = 0; k < op.N_p; ++k) {
    CHECK((pred.states[static_cast<std::size_t>(k)].vec() -
           member.reference[static_cast<std::size_t>(k)].vec())
              .norm() < 1e-6);
  }
}

TEST_CASE("two-agent sub-graph adds 2 N_p - 1 coupling rows to the box rows") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_edge(1, 2);
  std::map<AgentId, OcpMember> data{{1, cruising(1, 1, 0.5, vp, op)},
                                    {2, cruising(1, 2, 0.5, vp, op)}};
  const auto ocp = build_local_ocp(subgraph(g, 1), data, vp, op);
  CHECK(ocp.layout.pairs.size() == 1);
  // The k = 1 positions depend on the measured states only: no row there.
  CHECK(ocp.qp.num_inequalities() == 2 * box_rows(op) + 2 * op.N_p - 1);
  CHECK(ocp.qp.num_variables() == 2 * ocp.layout.block_size() + op.N_p);
}

TEST_CASE("axis-aligned coupling linearization") {
  const double d = 0.35;
  const auto rows = convexify_coupling({{0.0, 0.0}}, {{2 * d, 0.0}}, d);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].normal.x() == doctest::Approx(-1.0));
  CHECK(rows[0].normal.y() == doctest::Approx(0.0));
  CHECK_FALSE(rows[0].degenerate);
}

TEST_CASE("coincident nominal positions fall back to +x and are flagged") {
  const auto rows = convexify_coupling({{1.0, 1.0}}, {{1.0, 1.0}}, 0.35);
  CHECK(rows[0].degenerate);
  CHECK(rows[0].normal == Eigen::Vector2d(1.0, 0.0));
}

TEST_CASE("linearized coupling is an inner approximation of the distance constraint") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double d = 0.35;
  int accepted = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const Eigen::Vector2d nj(u(rng), u(rng)), nq(u(rng), u(rng));
    const auto row = convexify_coupling({nj}, {nq}, d)[0];
    const Eigen::Vector2d pj(u(rng), u(rng)), pq(u(rng), u(rng));
    if (row.normal.dot(pj - pq) >= row.bound) {
      ++accepted;
      CHECK((pj - pq).norm() >= d - 1e-12);
    }
  }
  CHECK(accepted > 1000);
}

TEST_CASE("cost matrix is PSD") {
  VehicleParams vp;
  OcpParams op;
  op.N_p = 4;
  op.N_u = 2;
  CouplingGraph g;
  g.add_edge(1, 2, 2.0);
  g.add_edge(2, 3, 0.5);
  std::map<AgentId, OcpMember> data{{1, cruising(1, 1, 0.5, vp, op)},
                                    {2, cruising(1, 2, 0.5, vp, op)},
                                    {3, cruising(2, 3, 0.2, vp, op)}};
  for (AgentId c : g.nodes()) {
    const auto ocp = build_local_ocp(subgraph(g, c), data, vp, op);
    const Eigen::MatrixXd H = dense(ocp.qp.H);
    CHECK((H - H.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("centralized problem for one agent equals the local problem") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_node(1);
  std::map<AgentId, OcpMember> data{{1, cruising(0.5, 0.5, 0.3, vp, op)}};
  data[1].reference[3].x += 0.2;
  const auto local = build_local_ocp(subgraph(g, 1), data, vp, op);
  const auto central = build_centralized_ocp(g, data, vp, op);
  CHECK(dense(local.qp.H) == dense(central.qp.H));
  CHECK(local.qp.h == central.qp.h);
  CHECK(dense(local.qp.E) == dense(central.qp.E));
  CHECK(local.qp.e == central.qp.e);
  CHECK(dense(local.qp.G) == dense(central.qp.G));
  CHECK(local.qp.g == central.qp.g);
}

TEST_CASE("disconnected agents: centralized optimum equals independent optima") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_node(1);
  g.add_node(2);
  std::map<AgentId, OcpMember> data{{1, cruising(0.5, 0.5, 0.3, vp, op)},
                                    {2, cruising(0.5, 3.0, 0.6, vp, op)}};
  for (auto& r : data[1].reference) r.y += 0.3;
  for (auto& r : data[2].reference) r.v = 1.0;
  const auto joint = build_centralized_ocp(g, data, vp, op);
  const Eigen::MatrixXd H = dense(joint.qp.H);
  const Eigen::Index b = joint.layout.block_size();
  CHECK(H.block(0, b, b, b).norm() == 0.0);
  const auto js = solve(joint.qp);
  REQUIRE(js.optimal());
  const auto jp = extract(joint.layout, js.z);
  double total = 0.0;
  for (AgentId id : {1, 2}) {
    CouplingGraph solo;
    solo.add_node(id);
    const auto ocp = build_centralized_ocp(solo, {{id, data[id]}}, vp, op);
    const auto s = solve(ocp.qp);
    REQUIRE(s.optimal());
    total += s.objective;
    const auto p = extract(ocp.layout, s.z).at(id);
    for (std::size_t k = 0; k < p.inputs.size(); ++k) {
      CHECK((p.inputs[k].vec() - jp.at(id).inputs[k].vec()).norm() < 1e-6);
    }
  }
  CHECK(js.objective == doctest::Approx(total).epsilon(1e-8));
}

TEST_CASE("fully connected topology: local and centralized constraint sets coincide") {
  VehicleParams vp;
  OcpParams op;
  op.N_p = 4;
  op.N_u = 2;
  CouplingGraph g;
  g.add_edge(1, 2, 2.0);
  g.add_edge(1, 3, 1.0);
  g.add_edge(2, 3, 3.0);
  std::map<AgentId, OcpMember> data{{1, cruising(1, 1, 0.5, vp, op)},
                                    {2, cruising(1, 2, 0.5, vp, op)},
                                    {3, cruising(2, 3, 0.2, vp, op)}};
  const auto central = build_centralized_ocp(g, data, vp, op);
  for (AgentId c : g.nodes()) {
    const auto local = build_local_ocp(subgraph(g, c), data, vp, op);
    CHECK(canonical_rows(local.qp.G, local.qp.g) == canonical_rows(central.qp.G, central.qp.g));
    CHECK(canonical_rows(local.qp.E, local.qp.e) == canonical_rows(central.qp.E, central.qp.e));
  }
}

TEST_CASE("zero-weighted far neighbors leave the self trajectory unchanged") {
  VehicleParams vp;
  OcpParams op;
  std::map<AgentId, OcpMember> data{{1, cruising(0.5, 0.5, 0.3, vp, op)},
                                    {2, cruising(0.5, 3.0, 0.6, vp, op)},
                                    {3, cruising(3.0, 3.0, 0.2, vp, op)}};
  for (auto& r : data[1].reference) r.y += 0.2;
  const auto with = build_ocp(data, {{1, 1.0}, {2, 0.0}, {3, 0.0}}, {{1, 2}, {1, 3}}, vp, op);
  const auto alone = build_ocp({{1, data[1]}}, {{1, 1.0}}, {}, vp, op);
  const auto sw = solve(with.qp);
  const auto sa = solve(alone.qp);
  REQUIRE(sw.optimal());
  REQUIRE(sa.optimal());
  const auto pw = extract(with.layout, sw.z).at(1);
  const auto pa = extract(alone.layout, sa.z).at(1);
  for (std::size_t k = 0; k < pw.states.size(); ++k) {
    CHECK((pw.states[k].vec() - pa.states[k].vec()).norm() < 1e-6);
  }
}

TEST_CASE("active coupling keeps the linearized distance and slacks stay zero when possible") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_edge(1, 2);
  // Both agents want to reach the same point; the linearized constraint
  // must keep their predictions apart.
  std::map<AgentId, OcpMember> data{{1, cruising(1.0, 2.0, 0.0, vp, op)},
                                    {2, cruising(2.0, 2.0, 0.0, vp, op)}};
  for (auto& r : data[1].reference) r.x = 1.5;
  for (auto& r : data[2].reference) r.x = 1.5;
  const auto ocp = build_centralized_ocp(g, data, vp, op);
  const auto sol = solve(ocp.qp);
  REQUIRE(sol.optimal());
  CHECK(max_slack(ocp.layout, sol.z) < 1e-6);
  const auto p = extract(ocp.layout, sol.z);
  for (int k = 0; k < op.N_p; ++k) {
    const auto& a = p.at(1).states[static_cast<std::size_t>(k)];
    const auto& b = p.at(2).states[static_cast<std::size_t>(k)];
    CHECK(std::hypot(a.x - b.x, a.y - b.y) >= op.d_safe - 1e-6);
  }
}

TEST_CASE("missing member data and horizon mismatch are rejected") {
  VehicleParams vp;
  OcpParams op;
  CouplingGraph g;
  g.add_edge(1, 2);
  std::map<AgentId, OcpMember> data{{1, cruising(1, 1, 0.5, vp, op)}};
  CHECK_THROWS_AS(build_local_ocp(subgraph(g, 1), data, vp, op), Error);
  data[2] = cruising(1, 2, 0.5, vp, op);
  data[2].reference.pop_back();
  CHECK_THROWS_AS(build_local_ocp(subgraph(g, 1), data, vp, op), Error);
  OcpParams bad;
  bad.N_u = bad.N_p + 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = OcpParams{};
  bad.coupling_objective_weight = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("inputs beyond the control horizon are held") {
  Prediction p;
  p.inputs = {{0.1, 0.0}, {0.2, 0.1}};
  CHECK(p.input_at(5).a == 0.2);
  CHECK(p.input_at(5).delta == 0.1);
}
