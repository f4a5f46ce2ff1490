#include <doctest.h>

#include <cmath>
#include <sstream>

#include "syncdmpc/experiment.hpp"

using namespace syncdmpc;

namespace {

ScenarioConfig small(int n, std::uint64_t seed, const std::string& controller = "scdmpc") {
  ScenarioConfig cfg;
  cfg.num_agents = n;
  cfg.seed = seed;
  cfg.controller = controller;
  return cfg;
}

// Nearest-sample distance to the path sampled every h metres.
double sampled_distance(const DubinsPath& p, double x, double y, double h) {
  double best = INFINITY;
  const int n = static_cast<int>(std::ceil(p.length() / h));
  for (int i = 0; i <= n; ++i) {
    const Pose q = p.at(std::min(p.length(), i * h));
    best = std::min(best, std::hypot(q.x - x, q.y - y));
  }
  return best;
}

}  // namespace

TEST_CASE("single agent is placed inside the arena") {
  const auto w = generate_scenario(small(1, 3));
  REQUIRE(w.starts.size() == 1);
  const auto& s = w.starts.at(1);
  CHECK(s.x > 0.0);
  CHECK(s.x < w.config.arena_width);
  CHECK(s.y > 0.0);
  CHECK(s.y < w.config.arena_height);
  CHECK(s.v == 0.0);
}

TEST_CASE("scenario generation is deterministic in the seed") {
  const auto a = generate_scenario(small(4, 11));
  const auto b = generate_scenario(small(4, 11));
  const auto c = generate_scenario(small(4, 12));
  bool differs = false;
  for (AgentId i = 1; i <= 4; ++i) {
    CHECK(a.starts.at(i).vec() == b.starts.at(i).vec());
    differs = differs || a.starts.at(i).vec() != c.starts.at(i).vec();
  }
  CHECK(differs);
}

TEST_CASE("start clearance scan over 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto w = generate_scenario(small(4, seed));
    for (const auto& [i, s] : w.starts) {
      CHECK(s.x >= 0.0);
      CHECK(s.x <= w.config.arena_width);
      CHECK(s.y >= 0.0);
      CHECK(s.y <= w.config.arena_height);
      for (const auto& [j, t] : w.starts) {
        if (j > i) CHECK(std::hypot(s.x - t.x, s.y - t.y) >= 2.0 * w.config.ocp.d_safe);
      }
    }
    for (const auto& [i, g] : w.goals) {
      CHECK(g.x > 0.0);
      CHECK(g.x < w.config.arena_width);
      CHECK(g.y < w.config.arena_height);
    }
  }
}

TEST_CASE("impossible placement asks for fewer agents") {
  auto cfg = small(60, 1);
  cfg.start_sampling.max_attempts = 200;
  try {
    generate_scenario(cfg);
    FAIL("expected a placement error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("fewer agents") != std::string::npos);
  }
}

TEST_CASE("sorted assignment orders starts like the goals") {
  const auto w = generate_scenario(small(5, 7));
  for (AgentId i = 1; i < 5; ++i) {
    CHECK(w.starts.at(i).x <= w.starts.at(i + 1).x);
    CHECK(w.goals.at(i).x < w.goals.at(i + 1).x);
  }
}

TEST_CASE("agent starting at its goal arrives at step 0 with zero deviation") {
  for (const std::string ctl : {"cmpc", "scdmpc"}) {
    auto cfg = small(1, 1, ctl);
    const auto goals = formation_goals(cfg);
    const auto w = make_world(cfg, goals, goals);
    const auto r = rollout(w);
    CHECK(r.metrics.success());
    CHECK(r.metrics.arrival_step == 0);
    CHECK(r.metrics.steps == 0);
    CHECK(r.metrics.mean_path_deviation == 0.0);
  }
}

TEST_CASE("one agent: distributed and centralized rollouts coincide step by step") {
  const auto a = rollout(generate_scenario(small(1, 5, "scdmpc")));
  const auto b = rollout(generate_scenario(small(1, 5, "cmpc")));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    CHECK(std::abs(a.log[k].input.a - b.log[k].input.a) < 1e-6);
    CHECK(std::abs(a.log[k].input.delta - b.log[k].input.delta) < 1e-6);
  }
}

TEST_CASE("metrics recomputed from the written log match the run") {
  const auto w = generate_scenario(small(3, 2));
  const auto r = rollout(w);
  REQUIRE(r.metrics.success());
  std::stringstream csv;
  write_log_csv(csv, r.log);
  CHECK(csv.str().rfind("step,agent,x,y,psi,v,a,delta", 0) == 0);
  const auto m = compute_metrics(w, read_log_csv(csv));
  CHECK(std::abs(m.mean_path_deviation - r.metrics.mean_path_deviation) <= 1e-12);
  CHECK(std::abs(m.mean_speed_deviation - r.metrics.mean_speed_deviation) <= 1e-12);
  CHECK(std::abs(m.min_distance - r.metrics.min_distance) <= 1e-12);
  CHECK(std::abs(m.max_step_work - r.metrics.max_step_work) <= 1e-12 * std::max(1.0, r.metrics.max_step_work));
  CHECK(m.arrival_step == r.metrics.arrival_step);
  CHECK(m.steps == r.metrics.steps);
  CHECK(m.non_converged_steps == r.metrics.non_converged_steps);
  CHECK(m.total_sync_iterations == r.metrics.total_sync_iterations);
  for (const auto& [i, a] : r.metrics.agents) {
    CHECK(std::abs(m.agents.at(i).path_deviation - a.path_deviation) <= 1e-12);
    CHECK(std::abs(m.agents.at(i).speed_deviation - a.speed_deviation) <= 1e-12);
  }
}

TEST_CASE("path deviation is the limit of ever finer path sampling") {
  const auto w = generate_scenario(small(2, 4));
  const auto r = rollout(w);
  const double dt = w.config.vehicle.dt;
  double previous_gap = INFINITY;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    double gap = 0.0;
    for (const auto& [i, a] : r.metrics.agents) {
      double sampled = 0.0;
      for (const auto& row : r.log) {
        if (row.agent == i) sampled += sampled_distance(w.paths.at(i), row.state.x, row.state.y, h) * dt;
      }
      // Sampling can only overestimate the distance to the path.
      CHECK(sampled >= a.path_deviation - 1e-12);
      gap = std::max(gap, sampled - a.path_deviation);
    }
    CHECK(gap <= previous_gap);
    previous_gap = gap;
  }
  CHECK(previous_gap < 1e-4 * dt * static_cast<double>(r.log.size()));
}

TEST_CASE("compare table has one row per controller and agent count and is reproducible") {
  ScenarioConfig base;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto a = compare(base, {2, 3, 4}, seeds);
  REQUIRE(a.rows.size() == 6);
  std::size_t k = 0;
  for (int n : {2, 3, 4}) {
    for (const std::string ctl : {"cmpc", "scdmpc"}) {
      CHECK(a.rows[k].num_agents == n);
      CHECK(a.rows[k].controller == ctl);
      CHECK(a.rows[k].runs == 5);
      ++k;
    }
  }
  CHECK(a.runs.size() == 30);

  const auto b = compare(base, {2, 3}, {1, 2});
  const auto c = compare(base, {2, 3}, {1, 2});
  std::stringstream tb, tc, pb, pc;
  write_compare_csv(tb, b);
  write_compare_csv(tc, c);
  write_plot_data_csv(pb, b);
  write_plot_data_csv(pc, c);
  CHECK(tb.str() == tc.str());
  CHECK(pb.str() == pc.str());
}

TEST_CASE("log-log slope of a power law is its exponent") {
  const std::vector<double> n{2, 3, 4, 5, 6};
  std::vector<double> y;
  for (double v : n) y.push_back(3.0 * std::pow(v, 1.7));
  CHECK(log_log_slope(n, y) == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("config parsing: defaults, round trip and errors") {
  const auto d = parse_config("{}");
  CHECK(d.num_agents == ScenarioConfig{}.num_agents);
  CHECK(dump_config(parse_config(dump_config(d))) == dump_config(d));

  const auto c = parse_config(R"({"num_agents": 5, "topology": {"kind": "ring"}, "ocp": {"d_safe": 0.4}})");
  CHECK(c.num_agents == 5);
  CHECK(c.topology.kind == "ring");
  CHECK(c.ocp.d_safe == 0.4);

  CHECK_THROWS_WITH_AS(parse_config(R"({"num_agent": 5})"), doctest::Contains("num_agent"), Error);
  CHECK_THROWS_WITH_AS(parse_config(R"({"ocp": {"dsafe": 1}})"), doctest::Contains("dsafe"), Error);
  CHECK_THROWS_AS(parse_config("{not json"), Error);
  CHECK_THROWS_AS(parse_config(R"({"num_agents": 0})").validate(), Error);
  CHECK_THROWS_AS(parse_config(R"({"controller": "mpc"})").validate(), Error);
  CHECK_THROWS_AS(parse_config(R"({"topology": {"kind": "star"}})").validate(), Error);
  CHECK_THROWS_AS(parse_config(R"({"start_sampling": {"assignment": "random"}})").validate(), Error);
  CHECK_THROWS_AS(parse_config(R"({"ocp": {"safety_margin": -0.1}})").validate(), Error);
  CHECK_THROWS_AS(parse_config(R"({"max_non_converged_steps": -2})").validate(), Error);
}

TEST_CASE("generated topologies") {
  SUBCASE("ring") {
    const auto g = build_topology({"ring", {}, 1.0}, 5);
    CHECK(g.edges().size() == 5);
    CHECK(g.adjacent(5, 1));
  }
  SUBCASE("four-agent example") {
    const auto g = build_topology({"example", {}, 1.0}, 4);
    CHECK(g.edges().size() == 4);
    CHECK(g.adjacent(2, 4));
    CHECK_FALSE(g.adjacent(3, 4));
  }
  SUBCASE("custom edges are range checked") {
    TopologySpec t{"custom", {{1, 2, 0.5}}, 1.0};
    CHECK(build_topology(t, 2).weight(1, 2) == 0.5);
    t.edges = {{1, 3, 1.0}};
    CHECK_THROWS_AS(build_topology(t, 2), Error);
  }
}

TEST_CASE("conflict topology couples crossing paths only") {
  auto cfg = small(3, 1);
  cfg.topology.kind = "conflict";
  // 1 and 2 swap sides and cross; 3 drives straight up far to the right.
  const std::map<AgentId, Pose> starts{{1, {0.6, 0.6, M_PI / 2}}, {2, {2.0, 0.6, M_PI / 2}}, {3, {3.5, 0.6, M_PI / 2}}};
  const std::map<AgentId, Pose> goals{{1, {2.0, 3.4, M_PI / 2}}, {2, {0.6, 3.4, M_PI / 2}}, {3, {3.5, 3.4, M_PI / 2}}};
  const auto w = make_world(cfg, starts, goals);
  CHECK(w.graph.adjacent(1, 2));
  CHECK_FALSE(w.graph.adjacent(1, 3));
  CHECK_FALSE(w.graph.adjacent(2, 3));

  SUBCASE("a time window drops crossings that happen far apart in time") {
    // Agent 2 crosses agent 1's path only long after agent 1 has left it.
    const std::map<AgentId, Pose> s2{{1, {1.6, 3.8, 0.0}}, {2, {2.0, 0.2, M_PI / 2}}, {3, {5.5, 0.6, M_PI / 2}}};
    const std::map<AgentId, Pose> g2{{1, {5.0, 3.8, 0.0}}, {2, {2.0, 5.6, M_PI / 2}}, {3, {5.5, 2.0, M_PI / 2}}};
    auto timed = cfg;
    timed.arena_width = 6.0;
    timed.arena_height = 6.0;
    CHECK(make_world(timed, s2, g2).graph.adjacent(1, 2));
    timed.topology.conflict_window = 0.4;
    const auto wt = make_world(timed, s2, g2);
    CHECK_FALSE(wt.graph.adjacent(1, 2));
  }
}
