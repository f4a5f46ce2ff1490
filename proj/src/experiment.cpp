#include "syncdmpc/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "syncdmpc/agent.hpp"
#include "syncdmpc/centralized.hpp"

namespace syncdmpc {

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

bool at_goal(const VehicleState& s, const Pose& g, const ScenarioConfig& cfg) {
  return std::hypot(s.x - g.x, s.y - g.y) <= cfg.goal_tolerance_position &&
         std::abs(wrap_angle(s.psi - g.psi)) <= cfg.goal_tolerance_heading;
}

/// Shortest round-trip decimal form.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<AgentId, Pose> formation_goals(const ScenarioConfig& cfg) {
  const double y = cfg.arena_height - cfg.goal_formation.top_margin;
  if (!(y > 0.0) || !(y < cfg.arena_height)) throw Error("scenario: goal line outside the arena");
  std::map<AgentId, Pose> goals;
  for (AgentId i = 1; i <= cfg.num_agents; ++i) {
    goals[i] = {cfg.arena_width * i / (cfg.num_agents + 1), y, M_PI / 2.0};
  }
  return goals;
}

double path_distance(const DubinsPath& a, const DubinsPath& b) {
  constexpr double kStep = 0.01;  // [m]
  const int samples = std::max(1, static_cast<int>(std::ceil(a.length() / kStep)));
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= samples; ++k) {
    const Pose p = a.at(a.length() * k / samples);
    best = std::min(best, b.distance_to(p.x, p.y));
  }
  return best;
}

CouplingGraph conflict_topology(const std::map<AgentId, DubinsPath>& paths, double reach, double weight) {
  CouplingGraph g;
  for (const auto& [i, p] : paths) g.add_node(i);
  for (auto a = paths.begin(); a != paths.end(); ++a) {
    for (auto b = std::next(a); b != paths.end(); ++b) {
      if (std::min(path_distance(a->second, b->second), path_distance(b->second, a->second)) < reach) {
        g.add_edge(a->first, b->first, weight);
      }
    }
  }
  return g;
}

CouplingGraph conflict_topology(const std::map<AgentId, ReferenceTrajectory>& refs, double reach,
                                double window, double weight) {
  CouplingGraph g;
  for (const auto& [i, r] : refs) g.add_node(i);
  for (auto a = refs.begin(); a != refs.end(); ++a) {
    for (auto b = std::next(a); b != refs.end(); ++b) {
      const ReferenceTrajectory& ra = a->second;
      const ReferenceTrajectory& rb = b->second;
      const int shift = static_cast<int>(std::ceil(window / ra.dt - 1e-9));
      const int last = std::max(ra.size(), rb.size()) + shift;
      bool close = false;
      for (int k = 0; k <= last && !close; ++k) {
        const VehicleState sa = ra.state(k);
        for (int m = std::max(0, k - shift); m <= k + shift && !close; ++m) {
          const VehicleState sb = rb.state(m);
          close = std::hypot(sa.x - sb.x, sa.y - sb.y) < reach;
        }
      }
      if (close) g.add_edge(a->first, b->first, weight);
    }
  }
  return g;
}

World make_world(const ScenarioConfig& cfg, const std::map<AgentId, Pose>& starts,
                 const std::map<AgentId, Pose>& goals) {
  cfg.validate();
  World w;
  w.config = cfg;
  const bool conflict = cfg.topology.kind == "conflict";
  if (!conflict) w.graph = build_topology(cfg.topology, cfg.num_agents);
  const double radius = cfg.reference.turn_radius > 0.0 ? cfg.reference.turn_radius
                                                        : cfg.vehicle.min_turn_radius();
  for (AgentId i = 1; i <= cfg.num_agents; ++i) {
    const auto s = starts.find(i);
    const auto g = goals.find(i);
    if (s == starts.end() || g == goals.end()) {
      throw Error("scenario: missing start or goal for agent " + std::to_string(i));
    }
    w.starts[i] = {s->second.x, s->second.y, s->second.psi, 0.0};
    w.goals[i] = g->second;
    w.paths.emplace(i, dubins_shortest_path(s->second, g->second, radius));
    w.references[i] = sample_trajectory(w.paths.at(i), cfg.vehicle, cfg.reference.profile);
  }
  if (conflict) {
    const double reach = cfg.topology.conflict_distance > 0.0 ? cfg.topology.conflict_distance
                                                              : 2.0 * cfg.ocp.d_safe;
    w.graph = cfg.topology.conflict_window > 0.0
                  ? conflict_topology(w.references, reach, cfg.topology.conflict_window, cfg.topology.weight)
                  : conflict_topology(w.paths, reach, cfg.topology.weight);
  }
  return w;
}

World generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto& ss = cfg.start_sampling;
  const double x_lo = ss.margin, x_hi = cfg.arena_width - ss.margin;
  const double y_lo = ss.margin, y_hi = cfg.arena_height - ss.top_clearance;
  const double clearance = 2.0 * cfg.ocp.d_safe;
  if (!(x_hi >= x_lo) || !(y_hi >= y_lo)) {
    throw Error("scenario: cannot place " + std::to_string(cfg.num_agents) +
                " agents: the start region is empty for this arena; use a larger arena or fewer agents");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> ux(x_lo, x_hi), uy(y_lo, y_hi);
  std::uniform_real_distribution<double> upsi(ss.heading_min, ss.heading_max);
  std::vector<Pose> placed;
  for (int n = 0; n < cfg.num_agents; ++n) {
    bool ok = false;
    for (int attempt = 0; attempt < ss.max_attempts && !ok; ++attempt) {
      const Pose p{ux(rng), uy(rng), upsi(rng)};
      ok = std::all_of(placed.begin(), placed.end(),
                       [&](const Pose& q) { return std::hypot(p.x - q.x, p.y - q.y) >= clearance; });
      if (ok) placed.push_back(p);
    }
    if (!ok) {
      throw Error("scenario: cannot place agent " + std::to_string(n + 1) + " of " +
                  std::to_string(cfg.num_agents) + " after " + std::to_string(ss.max_attempts) +
                  " attempts; try fewer agents");
    }
  }
  if (ss.assignment == "sorted_x") {
    std::stable_sort(placed.begin(), placed.end(), [](const Pose& a, const Pose& b) { return a.x < b.x; });
  }
  std::map<AgentId, Pose> starts;
  for (std::size_t k = 0; k < placed.size(); ++k) starts[static_cast<AgentId>(k + 1)] = placed[k];
  return make_world(cfg, starts, formation_goals(cfg));
}

RolloutResult rollout(const World& world, const RolloutOptions& opts) {
  const ScenarioConfig& cfg = world.config;
  const ControllerConfig ccfg = cfg.controller_config();
  std::unique_ptr<Controller> ctl;
  ScdmpcController* scdmpc = nullptr;
  if (cfg.controller == "cmpc") {
    ctl = std::make_unique<CentralizedController>(world.graph, ccfg);
  } else {
    auto p = std::make_unique<ScdmpcController>(world.graph, ccfg);
    scdmpc = p.get();
    if (opts.trace_messages) scdmpc->bus().enable_trace(true);
    ctl = std::move(p);
  }

  RolloutResult res;
  std::map<AgentId, VehicleState> states = world.starts;
  std::map<AgentId, VehicleInput> previous;
  for (const auto& [i, s] : states) previous[i] = VehicleInput{};
  std::string status = "ok", message;

  auto path_distance = [&](AgentId i, const VehicleState& s) { return world.paths.at(i).distance_to(s.x, s.y); };
  auto terminal_rows = [&](int t) {
    for (const auto& [i, s] : states) {
      LogRow r;
      r.step = t;
      r.agent = i;
      r.state = s;
      r.v_ref = world.references.at(i).state(t).v;
      r.path_distance = path_distance(i, s);
      r.terminal = true;
      res.log.push_back(r);
    }
  };

  for (int t = 0;; ++t) {
    const bool arrived = std::all_of(states.begin(), states.end(), [&](const auto& kv) {
      return at_goal(kv.second, world.goals.at(kv.first), cfg);
    });
    if (arrived || t >= cfg.max_steps) {
      terminal_rows(t);
      break;
    }
    std::map<AgentId, MemberInfo> members;
    for (const auto& [i, s] : states) {
      members[i] = MemberInfo{s, previous.at(i), world.references.at(i).window(t, cfg.ocp.N_p)};
    }
    StepOutcome out;
    try {
      out = ctl->step(members);
    } catch (const Error& e) {
      status = "solver_failure";
      message = "step " + std::to_string(t) + ": " + e.what();
      terminal_rows(t);
      break;
    }
    for (const auto& [i, d] : out.agents) {
      LogRow r;
      r.step = t;
      r.agent = i;
      r.state = states.at(i);
      r.input = d.input;
      r.v_ref = world.references.at(i).state(t).v;
      r.path_distance = path_distance(i, r.state);
      r.outer_iterations = d.outer_iterations;
      r.sync_iterations = d.sync_iterations;
      r.converged = d.converged;
      r.relaxed = d.relaxed;
      r.work = d.work;
      r.disagreement = out.disagreement;
      r.max_slack = d.max_slack;
      res.log.push_back(r);
      res.timing.push_back({t, i, d.solve_time, d.sync_time, out.compute_time});
    }
    for (auto& [i, s] : states) {
      previous[i] = out.agents.at(i).input;
      s = step(s, previous[i], cfg.vehicle);
    }
    std::string hit;
    for (auto a = states.begin(); a != states.end() && hit.empty(); ++a) {
      for (auto b = std::next(a); b != states.end(); ++b) {
        if (std::hypot(a->second.x - b->second.x, a->second.y - b->second.y) < cfg.vehicle.length) {
          hit = "agents " + std::to_string(a->first) + " and " + std::to_string(b->first);
          break;
        }
      }
    }
    if (!hit.empty()) {
      status = "collision";
      message = "collision between " + hit + " at step " + std::to_string(t + 1);
      terminal_rows(t + 1);
      break;
    }
  }

  res.metrics = compute_metrics(world, res.log);
  res.metrics.status = status;
  res.metrics.message = message;
  apply_timing(res.metrics, res.timing);
  if (scdmpc != nullptr) res.trace = scdmpc->bus().trace();
  return res;
}

MetricsReport compute_metrics(const World& world, const std::vector<LogRow>& log) {
  const ScenarioConfig& cfg = world.config;
  const double dt = cfg.vehicle.dt;
  MetricsReport m;
  m.controller = cfg.controller;
  m.num_agents = cfg.num_agents;
  m.seed = cfg.seed;
  m.min_distance = std::numeric_limits<double>::infinity();
  m.min_coupled_distance = std::numeric_limits<double>::infinity();
  std::map<int, std::vector<const LogRow*>> by_step;
  for (const auto& r : log) {
    auto& a = m.agents[r.agent];
    a.path_deviation += world.paths.at(r.agent).distance_to(r.state.x, r.state.y) * dt;
    a.speed_deviation += std::abs(r.state.v - world.references.at(r.agent).state(r.step).v) * dt;
    if (a.arrival_step < 0 && at_goal(r.state, world.goals.at(r.agent), cfg)) a.arrival_step = r.step;
    by_step[r.step].push_back(&r);
  }
  for (const auto& [i, a] : m.agents) {
    m.mean_path_deviation += a.path_deviation / static_cast<double>(m.agents.size());
    m.mean_speed_deviation += a.speed_deviation / static_cast<double>(m.agents.size());
  }
  double work_sum = 0.0, outer_sum = 0.0;
  for (const auto& [t, rows] : by_step) {
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const double d = std::hypot(rows[a]->state.x - rows[b]->state.x, rows[a]->state.y - rows[b]->state.y);
        m.min_distance = std::min(m.min_distance, d);
        if (world.graph.adjacent(rows[a]->agent, rows[b]->agent)) {
          m.min_coupled_distance = std::min(m.min_coupled_distance, d);
        }
      }
    }
    const bool all_there = std::all_of(rows.begin(), rows.end(), [&](const LogRow* r) {
      return at_goal(r->state, world.goals.at(r->agent), cfg);
    });
    if (m.arrival_step < 0 && all_there && rows.size() == m.agents.size()) m.arrival_step = t;
    if (rows.front()->terminal) continue;
    ++m.steps;
    double work = 0.0;
    int outer = 0, sync = 0;
    bool converged = true, relaxed = false;
    for (const LogRow* r : rows) {
      work = std::max(work, r->work);
      outer = std::max(outer, r->outer_iterations);
      sync = std::max(sync, r->sync_iterations);
      converged = converged && r->converged;
      relaxed = relaxed || r->relaxed;
    }
    m.max_step_work = std::max(m.max_step_work, work);
    work_sum += work;
    outer_sum += outer;
    m.max_outer_iterations = std::max(m.max_outer_iterations, outer);
    m.max_sync_iterations = std::max(m.max_sync_iterations, sync);
    m.total_sync_iterations += sync;
    if (!converged) ++m.non_converged_steps;
    if (relaxed) ++m.relaxed_steps;
    if (converged) m.max_disagreement = std::max(m.max_disagreement, rows.front()->disagreement);
  }
  if (m.steps > 0) {
    m.mean_step_work = work_sum / m.steps;
    m.mean_outer_iterations = outer_sum / m.steps;
  }
  if (m.agents.size() < 2) m.min_distance = std::numeric_limits<double>::infinity();
  return m;
}

void apply_timing(MetricsReport& m, const std::vector<TimingRow>& timing) {
  std::map<int, double> per_step;
  for (const auto& t : timing) per_step[t.step] = t.step_compute_time;
  m.max_compute_time = 0.0;
  m.mean_compute_time = 0.0;
  for (const auto& [s, c] : per_step) {
    m.max_compute_time = std::max(m.max_compute_time, c);
    m.mean_compute_time += c / static_cast<double>(per_step.size());
  }
}

CompareResult compare(const ScenarioConfig& base, const std::vector<int>& agent_counts,
                      const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& controllers) {
  if (agent_counts.empty() || seeds.empty() || controllers.empty()) {
    throw Error("compare: need at least one agent count, seed and controller");
  }
  CompareResult out;
  for (int n : agent_counts) {
    for (const auto& ctl : controllers) {
      CompareRow row;
      row.controller = ctl;
      row.num_agents = n;
      row.min_distance = std::numeric_limits<double>::infinity();
      double arrival_sum = 0.0, sync_sum = 0.0;
      for (std::uint64_t seed : seeds) {
        ScenarioConfig cfg = base;
        cfg.num_agents = n;
        cfg.seed = seed;
        cfg.controller = ctl;
        const auto res = rollout(generate_scenario(cfg));
        const auto& m = res.metrics;
        out.runs.push_back(m);
        ++row.runs;
        row.min_distance = std::min(row.min_distance, m.min_distance);
        if (!m.success()) continue;
        ++row.successes;
        row.mean_path_deviation += m.mean_path_deviation;
        row.mean_speed_deviation += m.mean_speed_deviation;
        row.max_path_deviation = std::max(row.max_path_deviation, m.mean_path_deviation);
        row.mean_max_step_work += m.max_step_work;
        row.mean_outer_iterations += m.mean_outer_iterations;
        row.max_outer_iterations = std::max(row.max_outer_iterations, m.max_outer_iterations);
        sync_sum += static_cast<double>(m.total_sync_iterations);
        row.non_converged_steps += m.non_converged_steps;
        row.relaxed_steps += m.relaxed_steps;
        row.max_disagreement = std::max(row.max_disagreement, m.max_disagreement);
        row.mean_max_compute_time += m.max_compute_time;
        row.max_max_compute_time = std::max(row.max_max_compute_time, m.max_compute_time);
        row.mean_compute_time += m.mean_compute_time;
        if (m.arrival_step >= 0) {
          ++row.arrivals;
          arrival_sum += m.arrival_step;
        }
      }
      if (row.successes > 0) {
        const double k = row.successes;
        row.mean_path_deviation /= k;
        row.mean_speed_deviation /= k;
        row.mean_max_step_work /= k;
        row.mean_outer_iterations /= k;
        row.mean_sync_iterations = sync_sum / k;
        row.mean_max_compute_time /= k;
        row.mean_compute_time /= k;
      }
      if (row.arrivals > 0) row.mean_arrival_step = arrival_sum / row.arrivals;
      out.rows.push_back(row);
    }
  }
  return out;
}

double log_log_slope(const std::vector<double>& n, const std::vector<double>& y) {
  if (n.size() != y.size() || n.size() < 2) throw Error("log_log_slope: need two or more paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !(y[i] > 0.0)) throw Error("log_log_slope: values must be positive");
    mx += std::log(n[i]) / static_cast<double>(n.size());
    my += std::log(y[i]) / static_cast<double>(n.size());
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double dx = std::log(n[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error("log_log_slope: agent counts must differ");
  return sxy / sxx;
}

void write_log_csv(std::ostream& os, const std::vector<LogRow>& log) {
  os << "step,agent,x,y,psi,v,a,delta,v_ref,path_distance,outer_iterations,sync_iterations,"
        "converged,relaxed,work,disagreement,max_slack,terminal\n";
  for (const auto& r : log) {
    os << r.step << ',' << r.agent << ',' << num(r.state.x) << ',' << num(r.state.y) << ','
       << num(r.state.psi) << ',' << num(r.state.v) << ',' << num(r.input.a) << ',' << num(r.input.delta)
       << ',' << num(r.v_ref) << ',' << num(r.path_distance) << ',' << r.outer_iterations << ','
       << r.sync_iterations << ',' << r.converged << ',' << r.relaxed << ',' << num(r.work) << ','
       << num(r.disagreement) << ',' << num(r.max_slack) << ',' << r.terminal << '\n';
  }
}

std::vector<LogRow> read_log_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("log: empty input");
  std::vector<LogRow> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 18) throw Error("log: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    LogRow r;
    try {
      r.step = std::stoi(f[0]);
      r.agent = std::stoi(f[1]);
      r.state = {std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
      r.input = {std::stod(f[6]), std::stod(f[7])};
      r.v_ref = std::stod(f[8]);
      r.path_distance = std::stod(f[9]);
      r.outer_iterations = std::stoi(f[10]);
      r.sync_iterations = std::stoi(f[11]);
      r.converged = f[12] == "1";
      r.relaxed = f[13] == "1";
      r.work = std::stod(f[14]);
      r.disagreement = std::stod(f[15]);
      r.max_slack = std::stod(f[16]);
      r.terminal = f[17] == "1";
    } catch (const std::exception&) {
      throw Error("log: malformed number on line " + std::to_string(lineno));
    }
    out.push_back(r);
  }
  return out;
}

void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& timing) {
  os << "step,agent,solve_time,sync_time,step_compute_time\n";
  for (const auto& t : timing) {
    os << t.step << ',' << t.agent << ',' << num(t.solve_time) << ',' << num(t.sync_time) << ','
       << num(t.step_compute_time) << '\n';
  }
}

void write_metrics_csv(std::ostream& os, const MetricsReport& m) {
  os << "metric,value\n";
  os << "controller," << m.controller << '\n';
  os << "num_agents," << m.num_agents << '\n';
  os << "seed," << m.seed << '\n';
  os << "status," << m.status << '\n';
  os << "steps," << m.steps << '\n';
  os << "arrival_step," << m.arrival_step << '\n';
  os << "mean_path_deviation," << num(m.mean_path_deviation) << '\n';
  os << "mean_speed_deviation," << num(m.mean_speed_deviation) << '\n';
  os << "min_distance," << num(m.min_distance) << '\n';
  os << "min_coupled_distance," << num(m.min_coupled_distance) << '\n';
  os << "max_step_work," << num(m.max_step_work) << '\n';
  os << "mean_step_work," << num(m.mean_step_work) << '\n';
  os << "max_outer_iterations," << m.max_outer_iterations << '\n';
  os << "mean_outer_iterations," << num(m.mean_outer_iterations) << '\n';
  os << "max_sync_iterations," << m.max_sync_iterations << '\n';
  os << "total_sync_iterations," << m.total_sync_iterations << '\n';
  os << "non_converged_steps," << m.non_converged_steps << '\n';
  os << "relaxed_steps," << m.relaxed_steps << '\n';
  os << "max_disagreement," << num(m.max_disagreement) << '\n';
  for (const auto& [i, a] : m.agents) {
    const std::string p = "agent_" + std::to_string(i) + "_";
    os << p << "path_deviation," << num(a.path_deviation) << '\n';
    os << p << "speed_deviation," << num(a.speed_deviation) << '\n';
    os << p << "arrival_step," << a.arrival_step << '\n';
  }
}

void write_compare_csv(std::ostream& os, const CompareResult& r) {
  os << "controller,num_agents,runs,successes,mean_path_deviation,mean_speed_deviation,"
        "max_path_deviation,mean_max_step_work,mean_outer_iterations,max_outer_iterations,"
        "mean_sync_iterations,non_converged_steps,relaxed_steps,min_distance,arrivals,"
        "mean_arrival_step,max_disagreement\n";
  for (const auto& c : r.rows) {
    os << c.controller << ',' << c.num_agents << ',' << c.runs << ',' << c.successes << ','
       << num(c.mean_path_deviation) << ',' << num(c.mean_speed_deviation) << ','
       << num(c.max_path_deviation) << ',' << num(c.mean_max_step_work) << ','
       << num(c.mean_outer_iterations) << ',' << c.max_outer_iterations << ','
       << num(c.mean_sync_iterations) << ',' << c.non_converged_steps << ',' << c.relaxed_steps << ','
       << num(c.min_distance) << ',' << c.arrivals << ',' << num(c.mean_arrival_step) << ','
       << num(c.max_disagreement) << '\n';
  }
}

void write_compare_timing_csv(std::ostream& os, const CompareResult& r) {
  os << "controller,num_agents,mean_max_compute_time,max_max_compute_time,mean_compute_time\n";
  for (const auto& c : r.rows) {
    os << c.controller << ',' << c.num_agents << ',' << num(c.mean_max_compute_time) << ','
       << num(c.max_max_compute_time) << ',' << num(c.mean_compute_time) << '\n';
  }
}

void write_plot_data_csv(std::ostream& os, const CompareResult& r) {
  os << "series,controller,num_agents,value\n";
  for (const char* series : {"path_deviation", "speed_deviation", "max_step_work"}) {
    for (const auto& c : r.rows) {
      const double v = std::string(series) == "path_deviation"    ? c.mean_path_deviation
                       : std::string(series) == "speed_deviation" ? c.mean_speed_deviation
                                                                  : c.mean_max_step_work;
      os << series << ',' << c.controller << ',' << c.num_agents << ',' << num(v) << '\n';
    }
  }
}

}  // namespace syncdmpc
