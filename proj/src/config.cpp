#include "syncdmpc/config.hpp"

#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"

namespace syncdmpc {

using nlohmann::json;

namespace {

/// Reads keys of one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: " + where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error("config: bad value for " + path_ + key + ": " + e.what());
    }
  }

  template <int N>
  void get_vector(const char* key, Eigen::Matrix<double, N, 1>& out) {
    if (!j_.contains(key)) return;
    std::vector<double> v;
    get(key, v);
    if (v.size() != N) {
      throw Error("config: " + path_ + key + " needs " + std::to_string(N) + " entries");
    }
    for (int i = 0; i < N; ++i) out(i) = v[static_cast<std::size_t>(i)];
  }

  /// Nested object reader; nullptr when the key is absent.
  std::unique_ptr<ObjectReader> sub(const char* key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return std::make_unique<ObjectReader>(j_.at(key), path_ + key + ".");
  }

  const json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }
  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw Error("config: unknown key " + path_ + it.key());
    }
  }

 private:
  std::string where() const { return path_.empty() ? std::string("document") : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json vec_json(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return out;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(arena_width > 0.0) || !(arena_height > 0.0)) throw Error("config: arena_width/arena_height must be positive");
  if (num_agents < 1) throw Error("config: num_agents must be >= 1");
  if (controller != "cmpc" && controller != "scdmpc") {
    throw Error("config: controller must be cmpc or scdmpc, got '" + controller + "'");
  }
  if (max_steps < 0) throw Error("config: max_steps must be nonnegative");
  if (max_non_converged_steps < -1) throw Error("config: max_non_converged_steps must be >= -1");
  if (!(goal_tolerance_position > 0.0) || !(goal_tolerance_heading > 0.0)) {
    throw Error("config: goal tolerances must be positive");
  }
  if (start_sampling.max_attempts < 1) throw Error("config: start_sampling.max_attempts must be >= 1");
  if (start_sampling.heading_min > start_sampling.heading_max) {
    throw Error("config: start_sampling.heading_min exceeds heading_max");
  }
  if (start_sampling.assignment != "sorted_x" && start_sampling.assignment != "sampled") {
    throw Error("config: start_sampling.assignment must be sorted_x or sampled, got '" +
                start_sampling.assignment + "'");
  }
  if (!(reference.profile.cruise_speed > 0.0) || !(reference.profile.acceleration > 0.0) ||
      !(reference.profile.deceleration > 0.0)) {
    throw Error("config: reference profile entries must be positive");
  }
  if (reference.turn_radius < 0.0) throw Error("config: reference.turn_radius must be nonnegative");
  if (topology.kind == "conflict") {
    if (topology.conflict_distance < 0.0) throw Error("config: topology.conflict_distance must be >= 0");
    if (topology.conflict_window < 0.0) throw Error("config: topology.conflict_window must be >= 0");
  } else {
    build_topology(topology, num_agents);
  }
  controller_config().validate();
}

ControllerConfig ScenarioConfig::controller_config() const {
  ControllerConfig c;
  c.vehicle = vehicle;
  c.ocp = ocp;
  c.ocp.arena_width = arena_width;
  c.ocp.arena_height = arena_height;
  c.sync = sync;
  c.qp = qp;
  c.max_outer_iterations = max_outer_iterations;
  c.eps_feas = eps_feas;
  return c;
}

ScenarioConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  ScenarioConfig c;
  ObjectReader r(doc, "");
  r.get("arena_width", c.arena_width);
  r.get("arena_height", c.arena_height);
  r.get("num_agents", c.num_agents);
  r.get("seed", c.seed);
  r.get("controller", c.controller);
  r.get("max_steps", c.max_steps);
  r.get("max_outer_iterations", c.max_outer_iterations);
  r.get("eps_feas", c.eps_feas);
  r.get("goal_tolerance_position", c.goal_tolerance_position);
  r.get("goal_tolerance_heading", c.goal_tolerance_heading);
  r.get("max_non_converged_steps", c.max_non_converged_steps);
  if (auto g = r.sub("goal_formation")) {
    g->get("top_margin", c.goal_formation.top_margin);
    g->finish();
  }
  if (auto s = r.sub("start_sampling")) {
    s->get("margin", c.start_sampling.margin);
    s->get("top_clearance", c.start_sampling.top_clearance);
    s->get("heading_min", c.start_sampling.heading_min);
    s->get("heading_max", c.start_sampling.heading_max);
    s->get("max_attempts", c.start_sampling.max_attempts);
    s->get("assignment", c.start_sampling.assignment);
    s->finish();
  }
  if (auto t = r.sub("topology")) {
    t->get("kind", c.topology.kind);
    t->get("weight", c.topology.weight);
    t->get("conflict_distance", c.topology.conflict_distance);
    t->get("conflict_window", c.topology.conflict_window);
    if (t->has("edges")) {
      const json& edges = t->raw("edges");
      if (!edges.is_array()) throw Error("config: topology.edges must be an array");
      for (const auto& e : edges) {
        if (!e.is_array() || e.size() < 2 || e.size() > 3) {
          throw Error("config: topology.edges entries are [a, b] or [a, b, weight]");
        }
        try {
          c.topology.edges.emplace_back(e[0].get<AgentId>(), e[1].get<AgentId>(),
                                        e.size() == 3 ? e[2].get<double>() : 1.0);
        } catch (const json::exception& ex) {
          throw Error(std::string("config: bad topology edge: ") + ex.what());
        }
      }
    }
    t->finish();
  }
  if (auto s = r.sub("reference")) {
    s->get("cruise_speed", c.reference.profile.cruise_speed);
    s->get("acceleration", c.reference.profile.acceleration);
    s->get("deceleration", c.reference.profile.deceleration);
    s->get("turn_radius", c.reference.turn_radius);
    s->finish();
  }
  if (auto v = r.sub("vehicle")) {
    v->get("wheelbase", c.vehicle.wheelbase);
    v->get("length", c.vehicle.length);
    v->get("dt", c.vehicle.dt);
    v->get("v_min", c.vehicle.v_min);
    v->get("v_max", c.vehicle.v_max);
    v->get("a_min", c.vehicle.a_min);
    v->get("a_max", c.vehicle.a_max);
    v->get("delta_max", c.vehicle.delta_max);
    v->get("da_max", c.vehicle.da_max);
    v->get("ddelta_max", c.vehicle.ddelta_max);
    v->finish();
  }
  if (auto o = r.sub("ocp")) {
    o->get("N_p", c.ocp.N_p);
    o->get("N_u", c.ocp.N_u);
    o->get_vector("Q", c.ocp.Q);
    o->get_vector("Q_f", c.ocp.Q_f);
    o->get_vector("R", c.ocp.R);
    o->get("d_safe", c.ocp.d_safe);
    o->get("safety_margin", c.ocp.safety_margin);
    o->get("coupling_objective_weight", c.ocp.coupling_objective_weight);
    o->finish();
  }
  if (auto s = r.sub("sync")) {
    s->get("eps_position", c.sync.eps_position);
    s->get("eps_heading", c.sync.eps_heading);
    s->get("eps_speed", c.sync.eps_speed);
    s->get("max_iterations", c.sync.max_iterations);
    s->get("self_weight", c.sync.self_weight);
    s->finish();
  }
  if (auto q = r.sub("qp")) {
    q->get("tol", c.qp.tol);
    q->get("max_iter", c.qp.max_iter);
    q->finish();
  }
  r.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string dump_config(const ScenarioConfig& c) {
  json edges = json::array();
  for (const auto& [a, b, w] : c.topology.edges) edges.push_back({a, b, w});
  json j = {
      {"arena_width", c.arena_width},
      {"arena_height", c.arena_height},
      {"num_agents", c.num_agents},
      {"seed", c.seed},
      {"controller", c.controller},
      {"max_steps", c.max_steps},
      {"max_outer_iterations", c.max_outer_iterations},
      {"eps_feas", c.eps_feas},
      {"goal_tolerance_position", c.goal_tolerance_position},
      {"goal_tolerance_heading", c.goal_tolerance_heading},
      {"max_non_converged_steps", c.max_non_converged_steps},
      {"goal_formation", {{"top_margin", c.goal_formation.top_margin}}},
      {"start_sampling",
       {{"margin", c.start_sampling.margin},
        {"top_clearance", c.start_sampling.top_clearance},
        {"heading_min", c.start_sampling.heading_min},
        {"heading_max", c.start_sampling.heading_max},
        {"max_attempts", c.start_sampling.max_attempts},
        {"assignment", c.start_sampling.assignment}}},
      {"topology",
       {{"kind", c.topology.kind},
        {"weight", c.topology.weight},
        {"conflict_distance", c.topology.conflict_distance},
        {"conflict_window", c.topology.conflict_window},
        {"edges", edges}}},
      {"reference",
       {{"cruise_speed", c.reference.profile.cruise_speed},
        {"acceleration", c.reference.profile.acceleration},
        {"deceleration", c.reference.profile.deceleration},
        {"turn_radius", c.reference.turn_radius}}},
      {"vehicle",
       {{"wheelbase", c.vehicle.wheelbase},
        {"length", c.vehicle.length},
        {"dt", c.vehicle.dt},
        {"v_min", c.vehicle.v_min},
        {"v_max", c.vehicle.v_max},
        {"a_min", c.vehicle.a_min},
        {"a_max", c.vehicle.a_max},
        {"delta_max", c.vehicle.delta_max},
        {"da_max", c.vehicle.da_max},
        {"ddelta_max", c.vehicle.ddelta_max}}},
      {"ocp",
       {{"N_p", c.ocp.N_p},
        {"N_u", c.ocp.N_u},
        {"Q", vec_json(c.ocp.Q)},
        {"Q_f", vec_json(c.ocp.Q_f)},
        {"R", vec_json(c.ocp.R)},
        {"d_safe", c.ocp.d_safe},
        {"safety_margin", c.ocp.safety_margin},
        {"coupling_objective_weight", c.ocp.coupling_objective_weight}}},
      {"sync",
       {{"eps_position", c.sync.eps_position},
        {"eps_heading", c.sync.eps_heading},
        {"eps_speed", c.sync.eps_speed},
        {"max_iterations", c.sync.max_iterations},
        {"self_weight", c.sync.self_weight}}},
      {"qp", {{"tol", c.qp.tol}, {"max_iter", c.qp.max_iter}}},
  };
  return j.dump(2) + "\n";
}

CouplingGraph build_topology(const TopologySpec& spec, int n) {
  if (n < 1) throw Error("topology: need at least one agent");
  if (!(spec.weight > 0.0)) throw Error("topology: weight must be positive");
  CouplingGraph g;
  for (AgentId i = 1; i <= n; ++i) g.add_node(i);
  if (spec.kind == "full") {
    for (AgentId a = 1; a <= n; ++a)
      for (AgentId b = a + 1; b <= n; ++b) g.add_edge(a, b, spec.weight);
  } else if (spec.kind == "ring") {
    for (AgentId a = 1; a < n; ++a) g.add_edge(a, a + 1, spec.weight);
    if (n > 2) g.add_edge(n, 1, spec.weight);
  } else if (spec.kind == "example") {
    // Four-agent example graph restricted to 1..n; extra agents chain on.
    const std::pair<AgentId, AgentId> base[] = {{1, 2}, {1, 3}, {2, 3}, {2, 4}};
    for (const auto& [a, b] : base)
      if (b <= n) g.add_edge(a, b, spec.weight);
    for (AgentId k = 5; k <= n; ++k) g.add_edge(k - 1, k, spec.weight);
  } else if (spec.kind == "custom") {
    for (const auto& [a, b, w] : spec.edges) {
      if (a < 1 || a > n || b < 1 || b > n) {
        throw Error("topology: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                    ") outside agents 1.." + std::to_string(n));
      }
      if (a == b) throw Error("topology: self-loop at agent " + std::to_string(a));
      if (!(w > 0.0)) throw Error("topology: non-positive weight on an edge of agent " + std::to_string(a));
      g.add_edge(a, b, w);
    }
  } else if (spec.kind == "conflict") {
    throw Error("topology: conflict graphs are built from reference paths (see make_world)");
  } else {
    throw Error("topology: unknown kind '" + spec.kind + "' (full | ring | example | custom | conflict)");
  }
  return g;
}

}  // namespace syncdmpc
