#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "syncdmpc/experiment.hpp"

namespace py = pybind11;
using namespace syncdmpc;

namespace {

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["controller"] = m.controller;
  d["num_agents"] = m.num_agents;
  d["seed"] = m.seed;
  d["status"] = m.status;
  d["message"] = m.message;
  d["steps"] = m.steps;
  d["arrival_step"] = m.arrival_step;
  d["mean_path_deviation"] = m.mean_path_deviation;
  d["mean_speed_deviation"] = m.mean_speed_deviation;
  d["min_distance"] = m.min_distance;
  d["min_coupled_distance"] = m.min_coupled_distance;
  d["max_step_work"] = m.max_step_work;
  d["mean_step_work"] = m.mean_step_work;
  d["max_outer_iterations"] = m.max_outer_iterations;
  d["total_sync_iterations"] = m.total_sync_iterations;
  d["non_converged_steps"] = m.non_converged_steps;
  d["max_disagreement"] = m.max_disagreement;
  d["max_compute_time"] = m.max_compute_time;
  return d;
}

py::list log_rows(const std::vector<LogRow>& log) {
  py::list rows;
  for (const auto& r : log) {
    py::dict d;
    d["step"] = r.step;
    d["agent"] = r.agent;
    d["x"] = r.state.x;
    d["y"] = r.state.y;
    d["psi"] = r.state.psi;
    d["v"] = r.state.v;
    d["a"] = r.input.a;
    d["delta"] = r.input.delta;
    d["outer_iterations"] = r.outer_iterations;
    d["sync_iterations"] = r.sync_iterations;
    d["terminal"] = r.terminal;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Distributed and centralized MPC for multi-vehicle formation building";

  py::register_exception<Error>(m, "SyncDmpcError", PyExc_ValueError);

  m.def("default_config", [] { return dump_config(ScenarioConfig{}); },
        "Canonical JSON of the default scenario.");
  m.def("normalize_config", [](const std::string& json) {
    const auto cfg = parse_config(json);
    cfg.validate();
    return dump_config(cfg);
  }, py::arg("config_json"), "Validated canonical JSON with every field.");

  m.def("run", [](const std::string& json) {
    const auto cfg = parse_config(json);
    cfg.validate();
    RolloutResult r;
    {
      py::gil_scoped_release release;
      r = rollout(generate_scenario(cfg));
    }
    py::dict out;
    out["metrics"] = metrics_dict(r.metrics);
    out["log"] = log_rows(r.log);
    std::ostringstream csv;
    write_log_csv(csv, r.log);
    out["trajectory_csv"] = csv.str();
    return out;
  }, py::arg("config_json"), "Closed-loop run of one scenario.");

  m.def("compare", [](const std::string& json, const std::vector<int>& agents,
                      const std::vector<std::uint64_t>& seeds) {
    const auto cfg = parse_config(json);
    cfg.validate();
    CompareResult r;
    {
      py::gil_scoped_release release;
      r = compare(cfg, agents, seeds);
    }
    std::ostringstream table, plot;
    write_compare_csv(table, r);
    write_plot_data_csv(plot, r);
    py::list runs;
    for (const auto& run : r.runs) runs.append(metrics_dict(run));
    py::dict out;
    out["compare_csv"] = table.str();
    out["plot_data_csv"] = plot.str();
    out["runs"] = runs;
    return out;
  }, py::arg("config_json"), py::arg("agents"), py::arg("seeds"),
     "CMPC against SCDMPC over agent counts and seeds.");

  m.def("vehicle_step", [](std::array<double, 4> s, std::array<double, 2> u) {
    const auto n = step({s[0], s[1], s[2], s[3]}, {u[0], u[1]}, VehicleParams{});
    return std::array<double, 4>{n.x, n.y, n.psi, n.v};
  }, py::arg("state"), py::arg("input"), "One step of the default vehicle model: (x, y, psi, v), (a, delta).");

  m.def("dubins", [](std::array<double, 3> start, std::array<double, 3> goal, double radius) {
    const auto p = dubins_shortest_path({start[0], start[1], start[2]}, {goal[0], goal[1], goal[2]}, radius);
    return py::make_tuple(to_string(p.word()), p.length());
  }, py::arg("start"), py::arg("goal"), py::arg("radius"), "Shortest Dubins word and its length.");

  m.def("has_spanning_tree", [](int n, const std::vector<std::pair<AgentId, AgentId>>& edges) {
    CouplingGraph g;
    for (AgentId i = 1; i <= n; ++i) g.add_node(i);
    for (const auto& [a, b] : edges) g.add_edge(a, b);
    return has_spanning_tree(g);
  }, py::arg("num_agents"), py::arg("edges"), "Connectivity of an unweighted graph over agents 1..n.");
}
