// Exit codes: 0 ok, 1 config or placement error, 2 rollout failure,
// 3 spanning-tree verdict failed. Data goes to files, diagnostics to stderr.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "syncdmpc/experiment.hpp"

namespace fs = std::filesystem;
using namespace syncdmpc;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRolloutFailure = 2;
constexpr int kGraphFailure = 3;

template <class Writer>
void write_file(const fs::path& path, Writer&& write) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write(os);
}

ScenarioConfig read_config(const std::string& path) {
  if (!fs::exists(path)) throw Error("config: no such file: " + path);
  return load_config(path);
}

fs::path prepare_out(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

// The run-level failure verdict shared by run and compare.
std::optional<std::string> failure(const MetricsReport& m, const ScenarioConfig& cfg) {
  if (!m.success()) return m.status + (m.message.empty() ? "" : ": " + m.message);
  if (cfg.max_non_converged_steps >= 0 && m.non_converged_steps > cfg.max_non_converged_steps) {
    return std::to_string(m.non_converged_steps) + " non-converged steps exceed the limit of " +
           std::to_string(cfg.max_non_converged_steps);
  }
  return std::nullopt;
}

int cmd_run(const std::string& config, const std::optional<std::string>& controller,
            const std::optional<std::uint64_t>& seed, const std::string& out, bool trace) {
  ScenarioConfig cfg = read_config(config);
  if (controller) cfg.controller = *controller;
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const World world = generate_scenario(cfg);
  RolloutOptions opts;
  opts.trace_messages = trace;
  const RolloutResult r = rollout(world, opts);
  const fs::path dir = prepare_out(out);
  write_file(dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, r.metrics); });
  write_file(dir / "trajectory.csv", [&](std::ostream& os) { write_log_csv(os, r.log); });
  write_file(dir / "timing.csv", [&](std::ostream& os) { write_timing_csv(os, r.timing); });
  if (trace) {
    write_file(dir / "trace.csv", [&](std::ostream& os) {
      MessageBus::write_trace_header(os);
      MessageBus::write_trace(os, r.trace);
    });
  }
  if (const auto why = failure(r.metrics, cfg)) {
    std::cerr << "syncdmpc run: " << *why << '\n';
    return kRolloutFailure;
  }
  return kOk;
}

int cmd_compare(const std::string& config, const std::vector<int>& agents, int seeds, const std::string& out) {
  const ScenarioConfig cfg = read_config(config);
  cfg.validate();
  if (agents.empty()) throw Error("compare: --agents needs at least one count");
  if (seeds < 1) throw Error("compare: --seeds must be >= 1");
  std::vector<std::uint64_t> seed_list;
  for (int s = 1; s <= seeds; ++s) seed_list.push_back(static_cast<std::uint64_t>(s));
  const CompareResult r = compare(cfg, agents, seed_list);
  const fs::path dir = prepare_out(out);
  write_file(dir / "compare.csv", [&](std::ostream& os) { write_compare_csv(os, r); });
  write_file(dir / "compare_timing.csv", [&](std::ostream& os) { write_compare_timing_csv(os, r); });
  write_file(dir / "plot_data.csv", [&](std::ostream& os) { write_plot_data_csv(os, r); });
  int failed = 0;
  for (const auto& m : r.runs) {
    ScenarioConfig run_cfg = cfg;
    run_cfg.num_agents = m.num_agents;
    if (const auto why = failure(m, run_cfg)) {
      std::cerr << "syncdmpc compare: " << m.controller << " n=" << m.num_agents << " seed=" << m.seed << ": "
                << *why << '\n';
      ++failed;
    }
  }
  return failed > 0 ? kRolloutFailure : kOk;
}

int cmd_validate_graph(const std::string& config) {
  const ScenarioConfig cfg = read_config(config);
  cfg.validate();
  const CouplingGraph g =
      cfg.topology.kind == "conflict" ? generate_scenario(cfg).graph : build_topology(cfg.topology, cfg.num_agents);
  bool ok = true;
  for (AgentId i : g.nodes()) {
    const bool tree = has_spanning_tree(subgraph(g, i));
    std::cerr << "sub-graph " << i << ": " << (tree ? "spanning tree" : "no spanning tree") << '\n';
    if (!tree) {
      std::cerr << "syncdmpc validate-graph: sub-graph of agent " << i << " has no spanning tree\n";
      ok = false;
    }
  }
  // Closed neighbourhoods are connected by construction; consensus across
  // the whole network additionally needs one agent reaching all others.
  if (!has_spanning_tree(g)) {
    const AgentId first = g.nodes().front();
    std::set<AgentId> seen{first};
    std::vector<AgentId> frontier{first};
    while (!frontier.empty()) {
      const AgentId i = frontier.back();
      frontier.pop_back();
      for (AgentId q : g.neighbors(i)) {
        if (seen.insert(q).second) frontier.push_back(q);
      }
    }
    std::ostringstream unreachable;
    for (AgentId i : g.nodes()) {
      if (!seen.count(i)) unreachable << ' ' << i;
    }
    std::cerr << "syncdmpc validate-graph: coupling graph is disconnected; unreachable from agent " << first
              << ":" << unreachable.str() << '\n';
    ok = false;
  }
  return ok ? kOk : kGraphFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed and centralized MPC for multi-vehicle formation building"};
  app.require_subcommand(1);

  std::string config, out = ".";
  std::optional<std::string> controller;
  std::optional<std::uint64_t> seed;
  bool trace = false;
  auto* run = app.add_subcommand("run", "Closed-loop run of one scenario");
  run->add_option("config", config, "Scenario config (JSON)")->required();
  run->add_option("--controller", controller, "cmpc | scdmpc")->check(CLI::IsMember({"cmpc", "scdmpc"}));
  run->add_option("--seed", seed, "Scenario seed");
  run->add_option("--out", out, "Output directory");
  run->add_flag("--trace", trace, "Also write the message trace");

  std::vector<int> agents{2, 3, 4, 5, 6};
  int seeds = 5;
  auto* cmp = app.add_subcommand("compare", "CMPC against SCDMPC over agent counts and seeds");
  cmp->add_option("config", config, "Scenario config (JSON)")->required();
  cmp->add_option("--agents", agents, "Agent counts, comma separated")->delimiter(',');
  cmp->add_option("--seeds", seeds, "Seeds 1..K");
  cmp->add_option("--out", out, "Output directory");

  auto* val = app.add_subcommand("validate-graph", "Spanning-tree verdicts of the coupling sub-graphs");
  val->add_option("config", config, "Scenario config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cerr, std::cerr) == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(config, controller, seed, out, trace);
    if (cmp->parsed()) return cmd_compare(config, agents, seeds, out);
    return cmd_validate_graph(config);
  } catch (const std::exception& e) {
    std::cerr << "syncdmpc: " << e.what() << '\n';
    return kConfigError;
  }
}
