#include "abmrl/env.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "abmrl/errors.hpp"

namespace abmrl {

namespace {

void format_double(std::ostream& out, double v) {
  // Shortest round-trip representation keeps files byte-stable across runs.
  char buf[32];
  snprintf(buf, sizeof(buf), "%.17g", v);
  double back = strtod(buf, nullptr);
  if (back == v) {
    for (int prec = 1; prec <= 16; ++prec) {
      char shorter[32];
      snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      if (strtod(shorter, nullptr) == v) {
        out << shorter;
        return;
      }
    }
  }
  out << buf;
}

}  // namespace

std::string EpisodeTrace::csv() const {
  std::ostringstream out;
  size_t n = actions.empty() ? 0 : actions[0].size();
  out << "step";
  for (size_t i = 0; i < n; ++i) out << ",action_" << i;
  for (size_t i = 0; i < n; ++i) out << ",reward_" << i;
  for (const auto& c : summary_cols) out << "," << c;
  out << "\n";
  for (size_t t = 0; t < actions.size(); ++t) {
    out << t;
    for (int a : actions[t]) out << "," << a;
    for (double r : rewards[t]) {
      out << ",";
      format_double(out, r);
    }
    for (double s : summary[t]) {
      out << ",";
      format_double(out, s);
    }
    out << "\n";
  }
  return out.str();
}

nlohmann::json EpisodeTrace::manifest() const {
  return nlohmann::json{{"config", config}, {"seed", seed}, {"steps", steps()}};
}

void EpisodeTrace::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream m(dir + "/manifest.json");
    if (!m) throw ConfigError("EpisodeTrace::write: cannot open manifest in '" + dir + "'");
    m << manifest().dump(2) << "\n";
  }
  std::ofstream c(dir + "/trace.csv");
  if (!c) throw ConfigError("EpisodeTrace::write: cannot open trace.csv in '" + dir + "'");
  c << csv();
}

int run_window(Env& env, std::span<Agent* const> agents,
               std::vector<std::vector<double>>& obs, int max_steps, EpisodeTrace* trace,
               const StepHook& hook) {
  require(static_cast<int>(agents.size()) == env.num_agents(),
          "run_window: agent count does not match env");
  require(max_steps >= 1, "run_window: max_steps must be >= 1");
  std::vector<int> actions(agents.size(), 0);
  int taken = 0;
  for (int t = 0; t < max_steps && !env.done(); ++t) {
    for (size_t i = 0; i < agents.size(); ++i) actions[i] = agents[i]->act(obs[i]);
    StepResult result = env.step(actions);
    if (trace) {
      trace->actions.push_back(actions);
      trace->rewards.push_back(result.rewards);
      trace->summary.push_back(env.last_summary());
    }
    if (hook) hook(t, obs, actions, result);
    obs = std::move(result.observations);
    ++taken;
    if (result.done) break;
  }
  return taken;
}

EpisodeTrace run_episode(Env& env, std::span<Agent* const> agents, int horizon, uint64_t seed,
                         const StepHook& hook) {
  require(horizon >= 1, "run_episode: horizon must be >= 1");
  require(static_cast<int>(agents.size()) == env.num_agents(),
          "run_episode: agent count does not match env");
  RngStream root(seed, "episode");
  auto obs = env.reset(seed);
  RngStream agent_root = root.fork("agents");
  for (size_t i = 0; i < agents.size(); ++i)
    agents[i]->reset(agent_root.fork("agent-" + std::to_string(i)));
  EpisodeTrace trace;
  trace.config = env.config_json();
  trace.seed = seed;
  trace.summary_cols = env.summary_columns();
  run_window(env, agents, obs, horizon, &trace, hook);
  return trace;
}

}  // namespace abmrl
