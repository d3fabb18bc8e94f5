#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abmrl/rng.hpp"

namespace abmrl {

// Result of advancing an environment by one decision period.
// observations.size() == rewards.size() == number of agents; once done is
// raised it stays raised for the rest of the episode.
struct StepResult {
  std::vector<std::vector<double>> observations;
  std::vector<double> rewards;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;

  // Reinitializes all internal state from seed; returns initial observations.
  virtual std::vector<std::vector<double>> reset(uint64_t seed) = 0;

  // One joint decision period. Throws ContractError on wrong action count or
  // stepping a finished episode.
  virtual StepResult step(const std::vector<int>& joint_actions) = 0;

  virtual int num_agents() const = 0;
  virtual int num_actions() const = 0;
  virtual int obs_dim() const = 0;
  virtual bool done() const = 0;

  // Per-step aggregate columns for traces (attendance, attack rate, ...).
  virtual std::vector<std::string> summary_columns() const = 0;
  virtual std::vector<double> last_summary() const = 0;

  virtual nlohmann::json config_json() const = 0;
};

// A behavioral model driving one agent. reset() hands the agent its private
// random stream and clears per-episode state; identity (strategy tables,
// network weights) persists across resets.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void reset(RngStream rng) = 0;
  virtual int act(const std::vector<double>& obs) = 0;
};

// Replayable record of one episode: seeds and config in the manifest, the
// per-step table in CSV (step, action_0.., reward_0.., summary columns).
struct EpisodeTrace {
  nlohmann::json config;
  uint64_t seed = 0;
  std::vector<std::string> summary_cols;
  std::vector<std::vector<int>> actions;     // [step][agent]
  std::vector<std::vector<double>> rewards;  // [step][agent]
  std::vector<std::vector<double>> summary;  // [step][column]

  int steps() const { return static_cast<int>(actions.size()); }
  std::string csv() const;
  nlohmann::json manifest() const;
  void write(const std::string& dir) const;  // manifest.json + trace.csv
  bool operator==(const EpisodeTrace& other) const = default;
};

// Hook invoked after every step; obs_before are the observations the agents
// acted on, result holds rewards and the observations that follow.
using StepHook = std::function<void(int step, const std::vector<std::vector<double>>& obs_before,
                                    const std::vector<int>& actions, const StepResult& result)>;

// Steps an already-reset env for at most max_steps, using current agent state.
// Appends to trace when given. Returns the number of steps taken.
int run_window(Env& env, std::span<Agent* const> agents,
               std::vector<std::vector<double>>& obs, int max_steps, EpisodeTrace* trace,
               const StepHook& hook = {});

// Full deterministic episode: resets env and agents from seed, runs up to
// horizon steps (earlier if the env finishes), returns the trace.
EpisodeTrace run_episode(Env& env, std::span<Agent* const> agents, int horizon, uint64_t seed,
                         const StepHook& hook = {});

}  // namespace abmrl
