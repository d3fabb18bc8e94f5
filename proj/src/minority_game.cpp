#include "abmrl/minority_game.hpp"

#include <algorithm>
#include <cmath>

#include "abmrl/errors.hpp"

namespace abmrl {

void GameConfig::validate() const {
  require(n_agents >= 2, "GameConfig: n_agents must be >= 2");
  require(memory_m >= 1, "GameConfig: memory_m must be >= 1");
  require(memory_m <= 20, "GameConfig: memory_m too large (tables have 2^m entries)");
  require(strategies_k >= 1, "GameConfig: strategies_k must be >= 1");
  require(rl_window >= 1, "GameConfig: rl_window must be >= 1");
  require(horizon >= 1, "GameConfig: horizon must be >= 1");
  for (int id : rl_agent_ids)
    require(id >= 0 && id < n_agents, "GameConfig: rl agent id out of range");
  if (initial_history) {
    require(static_cast<int>(initial_history->size()) == obs_window(),
            "GameConfig: initial_history length must equal max(memory_m, rl_window)");
    for (int b : *initial_history)
      require(b == 0 || b == 1, "GameConfig: initial_history entries must be bits");
  }
}

MinorityOutcome minority_outcome(std::span<const int> actions, RngStream& tie_rng) {
  require(actions.size() >= 2, "minority_outcome: need at least two actions");
  int ones = 0;
  for (int a : actions) {
    require(a == 0 || a == 1, "minority_outcome: actions must be 0 or 1");
    ones += a;
  }
  int zeros = static_cast<int>(actions.size()) - ones;
  if (ones < zeros) return {1, false};
  if (zeros < ones) return {0, false};
  return {tie_rng.bit(), true};
}

std::vector<StrategyTable> draw_strategy_book(int memory_m, int strategies_k, RngStream& rng) {
  require(memory_m >= 1 && strategies_k >= 1, "draw_strategy_book: m and k must be >= 1");
  size_t entries = size_t{1} << memory_m;
  std::vector<StrategyTable> book(strategies_k);
  for (auto& table : book) {
    table.action.resize(entries);
    for (auto& a : table.action) a = static_cast<uint8_t>(rng.bit());
  }
  auto initial = static_cast<size_t>(rng.below(strategies_k));
  if (initial != 0) std::swap(book[0], book[initial]);
  return book;
}

std::vector<double> mg_rl_observation(const std::deque<int>& history, int width) {
  require(static_cast<int>(history.size()) >= width, "mg_rl_observation: history too short");
  std::vector<double> obs(width);
  for (int j = 0; j < width; ++j) obs[j] = static_cast<double>(history[j]);
  return obs;
}

double mg_reward(int action, const MinorityOutcome& outcome) {
  return (!outcome.tie && action == outcome.minority) ? 1.0 : 0.0;
}

BasicMgAgent::BasicMgAgent(int memory_m, int strategies_k, RngStream strategy_rng)
    : memory_m_(memory_m), tables_(draw_strategy_book(memory_m, strategies_k, strategy_rng)) {}

void BasicMgAgent::reset(RngStream) {
  for (auto& t : tables_) t.score = 0;
  pending_index_ = -1;
}

int BasicMgAgent::history_index(const std::vector<double>& obs) const {
  require(static_cast<int>(obs.size()) >= memory_m_, "BasicMgAgent: observation too narrow");
  int idx = 0;
  for (int j = 0; j < memory_m_; ++j)
    if (obs[j] != 0.0) idx |= 1 << j;
  return idx;
}

void BasicMgAgent::score_tables(int history_index, int winner) {
  for (auto& t : tables_)
    if (t.action[static_cast<size_t>(history_index)] == winner) ++t.score;
}

int BasicMgAgent::select_action(int history_index) const {
  int best = 0;
  for (size_t i = 1; i < tables_.size(); ++i)
    if (tables_[i].score > tables_[best].score) best = static_cast<int>(i);
  return tables_[static_cast<size_t>(best)].action[static_cast<size_t>(history_index)];
}

int BasicMgAgent::act(const std::vector<double>& obs) {
  // The newest observation bit is the winner of the round this agent last
  // acted in; settle that round's scores before choosing again.
  if (pending_index_ >= 0) score_tables(pending_index_, obs[0] != 0.0 ? 1 : 0);
  pending_index_ = history_index(obs);
  return select_action(pending_index_);
}

BasicMgAgent BasicMgAgent::mirrored() const {
  BasicMgAgent copy = *this;
  int mask = (1 << memory_m_) - 1;
  for (size_t k = 0; k < tables_.size(); ++k) {
    for (int idx = 0; idx <= mask; ++idx)
      copy.tables_[k].action[static_cast<size_t>(idx)] =
          static_cast<uint8_t>(1 - tables_[k].action[static_cast<size_t>(idx ^ mask)]);
    copy.tables_[k].score = tables_[k].score;
  }
  copy.pending_index_ = -1;
  return copy;
}

void update_scores(std::span<BasicMgAgent* const> agents, int history_index, int winner) {
  for (BasicMgAgent* a : agents) a->score_tables(history_index, winner);
}

MinorityGameEnv::MinorityGameEnv(GameConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<std::vector<double>> MinorityGameEnv::reset(uint64_t seed) {
  RngStream root(seed, "mg-env");
  tie_rng_ = root.fork("tie");
  history_.clear();
  if (cfg_.initial_history) {
    for (int b : *cfg_.initial_history) history_.push_back(b);
  } else {
    RngStream warmup = root.fork("warmup");
    for (int j = 0; j < cfg_.obs_window(); ++j) history_.push_back(warmup.bit());
  }
  step_count_ = 0;
  done_ = false;
  ready_ = true;
  summary_.assign(3, 0.0);
  auto obs = mg_rl_observation(history_, cfg_.obs_window());
  return std::vector<std::vector<double>>(static_cast<size_t>(cfg_.n_agents), obs);
}

StepResult MinorityGameEnv::step(const std::vector<int>& joint_actions) {
  require(ready_, "MinorityGameEnv::step: call reset first");
  require(!done_, "MinorityGameEnv::step: episode already finished");
  require(static_cast<int>(joint_actions.size()) == cfg_.n_agents,
          "MinorityGameEnv::step: need one action per agent");

  auto outcome = minority_outcome(joint_actions, tie_rng_);
  int ones = 0;
  for (int a : joint_actions) ones += a;

  StepResult result;
  result.rewards.resize(joint_actions.size());
  for (size_t i = 0; i < joint_actions.size(); ++i)
    result.rewards[i] = mg_reward(joint_actions[i], outcome);

  history_.push_front(outcome.minority);
  history_.pop_back();
  ++step_count_;
  done_ = step_count_ >= cfg_.horizon;
  result.done = done_;
  summary_ = {static_cast<double>(ones), static_cast<double>(outcome.minority),
              outcome.tie ? 1.0 : 0.0};

  auto obs = mg_rl_observation(history_, cfg_.obs_window());
  result.observations.assign(static_cast<size_t>(cfg_.n_agents), obs);
  return result;
}

std::vector<std::string> MinorityGameEnv::summary_columns() const {
  return {"count_choosing_1", "minority", "tie"};
}

std::vector<double> MinorityGameEnv::last_summary() const { return summary_; }

nlohmann::json MinorityGameEnv::config_json() const {
  nlohmann::json j{{"env", "minority_game"},
                   {"n_agents", cfg_.n_agents},
                   {"memory_m", cfg_.memory_m},
                   {"strategies_k", cfg_.strategies_k},
                   {"horizon", cfg_.horizon},
                   {"rl_agent_ids", cfg_.rl_agent_ids},
                   {"rl_window", cfg_.rl_window}};
  if (cfg_.initial_history) j["initial_history"] = *cfg_.initial_history;
  return j;
}

int detect_cycle(std::span<const int> seq, int max_period, int window) {
  require(max_period >= 1, "detect_cycle: max_period must be >= 1");
  int n = static_cast<int>(seq.size());
  int w = std::min(window, n);
  if (w < 2) return 0;
  const int* tail = seq.data() + (n - w);
  for (int p = 1; p <= max_period && 2 * p <= w; ++p) {
    bool ok = true;
    for (int i = 0; i + p < w && ok; ++i) ok = tail[i] == tail[i + p];
    if (ok) return p;
  }
  return 0;
}

bool pattern_matches(std::span<const int> period, std::span<const int> target) {
  if (period.size() != target.size()) return false;
  size_t n = period.size();
  for (int flip = 0; flip <= 1; ++flip) {
    for (size_t rot = 0; rot < n; ++rot) {
      bool ok = true;
      for (size_t i = 0; i < n && ok; ++i) {
        int v = period[(i + rot) % n];
        if (flip) v = 1 - v;
        ok = v == target[i];
      }
      if (ok) return true;
    }
  }
  return false;
}

}  // namespace abmrl
