#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "abmrl/env.hpp"
#include "abmrl/rng.hpp"

namespace abmrl {

struct GameConfig {
  int n_agents = 301;
  int memory_m = 2;       // history bits a strategy conditions on
  int strategies_k = 2;   // strategy tables per default agent
  int horizon = 500;
  std::vector<int> rl_agent_ids;
  int rl_window = 3;      // learner observation width L
  // Overrides the random warm-up history (newest first); used by the
  // relabeling harness. Length must be max(memory_m, rl_window).
  std::optional<std::vector<int>> initial_history;

  int obs_window() const { return std::max(memory_m, rl_window); }
  void validate() const;
};

// Lookup from the last m winning groups to an action, plus its running score.
// Index convention: bit j of the table index is the winner j steps back
// (newest first), so index = h[0] + 2*h[1] + ... + 2^(m-1)*h[m-1].
struct StrategyTable {
  std::vector<uint8_t> action;  // 2^m entries
  int score = 0;
};

// Outcome of one round: the strictly smaller group wins; equal counts set the
// tie flag and the declared winner comes from a fair coin so the public
// history stays well-defined.
struct MinorityOutcome {
  int minority = 0;
  bool tie = false;
};
MinorityOutcome minority_outcome(std::span<const int> actions, RngStream& tie_rng);

// k i.i.d. uniform tables (drawn with replacement). One table is designated
// the initial strategy uniformly at random and swapped to index 0, where the
// lowest-index tie-break selects it until scores separate.
std::vector<StrategyTable> draw_strategy_book(int memory_m, int strategies_k, RngStream& rng);

// Newest-first window of the last `width` winners as 0/1 features.
std::vector<double> mg_rl_observation(const std::deque<int>& history, int width);

// 1 iff the action hit the minority and the round was not a tie.
double mg_reward(int action, const MinorityOutcome& outcome);

// Default behavioral model: keeps k scored strategy tables and plays the
// entry of the currently best one. Scores update from the public winner
// stream: every table earns a point whenever its prescribed action for the
// pre-round history equals the realized winner, whether or not it was used.
class BasicMgAgent : public Agent {
 public:
  BasicMgAgent(int memory_m, int strategies_k, RngStream strategy_rng);

  void reset(RngStream rng) override;  // zeroes scores; keeps the tables
  int act(const std::vector<double>& obs) override;

  // Scores all tables against the declared winner at the given history index.
  void score_tables(int history_index, int winner);
  int select_action(int history_index) const;  // best score, lowest index wins ties

  const std::vector<StrategyTable>& tables() const { return tables_; }
  std::vector<StrategyTable>& tables() { return tables_; }
  int memory() const { return memory_m_; }

  // Relabeled copy: actions complemented, index bits flipped. The mirrored
  // population run on the mirrored history reproduces the game bit-flipped.
  BasicMgAgent mirrored() const;

 private:
  int history_index(const std::vector<double>& obs) const;

  int memory_m_;
  std::vector<StrategyTable> tables_;
  int pending_index_ = -1;  // history index the last action was based on
};

void update_scores(std::span<BasicMgAgent* const> agents, int history_index, int winner);

class MinorityGameEnv : public Env {
 public:
  explicit MinorityGameEnv(GameConfig cfg);

  std::vector<std::vector<double>> reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_actions) override;

  int num_agents() const override { return cfg_.n_agents; }
  int num_actions() const override { return 2; }
  int obs_dim() const override { return cfg_.obs_window(); }
  bool done() const override { return done_; }
  std::vector<std::string> summary_columns() const override;
  std::vector<double> last_summary() const override;
  nlohmann::json config_json() const override;

  const GameConfig& config() const { return cfg_; }
  const std::deque<int>& history() const { return history_; }

 private:
  GameConfig cfg_;
  std::deque<int> history_;  // newest first, fixed length obs_window()
  RngStream tie_rng_;
  int step_count_ = 0;
  bool done_ = false;
  bool ready_ = false;
  std::vector<double> summary_;
};

// Smallest period p <= max_period such that the tail of `seq` (up to
// `window` entries) is p-periodic; 0 when none fits.
int detect_cycle(std::span<const int> seq, int max_period, int window);

// True when `period` equals `target` up to rotation and/or global bit flip.
bool pattern_matches(std::span<const int> period, std::span<const int> target);

}  // namespace abmrl
