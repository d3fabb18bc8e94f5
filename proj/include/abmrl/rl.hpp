#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abmrl/env.hpp"
#include "abmrl/mlp.hpp"
#include "abmrl/rng.hpp"

namespace abmrl {

// Joint-population view attached to transitions in multi-agent mode. Agent
// order is the learner roster order; observations are flattened in that order.
struct JointFields {
  std::vector<double> obs;          // concatenated s_t of all learners
  std::vector<int> actions;         // a_t per learner
  std::vector<double> next_obs;     // empty on the final (done) step
  std::vector<int> next_actions;    // empty on the final (done) step
};

struct Transition {
  int agent_id = 0;
  std::vector<double> obs;
  int action = 0;
  double log_prob = 0.0;  // <= 0
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  std::optional<JointFields> joint;
};

// Time-ordered transitions of one agent over one episode.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(size_t capacity = 1 << 20) : capacity_(capacity) {}

  void push(Transition t);
  void clear() { items_.clear(); }
  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](size_t i) const { return items_[i]; }
  const std::vector<Transition>& items() const { return items_; }

 private:
  std::vector<Transition> items_;
  size_t capacity_;
};

enum class Algorithm { kReinforce, kReinforceBaseline, kActorCritic, kMac };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algo);

struct TrainConfig {
  double gamma = 1.0;      // discount
  int lookahead = 5;       // return truncation depth H (steps)
  double alpha_pi = 1e-2;  // actor step size
  double alpha_v = 1e-2;   // local critic step size
  double alpha_q = 1e-2;   // central critic step size
  int epochs = 1;
  Algorithm algo = Algorithm::kReinforce;

  void validate() const;
};

// Truncated discounted returns: G_t = sum_{j<min(H, T-t)} gamma^j r_{t+j}.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma, int lookahead);

// Episode-batch policy gradient: accumulates G_t * grad log pi over the
// buffer, then applies one ascent step of size alpha_pi.
void reinforce_update(Mlp& policy, const ExperienceBuffer& buffer, const TrainConfig& cfg);

// Same, with advantage G_t - v(s_t); the baseline descends half squared
// error toward G_t with step alpha_v.
void reinforce_baseline_update(Mlp& policy, Mlp& value, const ExperienceBuffer& buffer,
                               const TrainConfig& cfg);

// One-step TD actor-critic. Advantage r + gamma*v(s') - v(s) (zero bootstrap
// at done); critic takes the semi-gradient ascent step alpha_v * Adv * grad v(s).
void actor_critic_update(Mlp& policy, Mlp& value, const ExperienceBuffer& buffer,
                         const TrainConfig& cfg);

// Shared full-observation critic: one network whose head i scores learner i's
// joint (observations, actions) input.
struct CentralQ {
  Mlp net;
  int n_agents = 1;
  int obs_dim = 1;
  int n_actions = 2;
  bool include_actions = true;

  static CentralQ make(int n_agents, int obs_dim, int n_actions, const std::vector<int>& hidden,
                       bool include_actions = true);
  int input_dim() const;
  std::vector<double> encode(std::span<const double> joint_obs,
                             std::span<const int> joint_actions) const;
  // Q_i for every i at once.
  std::vector<double> q_values(std::span<const double> joint_obs,
                               std::span<const int> joint_actions) const;
};

// Adv_{i,t} = r + gamma * Q_i(joint') - Q_i(joint), zero bootstrap at done.
double mac_advantage(const Transition& t, const CentralQ& q, double gamma);

// Training-phase update: per learner, advantage-weighted policy ascent from
// the shared critic; the critic itself moves by alpha_q * Adv * grad Q_i on
// the current joint input (bootstrap target held fixed), accumulated over all
// learners and steps and applied once. Buffers must be time-aligned.
void mac_train_step(std::span<Mlp* const> actors, CentralQ& central_q,
                    std::span<const ExperienceBuffer> buffers, const TrainConfig& cfg);

// Deployed-phase update: local advantage only; the shared critic is untouched.
void mac_deployed_step(Mlp& actor, Mlp& local_critic, const ExperienceBuffer& buffer,
                       const TrainConfig& cfg);

// Agent driven by a softmax policy net over the first input_dim() entries of
// the observation.
class PolicyAgent : public Agent {
 public:
  PolicyAgent(Mlp policy, std::string name = "policy");

  void reset(RngStream rng) override;
  int act(const std::vector<double>& obs) override;

  double last_log_prob() const { return last_log_prob_; }
  std::vector<double> view(const std::vector<double>& obs) const;

  Mlp& policy() { return policy_; }
  const Mlp& policy() const { return policy_; }
  const std::string& name() const { return name_; }

 private:
  Mlp policy_;
  RngStream rng_;
  double last_log_prob_ = 0.0;
  std::string name_;
};

// Collects learner transitions during an episode or window; pass hook() to
// run_window/run_episode, then build() once the window is over. In
// multi-agent mode every transition carries the joint fields.
class EpisodeRecorder {
 public:
  EpisodeRecorder(std::vector<int> learner_ids, std::vector<PolicyAgent*> learners,
                  bool multi_agent);

  StepHook hook();
  // Builds one buffer per learner; the final step of the window is marked
  // done (zero bootstrap) unless the env finished earlier on its own.
  std::vector<ExperienceBuffer> build() const;
  void clear();

 private:
  std::vector<int> ids_;
  std::vector<PolicyAgent*> learners_;
  bool multi_;
  // per step: per learner obs slice, actions, log probs, rewards
  std::vector<std::vector<std::vector<double>>> obs_;
  std::vector<std::vector<int>> actions_;
  std::vector<std::vector<double>> log_probs_;
  std::vector<std::vector<double>> rewards_;
  std::vector<std::vector<double>> next_obs_tail_;  // per learner, obs after the final step
};

}  // namespace abmrl
