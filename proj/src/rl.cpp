#include "abmrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "abmrl/errors.hpp"

namespace abmrl {

void ExperienceBuffer::push(Transition t) {
  require(items_.size() < capacity_, "ExperienceBuffer::push: capacity exceeded");
  require(t.log_prob <= 0.0, "ExperienceBuffer::push: log_prob must be <= 0");
  items_.push_back(std::move(t));
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "reinforce") return Algorithm::kReinforce;
  if (name == "reinforce_baseline") return Algorithm::kReinforceBaseline;
  if (name == "actor_critic") return Algorithm::kActorCritic;
  if (name == "mac") return Algorithm::kMac;
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::kReinforce: return "reinforce";
    case Algorithm::kReinforceBaseline: return "reinforce_baseline";
    case Algorithm::kActorCritic: return "actor_critic";
    case Algorithm::kMac: return "mac";
  }
  return "?";
}

void TrainConfig::validate() const {
  require(gamma >= 0.0 && gamma <= 1.0, "TrainConfig: gamma out of [0,1]");
  require(lookahead >= 1, "TrainConfig: lookahead must be >= 1");
  require(alpha_pi > 0.0 && alpha_v > 0.0 && alpha_q > 0.0,
          "TrainConfig: step sizes must be positive");
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    int lookahead) {
  require(lookahead >= 1, "compute_returns: lookahead must be >= 1");
  size_t n = rewards.size();
  std::vector<double> returns(n, 0.0);
  for (size_t t = 0; t < n; ++t) {
    size_t depth = std::min<size_t>(lookahead, n - t);
    double g = 0.0;
    double w = 1.0;
    for (size_t j = 0; j < depth; ++j) {
      g += w * rewards[t + j];
      w *= gamma;
    }
    returns[t] = g;
  }
  return returns;
}

namespace {

bool warn_if_empty(const ExperienceBuffer& buffer, const char* who) {
  if (!buffer.empty()) return false;
  std::cerr << "warn: " << who << " called with empty buffer; skipping\n";
  return true;
}

}  // namespace

void reinforce_update(Mlp& policy, const ExperienceBuffer& buffer, const TrainConfig& cfg) {
  cfg.validate();
  if (warn_if_empty(buffer, "reinforce_update")) return;
  std::vector<double> rewards;
  rewards.reserve(buffer.size());
  for (const auto& t : buffer.items()) rewards.push_back(t.reward);
  auto returns = compute_returns(rewards, cfg.gamma, cfg.lookahead);

  MlpGrad acc = MlpGrad::zeros_like(policy);
  for (size_t t = 0; t < buffer.size(); ++t) {
    if (returns[t] == 0.0) continue;
    acc.add(policy_log_grad(policy, buffer[t].obs, buffer[t].action), returns[t]);
  }
  axpy(policy, cfg.alpha_pi, acc);
}

void reinforce_baseline_update(Mlp& policy, Mlp& value, const ExperienceBuffer& buffer,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (warn_if_empty(buffer, "reinforce_baseline_update")) return;
  std::vector<double> rewards;
  rewards.reserve(buffer.size());
  for (const auto& t : buffer.items()) rewards.push_back(t.reward);
  auto returns = compute_returns(rewards, cfg.gamma, cfg.lookahead);

  MlpGrad actor_acc = MlpGrad::zeros_like(policy);
  MlpGrad value_acc = MlpGrad::zeros_like(value);
  std::vector<double> one{1.0};
  for (size_t t = 0; t < buffer.size(); ++t) {
    double baseline = forward_value(value, buffer[t].obs);
    double adv = returns[t] - baseline;
    if (adv != 0.0) {
      actor_acc.add(policy_log_grad(policy, buffer[t].obs, buffer[t].action), adv);
      // descent on 1/2 (v - G)^2  ==  ascent along (G - v) grad v
      value_acc.add(backprop(value, buffer[t].obs, one), adv);
    }
  }
  axpy(policy, cfg.alpha_pi, actor_acc);
  axpy(value, cfg.alpha_v, value_acc);
}

void actor_critic_update(Mlp& policy, Mlp& value, const ExperienceBuffer& buffer,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (warn_if_empty(buffer, "actor_critic_update")) return;
  MlpGrad actor_acc = MlpGrad::zeros_like(policy);
  MlpGrad value_acc = MlpGrad::zeros_like(value);
  std::vector<double> one{1.0};
  for (const auto& t : buffer.items()) {
    require(t.done || !t.next_obs.empty(), "actor_critic_update: transition missing next_obs");
    double bootstrap = t.done ? 0.0 : forward_value(value, t.next_obs);
    double adv = t.reward + cfg.gamma * bootstrap - forward_value(value, t.obs);
    if (adv == 0.0) continue;
    actor_acc.add(policy_log_grad(policy, t.obs, t.action), adv);
    value_acc.add(backprop(value, t.obs, one), adv);
  }
  axpy(policy, cfg.alpha_pi, actor_acc);
  axpy(value, cfg.alpha_v, value_acc);
}

CentralQ CentralQ::make(int n_agents, int obs_dim, int n_actions, const std::vector<int>& hidden,
                        bool include_actions) {
  require(n_agents >= 1 && obs_dim >= 1 && n_actions >= 2, "CentralQ::make: bad dimensions");
  CentralQ q;
  q.n_agents = n_agents;
  q.obs_dim = obs_dim;
  q.n_actions = n_actions;
  q.include_actions = include_actions;
  std::vector<int> widths;
  widths.push_back(q.input_dim());
  for (int h : hidden) widths.push_back(h);
  widths.push_back(n_agents);
  q.net = Mlp::make(widths);
  return q;
}

int CentralQ::input_dim() const {
  return n_agents * obs_dim + (include_actions ? n_agents * n_actions : 0);
}

std::vector<double> CentralQ::encode(std::span<const double> joint_obs,
                                     std::span<const int> joint_actions) const {
  require(static_cast<int>(joint_obs.size()) == n_agents * obs_dim,
          "CentralQ::encode: joint observation size mismatch");
  std::vector<double> x(joint_obs.begin(), joint_obs.end());
  if (include_actions) {
    require(static_cast<int>(joint_actions.size()) == n_agents,
            "CentralQ::encode: joint action size mismatch");
    x.resize(static_cast<size_t>(input_dim()), 0.0);
    for (int i = 0; i < n_agents; ++i) {
      int a = joint_actions[i];
      require(a >= 0 && a < n_actions, "CentralQ::encode: action id out of range");
      x[static_cast<size_t>(n_agents) * obs_dim + static_cast<size_t>(i) * n_actions + a] = 1.0;
    }
  }
  return x;
}

std::vector<double> CentralQ::q_values(std::span<const double> joint_obs,
                                       std::span<const int> joint_actions) const {
  return net.forward(encode(joint_obs, joint_actions));
}

double mac_advantage(const Transition& t, const CentralQ& q, double gamma) {
  require(t.joint.has_value(), "mac_advantage: transition lacks joint fields");
  const JointFields& j = *t.joint;
  double cur = q.q_values(j.obs, j.actions)[t.agent_id];
  double next = 0.0;
  if (!t.done) {
    require(!j.next_obs.empty() && !j.next_actions.empty(),
            "mac_advantage: non-terminal transition lacks next joint fields");
    next = q.q_values(j.next_obs, j.next_actions)[t.agent_id];
  }
  return t.reward + gamma * next - cur;
}

void mac_train_step(std::span<Mlp* const> actors, CentralQ& central_q,
                    std::span<const ExperienceBuffer> buffers, const TrainConfig& cfg) {
  cfg.validate();
  require(actors.size() == buffers.size(), "mac_train_step: one buffer per actor required");
  require(static_cast<int>(actors.size()) == central_q.n_agents,
          "mac_train_step: actor count does not match central critic");
  size_t steps = buffers.empty() ? 0 : buffers[0].size();
  for (const auto& b : buffers)
    require(b.size() == steps, "mac_train_step: buffers not time-aligned");
  if (steps == 0) {
    std::cerr << "warn: mac_train_step called with empty buffers; skipping\n";
    return;
  }

  std::vector<MlpGrad> actor_acc;
  actor_acc.reserve(actors.size());
  for (const Mlp* a : actors) actor_acc.push_back(MlpGrad::zeros_like(*a));
  MlpGrad q_acc = MlpGrad::zeros_like(central_q.net);

  std::vector<double> head(central_q.n_agents, 0.0);
  for (size_t i = 0; i < buffers.size(); ++i) {
    for (size_t t = 0; t < steps; ++t) {
      const Transition& tr = buffers[i][t];
      require(tr.agent_id == static_cast<int>(i), "mac_train_step: buffer/agent id mismatch");
      double adv = mac_advantage(tr, central_q, cfg.gamma);
      actor_acc[i].add(policy_log_grad(*actors[i], tr.obs, tr.action), adv);
      // Semi-gradient descent of 1/2 Adv^2 in the critic: the bootstrap
      // target is held fixed, so the move is +alpha_q * Adv * grad Q_i(joint).
      auto x = central_q.encode(tr.joint->obs, tr.joint->actions);
      std::fill(head.begin(), head.end(), 0.0);
      head[tr.agent_id] = 1.0;
      q_acc.add(backprop(central_q.net, x, head), adv);
    }
  }
  for (size_t i = 0; i < actors.size(); ++i) axpy(*actors[i], cfg.alpha_pi, actor_acc[i]);
  axpy(central_q.net, cfg.alpha_q, q_acc);
}

void mac_deployed_step(Mlp& actor, Mlp& local_critic, const ExperienceBuffer& buffer,
                       const TrainConfig& cfg) {
  // Deployed agents adapt from their local critic only; same update as the
  // one-step actor-critic, with the critic step size alpha_v.
  actor_critic_update(actor, local_critic, buffer, cfg);
}

PolicyAgent::PolicyAgent(Mlp policy, std::string name)
    : policy_(std::move(policy)), name_(std::move(name)) {}

void PolicyAgent::reset(RngStream rng) {
  rng_ = std::move(rng);
  last_log_prob_ = 0.0;
}

std::vector<double> PolicyAgent::view(const std::vector<double>& obs) const {
  size_t dim = static_cast<size_t>(policy_.input_dim());
  require(obs.size() >= dim, "PolicyAgent: observation narrower than policy input");
  return std::vector<double>(obs.begin(), obs.begin() + static_cast<long>(dim));
}

int PolicyAgent::act(const std::vector<double>& obs) {
  auto x = view(obs);
  auto dist = forward_policy(policy_, x);
  auto [action, logp] = sample_action(dist, rng_);
  last_log_prob_ = logp;
  return action;
}

EpisodeRecorder::EpisodeRecorder(std::vector<int> learner_ids, std::vector<PolicyAgent*> learners,
                                 bool multi_agent)
    : ids_(std::move(learner_ids)), learners_(std::move(learners)), multi_(multi_agent) {
  require(ids_.size() == learners_.size(), "EpisodeRecorder: ids/learners size mismatch");
}

void EpisodeRecorder::clear() {
  obs_.clear();
  actions_.clear();
  log_probs_.clear();
  rewards_.clear();
  next_obs_tail_.clear();
}

StepHook EpisodeRecorder::hook() {
  return [this](int, const std::vector<std::vector<double>>& obs_before,
                const std::vector<int>& actions, const StepResult& result) {
    std::vector<std::vector<double>> sliced;
    std::vector<int> acts;
    std::vector<double> logps;
    std::vector<double> rews;
    sliced.reserve(ids_.size());
    for (size_t k = 0; k < ids_.size(); ++k) {
      int id = ids_[k];
      sliced.push_back(learners_[k]->view(obs_before[id]));
      acts.push_back(actions[id]);
      logps.push_back(learners_[k]->last_log_prob());
      rews.push_back(result.rewards[id]);
    }
    obs_.push_back(std::move(sliced));
    actions_.push_back(std::move(acts));
    log_probs_.push_back(std::move(logps));
    rewards_.push_back(std::move(rews));
    next_obs_tail_.clear();
    for (size_t k = 0; k < ids_.size(); ++k)
      next_obs_tail_.push_back(learners_[k]->view(result.observations[ids_[k]]));
  };
}

std::vector<ExperienceBuffer> EpisodeRecorder::build() const {
  size_t steps = obs_.size();
  std::vector<ExperienceBuffer> buffers(ids_.size());
  auto flatten = [](const std::vector<std::vector<double>>& per_agent) {
    std::vector<double> flat;
    for (const auto& v : per_agent) flat.insert(flat.end(), v.begin(), v.end());
    return flat;
  };
  for (size_t k = 0; k < ids_.size(); ++k) {
    for (size_t t = 0; t < steps; ++t) {
      Transition tr;
      tr.agent_id = static_cast<int>(k);
      tr.obs = obs_[t][k];
      tr.action = actions_[t][k];
      tr.log_prob = log_probs_[t][k];
      tr.reward = rewards_[t][k];
      tr.done = (t + 1 == steps);
      tr.next_obs = tr.done ? next_obs_tail_[k] : obs_[t + 1][k];
      if (multi_) {
        JointFields j;
        j.obs = flatten(obs_[t]);
        j.actions = actions_[t];
        if (!tr.done) {
          j.next_obs = flatten(obs_[t + 1]);
          j.next_actions = actions_[t + 1];
        }
        tr.joint = std::move(j);
      }
      buffers[k].push(std::move(tr));
    }
  }
  return buffers;
}

}  // namespace abmrl
