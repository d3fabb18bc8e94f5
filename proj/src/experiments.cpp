#include "abmrl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include "abmrl/errors.hpp"

namespace abmrl {

namespace {

uint64_t json_to_seed(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<uint64_t>();
  if (j.is_number_integer()) return static_cast<uint64_t>(j.get<int64_t>());
  throw ConfigError("seeds must be integers");
}

std::vector<int> json_int_list(const nlohmann::json& j) { return j.get<std::vector<int>>(); }

}  // namespace

void ExperimentSpec::validate() const {
  if (schema_version != 1) throw ConfigError("unsupported schema_version");
  if (id.empty()) throw ConfigError("spec id is required");
  if (kind.empty()) throw ConfigError("spec kind is required");
  auto kinds = known_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
    throw ConfigError("unknown experiment kind '" + kind + "'");
  if (seeds.empty()) throw ConfigError("spec needs explicit seeds (no wall-clock defaults)");
  if (output_dir.empty()) throw ConfigError("output_dir is required");
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  spec.schema_version = j.value("schema_version", 1);
  spec.id = j.value("id", std::string{});
  spec.kind = j.value("kind", std::string{});
  spec.env = j.value("env", nlohmann::json::object());
  spec.train = j.value("train", nlohmann::json::object());
  spec.eval = j.value("eval", nlohmann::json::object());
  if (j.contains("seeds"))
    for (const auto& s : j.at("seeds")) spec.seeds.push_back(json_to_seed(s));
  spec.output_dir = j.value("output_dir", spec.output_dir);
  spec.write_trace = j.value("write_trace", spec.write_trace);
  spec.sweep = j.value("sweep", nlohmann::json::object());
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("spec '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError("spec '" + path + "': " + e.what());
  }
}

nlohmann::json ExperimentSpec::to_json() const {
  return nlohmann::json{{"schema_version", schema_version},
                        {"id", id},
                        {"kind", kind},
                        {"env", env},
                        {"train", train},
                        {"eval", eval},
                        {"seeds", seeds},
                        {"output_dir", output_dir},
                        {"write_trace", write_trace},
                        {"sweep", sweep}};
}

std::vector<std::string> known_kinds() {
  return {"mg_single_fixed", "mg_resampled", "mg_multi", "flu_single", "flu_degree"};
}

ExperimentSpec default_spec(const std::string& kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  if (kind == "mg_single_fixed") {
    spec.id = "mg-single";
    spec.env = {{"n_agents", 301}, {"memory_m", 2},  {"strategies_k", 2},
                {"rl_window", 3},  {"horizon", 500}, {"rl_agent_ids", {0}}};
    spec.train = {{"algorithm", "reinforce_baseline"},
                  {"epochs", 400},
                  {"gamma", 1.0},
                  {"lookahead", 5},
                  {"alpha_pi", 0.05},
                  {"alpha_v", 0.02},
                  {"hidden", {20, 20, 20, 20}}};
    spec.seeds = {101, 102, 103, 104, 105, 106, 107, 108, 109, 110};
  } else if (kind == "mg_resampled") {
    spec.id = "mg-resampled";
    spec.env = {{"n_agents", 301}, {"memory_m", 2},  {"strategies_k", 2},
                {"rl_window", 3},  {"horizon", 500}, {"rl_agent_ids", {0}}};
    spec.train = {{"algorithm", "reinforce_baseline"},
                  {"epochs", 400},
                  {"gamma", 1.0},
                  {"lookahead", 5},
                  {"alpha_pi", 0.05},
                  {"alpha_v", 0.02},
                  {"hidden", {20, 20, 20, 20}}};
    spec.seeds = {7};
  } else if (kind == "mg_multi") {
    spec.id = "mg-multi";
    spec.env = {{"n_agents", 10},  {"memory_m", 3},  {"strategies_k", 4},
                {"rl_window", 4},  {"horizon", 100}, {"rl_agent_ids", {0, 1, 2}}};
    spec.train = {{"algorithm", "mac"}, {"epochs", 601},   {"gamma", 0.9},
                  {"lookahead", 5},     {"alpha_pi", 0.03}, {"alpha_q", 0.05},
                  {"hidden", {20, 20, 20, 20}}, {"q_hidden", {20, 20, 20, 20}}};
    spec.eval = {{"episodes", 20}};
    spec.seeds = {201, 202, 203, 204, 205, 206, 207, 208, 209, 210};
  } else if (kind == "flu_single") {
    spec.id = "flu-single";
    spec.env = {{"network",
                 {{"type", "config_poisson"}, {"n_nodes", 2000}, {"mean_degree", 8.0},
                  {"lambda", 0.25}}},
                {"gamma_rec", 1.0},
                {"efficacy", 0.6},
                {"seed_infections", 5},
                {"omega_pe", 0.7},
                {"omega_sn", 0.3},
                {"s", 0.7},
                {"prior_coverage", 0.4},
                {"burn_in", {{"window", 50}, {"tol", 0.01}, {"max", 500}}}};
    spec.train = {{"algorithm", "actor_critic"},
                  {"epochs", 750},
                  {"window_seasons", 10},
                  {"gamma", 0.9},
                  {"lookahead", 5},
                  {"alpha_pi", 0.05},
                  {"alpha_v", 0.05},
                  {"hidden", {20, 20, 20, 20}}};
    spec.eval = {{"seasons", 100}};
    spec.seeds = {301, 302, 303, 304, 305, 306, 307, 308, 309, 310};
  } else if (kind == "flu_degree") {
    spec.id = "flu-degree";
    spec.env = {{"network",
                 {{"type", "config_poisson"}, {"n_nodes", 2000}, {"mean_degree", 8.0},
                  {"lambda", 0.25}}},
                {"gamma_rec", 1.0},
                {"efficacy", 0.6},
                {"seed_infections", 5},
                {"omega_pe", 0.7},
                {"omega_sn", 0.3},
                {"s", 0.7},
                {"prior_coverage", 0.4},
                {"burn_in", {{"window", 50}, {"tol", 0.01}, {"max", 500}}}};
    spec.train = {{"algorithm", "mac"},
                  {"epochs", 1500},
                  {"window_seasons", 5},
                  {"gamma", 0.9},
                  {"lookahead", 5},
                  {"alpha_pi", 0.03},
                  {"alpha_q", 0.03},
                  {"ensemble_size", 40},
                  {"hidden", {20, 20, 20, 20}},
                  {"q_hidden", {20, 20, 20, 20}}};
    spec.eval = {{"seasons", 200},
                 {"sync_windows", 5},
                 {"sync_window_len", 200},
                 {"null_replicates", 200}};
    spec.seeds = {401, 402, 403};
  } else {
    throw ConfigError("default_spec: unknown kind '" + kind + "'");
  }
  return spec;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.lookahead = j.value("lookahead", cfg.lookahead);
  cfg.alpha_pi = j.value("alpha_pi", cfg.alpha_pi);
  cfg.alpha_v = j.value("alpha_v", cfg.alpha_v);
  cfg.alpha_q = j.value("alpha_q", cfg.alpha_q);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.algo = algorithm_from_string(j.value("algorithm", std::string("reinforce")));
  cfg.validate();
  return cfg;
}

namespace {

GameConfig game_config_from_json(const nlohmann::json& j) {
  GameConfig cfg;
  cfg.n_agents = j.value("n_agents", cfg.n_agents);
  cfg.memory_m = j.value("memory_m", cfg.memory_m);
  cfg.strategies_k = j.value("strategies_k", cfg.strategies_k);
  cfg.rl_window = j.value("rl_window", cfg.rl_window);
  cfg.horizon = j.value("horizon", cfg.horizon);
  if (j.contains("rl_agent_ids")) cfg.rl_agent_ids = json_int_list(j.at("rl_agent_ids"));
  if (j.contains("initial_history")) cfg.initial_history = json_int_list(j.at("initial_history"));
  cfg.validate();
  return cfg;
}

std::vector<int> hidden_from_json(const nlohmann::json& j, const char* key) {
  if (j.contains(key)) return json_int_list(j.at(key));
  return {20, 20, 20, 20};
}

Mlp make_policy_net(int input_dim, const std::vector<int>& hidden, int n_actions) {
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(n_actions);
  return Mlp::make(widths);
}

Mlp make_value_net(int input_dim, const std::vector<int>& hidden) {
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return Mlp::make(widths);
}

BurnInConfig burn_in_from_json(const nlohmann::json& env) {
  BurnInConfig cfg;
  if (env.contains("burn_in")) {
    const auto& b = env.at("burn_in");
    cfg.window = b.value("window", cfg.window);
    cfg.tol = b.value("tol", cfg.tol);
    cfg.max_seasons = b.value("max", cfg.max_seasons);
  }
  return cfg;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  int count = std::min(threads, n);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(count));
  for (int t = 0; t < count; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("ABMRL_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------------------
// Minority game harness

std::vector<BasicMgAgent> make_mg_population(int count, int memory_m, int strategies_k,
                                             RngStream population_rng) {
  std::vector<BasicMgAgent> pop;
  pop.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    pop.emplace_back(memory_m, strategies_k, population_rng.fork(std::to_string(i)));
  return pop;
}

MgTrial::MgTrial(GameConfig cfg_in) : cfg(std::move(cfg_in)), env(cfg) {}

std::vector<Agent*> MgTrial::roster() {
  std::set<int> rl(cfg.rl_agent_ids.begin(), cfg.rl_agent_ids.end());
  require(rl.size() == learners.size(), "MgTrial: learner count must match rl_agent_ids");
  require(static_cast<int>(population.size() + learners.size()) == cfg.n_agents,
          "MgTrial: population size must fill the remaining seats");
  std::vector<Agent*> r(static_cast<size_t>(cfg.n_agents), nullptr);
  size_t pop_next = 0;
  size_t learner_next = 0;
  for (int id = 0; id < cfg.n_agents; ++id) {
    if (rl.count(id))
      r[static_cast<size_t>(id)] = learners[learner_next++];
    else
      r[static_cast<size_t>(id)] = &population[pop_next++];
  }
  return r;
}

void MgTrial::mirror_population(const std::vector<int>& history) {
  for (auto& agent : population) agent = agent.mirrored();
  std::vector<int> flipped(history.size());
  for (size_t i = 0; i < history.size(); ++i) flipped[i] = 1 - history[i];
  cfg.initial_history = flipped;
  env = MinorityGameEnv(cfg);
}

MgEpisodeStats mg_run_episode(MgTrial& trial, uint64_t seed, EpisodeRecorder* recorder) {
  auto roster = trial.roster();
  StepHook hook;
  if (recorder) {
    recorder->clear();
    hook = recorder->hook();
  }
  MgEpisodeStats stats;
  stats.trace = run_episode(trial.env, roster, trial.cfg.horizon, seed, hook);

  std::set<int> rl(trial.cfg.rl_agent_ids.begin(), trial.cfg.rl_agent_ids.end());
  int n = trial.cfg.n_agents;
  int n_basic = n - static_cast<int>(rl.size());
  std::vector<double> learner_sum(rl.size(), 0.0);
  std::vector<double> basic_sum(static_cast<size_t>(n_basic), 0.0);
  int steps = stats.trace.steps();
  for (int t = 0; t < steps; ++t) {
    const auto& row = stats.trace.summary[static_cast<size_t>(t)];
    int attendance = static_cast<int>(row[0]);
    stats.attendance.push_back(attendance);
    stats.winners.push_back(static_cast<int>(row[1]));
    bool tie = row[2] != 0.0;
    int rl_ones = 0;
    size_t li = 0, bi = 0;
    for (int id = 0; id < n; ++id) {
      double r = stats.trace.rewards[static_cast<size_t>(t)][static_cast<size_t>(id)];
      if (rl.count(id)) {
        rl_ones += stats.trace.actions[static_cast<size_t>(t)][static_cast<size_t>(id)];
        learner_sum[li++] += r;
      } else {
        basic_sum[bi++] += r;
      }
    }
    int basic_ones = attendance - rl_ones;
    bool even_split = n_basic % 2 == 0 && 2 * basic_ones == n_basic;
    if (tie || even_split) stats.tie_degenerate = true;
  }
  if (steps > 0) {
    for (double& v : learner_sum) v /= steps;
    for (double& v : basic_sum) v /= steps;
  }
  stats.learner_win_rates = std::move(learner_sum);
  stats.default_win_rates = std::move(basic_sum);
  return stats;
}

void apply_single_update(Algorithm algo, Mlp& policy, Mlp& value, const ExperienceBuffer& buffer,
                         const TrainConfig& cfg) {
  switch (algo) {
    case Algorithm::kReinforce: reinforce_update(policy, buffer, cfg); break;
    case Algorithm::kReinforceBaseline: reinforce_baseline_update(policy, value, buffer, cfg); break;
    case Algorithm::kActorCritic: actor_critic_update(policy, value, buffer, cfg); break;
    case Algorithm::kMac:
      throw ContractError("apply_single_update: mac is a population algorithm");
  }
}

CycleProbe mg_attendance_cycle(const GameConfig& cfg_in, uint64_t seed, int probe_steps,
                               int max_period) {
  GameConfig cfg = cfg_in;
  cfg.rl_agent_ids.clear();
  cfg.horizon = probe_steps;
  MgTrial trial(cfg);
  RngStream root(seed, "cycle-probe");
  trial.population =
      make_mg_population(cfg.n_agents, cfg.memory_m, cfg.strategies_k, root.fork("population"));
  auto stats = mg_run_episode(trial, root.fork("episode").next_u64(), nullptr);

  CycleProbe probe;
  probe.period = detect_cycle(stats.attendance, max_period, 2 * max_period);
  if (probe.period > 0) {
    probe.winner_pattern.assign(stats.winners.end() - probe.period, stats.winners.end());
  }
  return probe;
}

// ---------------------------------------------------------------------------
// mg_single_fixed

namespace {

struct MgLearnerBundle {
  PolicyAgent learner;
  Mlp value;
};

MgLearnerBundle make_mg_learner(const GameConfig& cfg, const nlohmann::json& train,
                                RngStream& root, const std::string& tag) {
  auto hidden = hidden_from_json(train, "hidden");
  Mlp policy = make_policy_net(cfg.rl_window, hidden, 2);
  RngStream pi = root.fork("policy-init" + tag);
  policy.init_uniform(pi);
  Mlp value = make_value_net(cfg.rl_window, hidden);
  RngStream vi = root.fork("value-init" + tag);
  value.init_uniform(vi);
  return {PolicyAgent(std::move(policy), "learner" + tag), std::move(value)};
}

}  // namespace

MgSingleResult run_mg_single_fixed(const ExperimentSpec& spec) {
  GameConfig cfg = game_config_from_json(spec.env);
  require(cfg.rl_agent_ids.size() == 1, "mg_single_fixed: exactly one learner expected");
  TrainConfig tcfg = train_config_from_json(spec.train);

  int n_trials = static_cast<int>(spec.seeds.size());
  MgSingleResult result;
  result.untrained_win_rates.resize(static_cast<size_t>(n_trials));
  result.final_win_rates.resize(static_cast<size_t>(n_trials));
  result.trained_policies.resize(static_cast<size_t>(n_trials));
  result.trial_seeds = spec.seeds;
  std::vector<MetricsTable> per_trial(static_cast<size_t>(n_trials));

  parallel_for(n_trials, thread_count(), [&](int trial_idx) {
    uint64_t seed = spec.seeds[static_cast<size_t>(trial_idx)];
    std::string run_id = spec.id + "-trial" + std::to_string(trial_idx);
    RngStream root(seed, "mg-single");
    MgTrial trial(cfg);
    trial.population = make_mg_population(cfg.n_agents - 1, cfg.memory_m, cfg.strategies_k,
                                          root.fork("population"));
    auto bundle = make_mg_learner(cfg, spec.train, root, "");
    trial.learners = {&bundle.learner};

    RngStream eval_seeds = root.fork("eval-seeds");
    RngStream epoch_seeds = root.fork("epoch-seeds");
    MetricsTable& m = per_trial[static_cast<size_t>(trial_idx)];

    double untrained = mg_run_episode(trial, eval_seeds.next_u64(), nullptr).learner_win_rates[0];
    m.add(run_id, 0, "untrained_win_rate", untrained);

    EpisodeRecorder rec({cfg.rl_agent_ids[0]}, {&bundle.learner}, false);
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
      auto stats = mg_run_episode(trial, epoch_seeds.next_u64(), &rec);
      auto buffers = rec.build();
      apply_single_update(tcfg.algo, bundle.learner.policy(), bundle.value, buffers[0], tcfg);
      m.add(run_id, epoch, "win_rate", stats.learner_win_rates[0]);
    }

    double final_rate = mg_run_episode(trial, eval_seeds.next_u64(), nullptr).learner_win_rates[0];
    m.add(run_id, tcfg.epochs, "final_win_rate", final_rate);
    result.untrained_win_rates[static_cast<size_t>(trial_idx)] = untrained;
    result.final_win_rates[static_cast<size_t>(trial_idx)] = final_rate;
    result.trained_policies[static_cast<size_t>(trial_idx)] = bundle.learner.policy();
  });
  for (auto& m : per_trial) result.metrics.append(m);
  return result;
}

MgGeneralizationResult run_mg_generalization(const Mlp& policy, const ExperimentSpec& spec,
                                             uint64_t train_seed, double train_win_rate) {
  GameConfig cfg = game_config_from_json(spec.env);
  require(cfg.rl_agent_ids.size() == 1, "mg_generalization: exactly one learner expected");
  int n_pops = spec.eval.value("n_populations", 100);
  uint64_t seed = spec.seeds.at(0);
  std::string run_id = spec.id + "-gen";

  MgGeneralizationResult result;
  result.train_win_rate = train_win_rate;
  RngStream root(seed, "mg-generalization");
  RngStream pop_rng = root.fork("populations");
  RngStream ep_rng = root.fork("episodes");
  for (int p = 0; p < n_pops; ++p) {
    MgTrial trial(cfg);
    trial.population = make_mg_population(cfg.n_agents - 1, cfg.memory_m, cfg.strategies_k,
                                          pop_rng.fork(std::to_string(p)));
    PolicyAgent frozen(policy, "frozen");
    trial.learners = {&frozen};
    double rate = mg_run_episode(trial, ep_rng.next_u64(), nullptr).learner_win_rates[0];
    result.population_win_rates.push_back(rate);
    result.metrics.add(run_id, p, "population_win_rate", rate);
  }

  // Relabeling probe: the training population mirrored, with the mirrored
  // warm-up history, must expose the labeling sensitivity.
  RngStream train_root(train_seed, "mg-single");
  MgTrial mirror_trial(cfg);
  mirror_trial.population = make_mg_population(cfg.n_agents - 1, cfg.memory_m, cfg.strategies_k,
                                               train_root.fork("population"));
  uint64_t mirror_seed = root.fork("mirror-episode").next_u64();
  MinorityGameEnv probe_env(cfg);
  auto warmup_obs = probe_env.reset(mirror_seed);
  std::vector<int> warmup(probe_env.history().begin(), probe_env.history().end());
  mirror_trial.mirror_population(warmup);
  PolicyAgent frozen(policy, "frozen");
  mirror_trial.learners = {&frozen};
  result.mirror_win_rate = mg_run_episode(mirror_trial, mirror_seed, nullptr).learner_win_rates[0];
  result.metrics.add(run_id, n_pops, "mirror_win_rate", result.mirror_win_rate);
  result.metrics.add(run_id, n_pops, "train_win_rate", train_win_rate);
  return result;
}

MgResampledResult run_mg_resampled(const ExperimentSpec& spec, uint64_t seed) {
  GameConfig cfg = game_config_from_json(spec.env);
  require(cfg.rl_agent_ids.size() == 1, "mg_resampled: exactly one learner expected");
  TrainConfig tcfg = train_config_from_json(spec.train);
  std::string run_id = spec.id + "-seed" + std::to_string(seed);

  RngStream root(seed, "mg-resampled");
  auto bundle = make_mg_learner(cfg, spec.train, root, "");
  RngStream pop_rng = root.fork("populations");
  RngStream epoch_seeds = root.fork("epoch-seeds");

  MgResampledResult result;
  EpisodeRecorder rec({cfg.rl_agent_ids[0]}, {&bundle.learner}, false);
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    MgTrial trial(cfg);
    trial.population = make_mg_population(cfg.n_agents - 1, cfg.memory_m, cfg.strategies_k,
                                          pop_rng.fork(std::to_string(epoch)));
    trial.learners = {&bundle.learner};
    auto stats = mg_run_episode(trial, epoch_seeds.next_u64(), &rec);
    auto buffers = rec.build();
    apply_single_update(tcfg.algo, bundle.learner.policy(), bundle.value, buffers[0], tcfg);
    result.epoch_win_rates.push_back(stats.learner_win_rates[0]);
    result.tie_degenerate.push_back(stats.tie_degenerate ? 1 : 0);
    result.metrics.add(run_id, epoch, "win_rate", stats.learner_win_rates[0]);
    result.metrics.add(run_id, epoch, "tie_degenerate", stats.tie_degenerate ? 1.0 : 0.0);
  }
  return result;
}

MgMultiResult run_mg_multi(const ExperimentSpec& spec, uint64_t seed) {
  GameConfig cfg = game_config_from_json(spec.env);
  int n_learners = static_cast<int>(cfg.rl_agent_ids.size());
  require(n_learners >= 2, "mg_multi: need at least two learners");
  TrainConfig tcfg = train_config_from_json(spec.train);
  require(tcfg.algo == Algorithm::kMac, "mg_multi: algorithm must be mac");
  int eval_episodes = spec.eval.value("episodes", 20);
  std::string run_id = spec.id + "-seed" + std::to_string(seed);

  RngStream root(seed, "mg-multi");
  MgTrial trial(cfg);
  trial.population = make_mg_population(cfg.n_agents - n_learners, cfg.memory_m,
                                        cfg.strategies_k, root.fork("population"));
  std::vector<MgLearnerBundle> bundles;
  bundles.reserve(static_cast<size_t>(n_learners));
  for (int i = 0; i < n_learners; ++i)
    bundles.push_back(make_mg_learner(cfg, spec.train, root, "-" + std::to_string(i)));
  for (auto& b : bundles) trial.learners.push_back(&b.learner);

  auto q_hidden = hidden_from_json(spec.train, "q_hidden");
  CentralQ central = CentralQ::make(n_learners, cfg.rl_window, 2, q_hidden);
  RngStream qi = root.fork("q-init");
  central.net.init_uniform(qi);

  MgMultiResult result;
  RngStream eval_rng = root.fork("eval-seeds");
  auto evaluate = [&](const char* phase, std::vector<double>& per_agent, double& default_mean) {
    per_agent.assign(static_cast<size_t>(n_learners), 0.0);
    double dsum = 0.0;
    for (int e = 0; e < eval_episodes; ++e) {
      auto stats = mg_run_episode(trial, eval_rng.next_u64(), nullptr);
      for (int i = 0; i < n_learners; ++i)
        per_agent[static_cast<size_t>(i)] += stats.learner_win_rates[static_cast<size_t>(i)];
      dsum += mean_of(stats.default_win_rates);
      result.metrics.add(run_id, e, std::string(phase) + "_episode_reward",
                         mean_of(stats.learner_win_rates));
    }
    for (double& v : per_agent) v /= eval_episodes;
    default_mean = dsum / eval_episodes;
  };

  double default_pre = 0.0;
  evaluate("pre", result.pre_per_agent, default_pre);
  result.pre_mean = mean_of(result.pre_per_agent);

  RngStream epoch_seeds = root.fork("epoch-seeds");
  EpisodeRecorder rec(cfg.rl_agent_ids, trial.learners, true);
  std::vector<Mlp*> actors;
  for (auto& b : bundles) actors.push_back(&b.learner.policy());
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    auto stats = mg_run_episode(trial, epoch_seeds.next_u64(), &rec);
    auto buffers = rec.build();
    mac_train_step(actors, central, buffers, tcfg);
    result.metrics.add(run_id, epoch, "agg_reward", mean_of(stats.learner_win_rates));
  }

  evaluate("post", result.post_per_agent, result.default_post_mean);
  result.post_mean = mean_of(result.post_per_agent);
  result.metrics.add(run_id, tcfg.epochs, "pre_mean_reward", result.pre_mean);
  result.metrics.add(run_id, tcfg.epochs, "post_mean_reward", result.post_mean);
  result.metrics.add(run_id, tcfg.epochs, "default_post_mean_reward", result.default_post_mean);
  return result;
}

// ---------------------------------------------------------------------------
// Flu experiments

namespace {

struct FluWorld {
  FluEnv env;
  std::vector<DefaultFluAgent> defaults;
  std::vector<std::vector<double>> obs;

  FluWorld(const FluConfig& cfg, uint64_t seed, RngStream& root)
      : env(cfg) {
    obs = env.reset(seed);
    int n = env.num_agents();
    defaults.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) defaults.emplace_back(cfg.behavior);
    RngStream agents = root.fork("agents");
    for (int i = 0; i < n; ++i)
      defaults[static_cast<size_t>(i)].reset(agents.fork(std::to_string(i)));
  }

  std::vector<Agent*> roster_with(const std::vector<int>& ids, std::span<Agent* const> overrides) {
    std::vector<Agent*> r;
    r.reserve(defaults.size());
    for (auto& d : defaults) r.push_back(&d);
    for (size_t k = 0; k < ids.size(); ++k) r[static_cast<size_t>(ids[k])] = overrides[k];
    return r;
  }

  double mean_experience() const {
    double s = 0.0;
    for (const auto& d : defaults) s += d.experience();
    return defaults.empty() ? 0.0 : s / static_cast<double>(defaults.size());
  }
};

// Mean uninfected-season rate of the watched agents over `seasons`, stepping
// a private copy of the world. Optionally records the watched agents' action
// series and a trace.
struct FluEvalResult {
  std::vector<double> rates;
  std::vector<std::vector<int>> actions;  // [agent][season]
  EpisodeTrace trace;
};

FluEvalResult flu_eval(const FluWorld& world, const std::vector<int>& ids,
                       std::span<Agent* const> overrides, int seasons, bool record_actions,
                       bool record_trace) {
  FluWorld copy = world;  // private world: evaluation must not advance training state
  auto roster = copy.roster_with(ids, overrides);
  FluEvalResult out;
  out.rates.assign(ids.size(), 0.0);
  if (record_actions) out.actions.assign(ids.size(), {});
  StepHook hook = [&](int, const std::vector<std::vector<double>>&, const std::vector<int>& acts,
                      const StepResult& result) {
    for (size_t k = 0; k < ids.size(); ++k) {
      out.rates[k] += result.rewards[static_cast<size_t>(ids[k])];
      if (record_actions) out.actions[k].push_back(acts[static_cast<size_t>(ids[k])]);
    }
  };
  EpisodeTrace* trace = nullptr;
  if (record_trace) {
    out.trace.config = copy.env.config_json();
    out.trace.summary_cols = copy.env.summary_columns();
    trace = &out.trace;
  }
  int took = run_window(copy.env, roster, copy.obs, seasons, trace, hook);
  require(took == seasons, "flu_eval: environment finished early");
  for (double& r : out.rates) r /= seasons;
  return out;
}

}  // namespace

FluSingleResult run_flu_single(const ExperimentSpec& spec, uint64_t seed) {
  FluConfig cfg = FluConfig::from_json(spec.env);
  TrainConfig tcfg = train_config_from_json(spec.train);
  require(tcfg.algo != Algorithm::kMac, "flu_single: single-agent algorithm expected");
  int window_seasons = spec.train.value("window_seasons", 10);
  int eval_seasons = spec.eval.value("seasons", 100);
  std::string run_id = spec.id + "-seed" + std::to_string(seed);

  RngStream root(seed, "flu-single");
  FluWorld world(cfg, seed, root);
  int n = world.env.num_agents();

  FluSingleResult result;
  {
    auto roster = world.roster_with({}, {});
    result.burn_in_seasons = burn_in(world.env, roster, world.obs, burn_in_from_json(spec.env));
  }
  result.metrics.add(run_id, 0, "burn_in_seasons", result.burn_in_seasons);

  int node = static_cast<int>(root.fork("choose-node").below(static_cast<uint64_t>(n)));
  result.metrics.add(run_id, 0, "rl_node", node);
  result.metrics.add(run_id, 0, "rl_node_degree", world.env.network().degree(node));

  auto hidden = hidden_from_json(spec.train, "hidden");
  Mlp policy = make_policy_net(7, hidden, 2);
  RngStream pi = root.fork("policy-init");
  policy.init_uniform(pi);
  Mlp value = make_value_net(7, hidden);
  RngStream vi = root.fork("value-init");
  value.init_uniform(vi);
  PolicyAgent learner(std::move(policy), "flu-learner");
  learner.reset(root.fork("learner-rng"));

  {
    PolicyAgent probe = learner;  // untrained evaluation on a world copy
    Agent* ov[] = {&probe};
    result.pre_rate = flu_eval(world, {node}, ov, eval_seasons, false, false).rates[0];
  }
  result.metrics.add(run_id, 0, "pre_rate", result.pre_rate);

  auto roster = world.roster_with({node}, std::array<Agent*, 1>{&learner});
  EpisodeRecorder rec({node}, {&learner}, false);
  for (int iter = 0; iter < tcfg.epochs; ++iter) {
    rec.clear();
    int took = run_window(world.env, roster, world.obs, window_seasons, nullptr, rec.hook());
    require(took == window_seasons, "flu_single: environment finished during training");
    auto buffers = rec.build();
    double window_rate = 0.0;
    for (const auto& t : buffers[0].items()) window_rate += t.reward;
    window_rate /= static_cast<double>(buffers[0].size());
    apply_single_update(tcfg.algo, learner.policy(), value, buffers[0], tcfg);
    result.metrics.add(run_id, iter, "train_uninfected_rate", window_rate);
  }

  // Counterfactual comparison from the same world state with shared epidemic
  // draws: the trained learner vs the same node running the default model,
  // endowed with the population's typical experience level.
  double mean_v = world.mean_experience();
  {
    Agent* ov[] = {&learner};
    auto eval_rl = flu_eval(world, {node}, ov, eval_seasons, false, spec.write_trace);
    result.post_rate = eval_rl.rates[0];
  }
  {
    DefaultFluAgent twin(cfg.behavior);
    twin.reset(root.fork("twin-rng"));
    twin.set_experience(std::min(mean_v, nsum(cfg.behavior.s, std::max(1, world.env.season()))),
                        world.env.season());
    Agent* ov[] = {&twin};
    result.twin_rate = flu_eval(world, {node}, ov, eval_seasons, false, false).rates[0];
  }
  result.diff = result.post_rate - result.twin_rate;
  result.policy = learner.policy();
  result.metrics.add(run_id, tcfg.epochs, "post_rate", result.post_rate);
  result.metrics.add(run_id, tcfg.epochs, "twin_rate", result.twin_rate);
  result.metrics.add(run_id, tcfg.epochs, "diff", result.diff);
  return result;
}

namespace {

struct EnsembleSpec {
  std::string name;
  std::vector<int> nodes;
};

FluEnsembleOutcome train_flu_ensemble(const FluWorld& start, const EnsembleSpec& ens,
                                      const ExperimentSpec& spec, const TrainConfig& tcfg,
                                      const Mlp& policy_template, const Mlp& q_template,
                                      RngStream& root, const std::string& run_id,
                                      MetricsTable& metrics, double* untrained_infection) {
  int n_learners = static_cast<int>(ens.nodes.size());
  int window_seasons = spec.train.value("window_seasons", 5);
  int eval_seasons = spec.eval.value("seasons", 200);
  int sync_windows = spec.eval.value("sync_windows", 5);
  int sync_window_len = spec.eval.value("sync_window_len", 200);
  int null_replicates = spec.eval.value("null_replicates", 200);

  FluWorld world = start;
  std::vector<PolicyAgent> learners;
  learners.reserve(static_cast<size_t>(n_learners));
  for (int i = 0; i < n_learners; ++i) learners.emplace_back(policy_template, ens.name);
  RngStream learner_rng = root.fork(ens.name + "-learner-rng");
  for (int i = 0; i < n_learners; ++i)
    learners[static_cast<size_t>(i)].reset(learner_rng.fork(std::to_string(i)));

  CentralQ central;
  central.n_agents = n_learners;
  central.obs_dim = 7;
  central.n_actions = 2;
  central.include_actions = true;
  central.net = q_template;

  std::vector<Agent*> overrides;
  for (auto& l : learners) overrides.push_back(&l);

  FluEnsembleOutcome out;
  {
    auto pre = flu_eval(world, ens.nodes, overrides, eval_seasons, false, false);
    out.pre_rate = mean_of(pre.rates);
    if (untrained_infection) *untrained_infection = 1.0 - out.pre_rate;
  }
  metrics.add(run_id, 0, ens.name + "_pre_rate", out.pre_rate);

  auto roster = world.roster_with(ens.nodes, overrides);
  std::vector<PolicyAgent*> learner_ptrs;
  for (auto& l : learners) learner_ptrs.push_back(&l);
  EpisodeRecorder rec(ens.nodes, learner_ptrs, true);
  std::vector<Mlp*> actors;
  for (auto& l : learners) actors.push_back(&l.policy());
  for (int iter = 0; iter < tcfg.epochs; ++iter) {
    rec.clear();
    int took = run_window(world.env, roster, world.obs, window_seasons, nullptr, rec.hook());
    require(took == window_seasons, "flu_degree: environment finished during training");
    auto buffers = rec.build();
    mac_train_step(actors, central, buffers, tcfg);
    if (iter % 25 == 0 || iter + 1 == tcfg.epochs) {
      double rate = 0.0;
      for (const auto& b : buffers)
        for (const auto& t : b.items()) rate += t.reward;
      rate /= static_cast<double>(n_learners * window_seasons);
      metrics.add(run_id, iter, ens.name + "_train_rate", rate);
    }
  }

  // Post-training evaluation, split into independent windows so the averaged
  // correlation matrix has a tight independence band.
  std::vector<std::vector<std::vector<int>>> windows;
  double post_sum = 0.0;
  FluWorld eval_world = world;
  for (int w = 0; w < sync_windows; ++w) {
    auto ev = flu_eval(eval_world, ens.nodes, overrides, sync_window_len, true, false);
    windows.push_back(ev.actions);
    post_sum += mean_of(ev.rates);
    // advance the shared evaluation world between windows
    auto r = eval_world.roster_with(ens.nodes, overrides);
    run_window(eval_world.env, r, eval_world.obs, sync_window_len, nullptr);
  }
  out.post_rate = post_sum / sync_windows;
  out.improvement = out.post_rate - out.pre_rate;

  auto corr = mean_correlation_matrix(windows);
  out.sync_max_offdiag = max_offdiag_abs(corr, n_learners);
  std::vector<double> freqs(static_cast<size_t>(n_learners), 0.0);
  for (const auto& window : windows)
    for (int i = 0; i < n_learners; ++i)
      for (int a : window[static_cast<size_t>(i)]) freqs[static_cast<size_t>(i)] += a;
  for (double& f : freqs) f /= static_cast<double>(sync_windows * sync_window_len);
  RngStream null_rng = root.fork(ens.name + "-null");
  out.sync_null_band =
      independent_null_band(freqs, sync_windows, sync_window_len, null_replicates, null_rng);

  metrics.add(run_id, tcfg.epochs, ens.name + "_post_rate", out.post_rate);
  metrics.add(run_id, tcfg.epochs, ens.name + "_improvement", out.improvement);
  metrics.add(run_id, tcfg.epochs, ens.name + "_sync_max_offdiag", out.sync_max_offdiag);
  metrics.add(run_id, tcfg.epochs, ens.name + "_sync_null_band", out.sync_null_band);
  return out;
}

}  // namespace

FluDegreeResult run_flu_degree(const ExperimentSpec& spec, uint64_t seed) {
  FluConfig cfg = FluConfig::from_json(spec.env);
  TrainConfig tcfg = train_config_from_json(spec.train);
  require(tcfg.algo == Algorithm::kMac, "flu_degree: algorithm must be mac");
  int ensemble_size = spec.train.value("ensemble_size", 40);
  std::string run_id = spec.id + "-seed" + std::to_string(seed);

  RngStream root(seed, "flu-degree");
  FluWorld world(cfg, seed, root);
  int n = world.env.num_agents();
  require(n >= 8 * ensemble_size, "flu_degree: network too small for the quartile ensembles");

  FluDegreeResult result;
  {
    auto roster = world.roster_with({}, {});
    result.burn_in_seasons = burn_in(world.env, roster, world.obs, burn_in_from_json(spec.env));
  }
  result.metrics.add(run_id, 0, "burn_in_seasons", result.burn_in_seasons);

  // Quartile pools by degree rank; ensembles drawn uniformly inside a pool.
  std::vector<int> by_degree(static_cast<size_t>(n));
  std::iota(by_degree.begin(), by_degree.end(), 0);
  const auto& net = world.env.network();
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](int a, int b) { return net.degree(a) < net.degree(b); });
  int quartile = n / 4;
  auto pick = [&](std::vector<int> pool, RngStream pick_rng) {
    std::vector<int> chosen;
    for (int k = 0; k < ensemble_size; ++k) {
      size_t j = static_cast<size_t>(k) + pick_rng.below(pool.size() - static_cast<size_t>(k));
      std::swap(pool[static_cast<size_t>(k)], pool[j]);
      chosen.push_back(pool[static_cast<size_t>(k)]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  };
  EnsembleSpec low{"low", pick({by_degree.begin(), by_degree.begin() + quartile},
                               root.fork("pick-low"))};
  EnsembleSpec high{"high", pick({by_degree.end() - quartile, by_degree.end()},
                                 root.fork("pick-high"))};

  auto hidden = hidden_from_json(spec.train, "hidden");
  Mlp policy_template = make_policy_net(7, hidden, 2);
  RngStream pi = root.fork("policy-template");
  policy_template.init_uniform(pi);
  auto q_hidden = hidden_from_json(spec.train, "q_hidden");
  CentralQ q_proto = CentralQ::make(ensemble_size, 7, 2, q_hidden);
  RngStream qi = root.fork("q-template");
  q_proto.net.init_uniform(qi);

  result.low = train_flu_ensemble(world, low, spec, tcfg, policy_template, q_proto.net, root,
                                  run_id, result.metrics, &result.untrained_low_infection);
  result.high = train_flu_ensemble(world, high, spec, tcfg, policy_template, q_proto.net, root,
                                   run_id, result.metrics, &result.untrained_high_infection);
  result.metrics.add(run_id, 0, "untrained_low_infection", result.untrained_low_infection);
  result.metrics.add(run_id, 0, "untrained_high_infection", result.untrained_high_infection);
  result.metrics.add(run_id, tcfg.epochs, "improvement_gap_low_minus_high",
                     result.low.improvement - result.high.improvement);
  return result;
}

// ---------------------------------------------------------------------------
// Orchestration

RunArtifacts run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  RunArtifacts artifacts;
  artifacts.manifest = {{"schema_version", spec.schema_version},
                        {"spec", spec.to_json()},
                        {"tool", "abmrl"}};

  if (spec.kind == "mg_single_fixed") {
    auto result = run_mg_single_fixed(spec);
    artifacts.metrics = std::move(result.metrics);
    for (size_t t = 0; t < result.trained_policies.size(); ++t)
      artifacts.policies.emplace_back(t == 0 ? "policy" : "policy_trial" + std::to_string(t),
                                      result.trained_policies[t]);
    if (spec.write_trace && !result.trained_policies.empty()) {
      GameConfig cfg = game_config_from_json(spec.env);
      RngStream root(spec.seeds[0], "mg-single");
      MgTrial trial(cfg);
      trial.population = make_mg_population(cfg.n_agents - 1, cfg.memory_m, cfg.strategies_k,
                                            root.fork("population"));
      PolicyAgent trained(result.trained_policies[0], "trained");
      trial.learners = {&trained};
      artifacts.trace = mg_run_episode(trial, root.fork("trace-episode").next_u64(), nullptr).trace;
    }
    return artifacts;
  }

  int n_seeds = static_cast<int>(spec.seeds.size());
  std::vector<MetricsTable> partial(static_cast<size_t>(n_seeds));
  std::vector<std::pair<std::string, Mlp>> policies(static_cast<size_t>(n_seeds));
  std::vector<std::optional<EpisodeTrace>> traces(static_cast<size_t>(n_seeds));

  parallel_for(n_seeds, thread_count(), [&](int i) {
    uint64_t seed = spec.seeds[static_cast<size_t>(i)];
    if (spec.kind == "mg_resampled") {
      auto r = run_mg_resampled(spec, seed);
      partial[static_cast<size_t>(i)] = std::move(r.metrics);
    } else if (spec.kind == "mg_multi") {
      auto r = run_mg_multi(spec, seed);
      partial[static_cast<size_t>(i)] = std::move(r.metrics);
    } else if (spec.kind == "flu_single") {
      auto r = run_flu_single(spec, seed);
      partial[static_cast<size_t>(i)] = std::move(r.metrics);
      policies[static_cast<size_t>(i)] = {"policy_seed" + std::to_string(seed), r.policy};
    } else if (spec.kind == "flu_degree") {
      auto r = run_flu_degree(spec, seed);
      partial[static_cast<size_t>(i)] = std::move(r.metrics);
    }
  });
  for (auto& m : partial) artifacts.metrics.append(m);
  for (auto& p : policies)
    if (!p.first.empty()) artifacts.policies.push_back(std::move(p));
  if (!artifacts.policies.empty()) {
    // keep the conventional name for the first saved policy
    artifacts.policies.front().first = "policy";
  }
  return artifacts;
}

void write_run(const RunArtifacts& artifacts, const std::string& run_dir) {
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream m(run_dir + "/manifest.json");
    if (!m) throw ConfigError("write_run: cannot open manifest in '" + run_dir + "'");
    m << artifacts.manifest.dump(2) << "\n";
  }
  artifacts.metrics.write_csv(run_dir + "/metrics.csv");
  for (const auto& [stem, net] : artifacts.policies) save_mlp(net, run_dir + "/" + stem + ".bin");
  if (artifacts.trace) {
    std::ofstream t(run_dir + "/trace.csv");
    if (!t) throw ConfigError("write_run: cannot open trace.csv in '" + run_dir + "'");
    t << artifacts.trace->csv();
  }
}

std::vector<ExperimentSpec> expand_sweep(const ExperimentSpec& spec) {
  if (spec.sweep.empty() || spec.sweep.is_null()) return {spec};
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  for (auto it = spec.sweep.begin(); it != spec.sweep.end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      throw ConfigError("sweep axis '" + it.key() + "' must be a non-empty list");
    axes.emplace_back(it.key(), std::vector<nlohmann::json>(it.value().begin(), it.value().end()));
  }
  std::vector<ExperimentSpec> out;
  std::vector<size_t> index(axes.size(), 0);
  while (true) {
    nlohmann::json j = spec.to_json();
    j["sweep"] = nlohmann::json::object();
    std::string suffix;
    for (size_t a = 0; a < axes.size(); ++a) {
      const auto& [path, values] = axes[a];
      const auto& v = values[index[a]];
      // dotted paths address nested spec fields: "train.alpha_pi"
      nlohmann::json* cursor = &j;
      size_t pos = 0;
      while (true) {
        size_t dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (dot == std::string::npos) {
          (*cursor)[key] = v;
          break;
        }
        cursor = &(*cursor)[key];
        pos = dot + 1;
      }
      std::string vs = v.dump();
      vs.erase(std::remove(vs.begin(), vs.end(), '"'), vs.end());
      suffix += "-" + path.substr(path.rfind('.') + 1) + "=" + vs;
    }
    j["id"] = spec.id + suffix;
    out.push_back(ExperimentSpec::from_json(j));
    size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
    }
    if (a == axes.size()) break;
  }
  return out;
}

}  // namespace abmrl
