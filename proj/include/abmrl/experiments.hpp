#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abmrl/env.hpp"
#include "abmrl/flu.hpp"
#include "abmrl/metrics.hpp"
#include "abmrl/minority_game.hpp"
#include "abmrl/mlp.hpp"
#include "abmrl/rl.hpp"

namespace abmrl {

// Declarative description of one experiment run: environment, roster,
// training and evaluation schedule, explicit seeds.
struct ExperimentSpec {
  int schema_version = 1;
  std::string id;
  std::string kind;  // mg_single_fixed | mg_resampled | mg_multi | flu_single | flu_degree
  nlohmann::json env;
  nlohmann::json train;
  nlohmann::json eval;
  std::vector<uint64_t> seeds;
  std::string output_dir = "out";
  bool write_trace = true;
  nlohmann::json sweep;  // optional: dotted spec path -> list of values

  void validate() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec load(const std::string& path);
  nlohmann::json to_json() const;
};

// Built-in defaults for each experiment kind, runnable as-is.
ExperimentSpec default_spec(const std::string& kind);
std::vector<std::string> known_kinds();

TrainConfig train_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Minority game harness pieces

std::vector<BasicMgAgent> make_mg_population(int count, int memory_m, int strategies_k,
                                             RngStream population_rng);

// One game: a basic population plus policy learners placed at cfg.rl_agent_ids.
// Learner objects are owned by the caller.
struct MgTrial {
  GameConfig cfg;
  MinorityGameEnv env;
  std::vector<BasicMgAgent> population;
  std::vector<PolicyAgent*> learners;

  explicit MgTrial(GameConfig cfg);
  std::vector<Agent*> roster();
  // Mirrors the basic population and pins the mirrored warm-up history.
  void mirror_population(const std::vector<int>& history);
};

struct MgEpisodeStats {
  std::vector<double> learner_win_rates;
  std::vector<double> default_win_rates;  // per basic agent, roster order
  bool tie_degenerate = false;  // some round split the basic agents evenly (or tied outright)
  std::vector<int> winners;
  std::vector<int> attendance;
  EpisodeTrace trace;
};

MgEpisodeStats mg_run_episode(MgTrial& trial, uint64_t seed, EpisodeRecorder* recorder);

// Applies one of the single-learner policy-gradient updates.
void apply_single_update(Algorithm algo, Mlp& policy, Mlp& value, const ExperienceBuffer& buffer,
                         const TrainConfig& cfg);

// Attendance periodicity probe for a default-only population.
struct CycleProbe {
  int period = 0;  // 0 when no cycle fits within the probe window
  std::vector<int> winner_pattern;
};
CycleProbe mg_attendance_cycle(const GameConfig& cfg, uint64_t seed, int probe_steps,
                               int max_period);

// ---------------------------------------------------------------------------
// Experiment runners (one seed each unless stated)

struct MgSingleResult {
  MetricsTable metrics;
  std::vector<double> untrained_win_rates;  // per trial
  std::vector<double> final_win_rates;      // per trial
  std::vector<Mlp> trained_policies;        // per trial
  std::vector<uint64_t> trial_seeds;
};
// Trains one learner per trial against a population fixed within the trial,
// one trial per spec seed.
MgSingleResult run_mg_single_fixed(const ExperimentSpec& spec);

struct MgGeneralizationResult {
  MetricsTable metrics;
  std::vector<double> population_win_rates;
  double mirror_win_rate = 0.0;  // vs the relabeled training population
  double train_win_rate = 0.0;
};
// Frozen policy against n fresh populations; train_seed rebuilds the
// training population for the relabeling probe.
MgGeneralizationResult run_mg_generalization(const Mlp& policy, const ExperimentSpec& spec,
                                             uint64_t train_seed, double train_win_rate);

struct MgResampledResult {
  MetricsTable metrics;
  std::vector<double> epoch_win_rates;
  std::vector<uint8_t> tie_degenerate;  // per epoch
};
// Fresh basic population every epoch.
MgResampledResult run_mg_resampled(const ExperimentSpec& spec, uint64_t seed);

struct MgMultiResult {
  MetricsTable metrics;
  double pre_mean = 0.0;   // aggregate learner reward before training
  double post_mean = 0.0;  // after
  std::vector<double> pre_per_agent;
  std::vector<double> post_per_agent;
  double default_post_mean = 0.0;  // basic agents' mean reward after training
};
MgMultiResult run_mg_multi(const ExperimentSpec& spec, uint64_t seed);

struct FluSingleResult {
  MetricsTable metrics;
  int burn_in_seasons = 0;
  double pre_rate = 0.0;      // untrained learner uninfected-season rate
  double post_rate = 0.0;     // trained learner
  double twin_rate = 0.0;     // same node under the default model, shared draws
  double diff = 0.0;          // post_rate - twin_rate
  Mlp policy;
};
FluSingleResult run_flu_single(const ExperimentSpec& spec, uint64_t seed);

struct FluEnsembleOutcome {
  double pre_rate = 0.0;
  double post_rate = 0.0;
  double improvement = 0.0;
  double sync_max_offdiag = 0.0;
  double sync_null_band = 0.0;
};
struct FluDegreeResult {
  MetricsTable metrics;
  int burn_in_seasons = 0;
  FluEnsembleOutcome low;
  FluEnsembleOutcome high;
  double untrained_low_infection = 0.0;   // exposure check before any training
  double untrained_high_infection = 0.0;
};
FluDegreeResult run_flu_degree(const ExperimentSpec& spec, uint64_t seed);

// ---------------------------------------------------------------------------
// Top level: run all seeds of a spec, collect artifacts.

struct RunArtifacts {
  MetricsTable metrics;
  nlohmann::json manifest;
  std::vector<std::pair<std::string, Mlp>> policies;  // filename stem -> params
  std::optional<EpisodeTrace> trace;
};

RunArtifacts run_experiment(const ExperimentSpec& spec);
void write_run(const RunArtifacts& artifacts, const std::string& run_dir);

// Expands the sweep grid into concrete child specs (ids get suffixes).
std::vector<ExperimentSpec> expand_sweep(const ExperimentSpec& spec);

int thread_count();  // ABMRL_THREADS override, else hardware

}  // namespace abmrl
