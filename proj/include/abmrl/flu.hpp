#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abmrl/env.hpp"
#include "abmrl/network.hpp"
#include "abmrl/rng.hpp"

namespace abmrl {

// Season evaluation values delta(vaccinated?, infected?) in [0,1]; high means
// the outcome argues for vaccinating next season.
struct DeltaTable {
  double vacc_infected = 0.1;
  double vacc_healthy = 0.9;
  double novacc_infected = 1.0;
  double novacc_healthy = 0.0;

  double at(bool vaccinated, bool infected) const;
  void validate() const;
};

struct BehaviorParams {
  // Convex mix of decision drivers: intrinsic experience, professional
  // recommendation, stationary factors. The reduced model runs beta_a = 1.
  double beta_a = 1.0;
  double beta_b = 0.0;
  double beta_c = 0.0;
  double omega_pe = 0.7;  // weight on personal evaluation
  double omega_sn = 0.3;  // weight on social-network evaluation
  double s = 0.7;         // memory discount in [0,1]
  DeltaTable delta;
  double prior_coverage = 0.4;  // first-season decision probability
  // Inert inputs kept for the general mixing form.
  double phi = 0.0;
  double psi = 0.0;

  void validate() const;
  static BehaviorParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TransmissionParams {
  double gamma_rec = 1.0;   // recovery / contact-cessation rate
  double efficacy = 0.6;    // P(vaccine confers immunity)
  int seed_infections = 5;  // index cases per season

  void validate() const;
  static TransmissionParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Geometric partial sum (1 - s^n) / (1 - s); the s = 1 limit is n. This is
// the maximum attainable experience after n seasons, used to normalize.
double nsum(double s, int n);

double evaluate_personal(bool vaccinated, bool infected, const DeltaTable& table);

// Alter outcome proportions in the order (V,I), (V,~I), (~V,I), (~V,~I);
// must sum to 1 within 1e-9.
double evaluate_social(std::span<const double> proportions, const DeltaTable& table);

double combine_evaluations(double d_pe, double d_sn, double omega_pe, double omega_sn);

// V_n = s * V_{n-1} + delta
double update_experience(double v_prev, double delta, double s);

// upsilon_n = V_n / nsum(s, n), guaranteed in [0,1].
double propensity(double v, double s, int n);

// w = beta_a * upsilon + beta_b * phi + beta_c * psi (betas convex).
double vaccination_probability(double upsilon, double phi, double psi, const BehaviorParams& p);

// T = 1 - exp(-lambda / gamma)
double edge_activation_prob(double lambda, double gamma_rec);

// Immunity draws, one per vaccinated agent, indexed so runs that differ only
// in efficacy share their randomness: agent i is immune iff
// rng.uniform_at(index_base + i) < efficacy.
std::vector<uint8_t> apply_vaccination(const std::vector<uint8_t>& decisions, double efficacy,
                                       const RngStream& rng, uint64_t index_base = 0);

struct SeasonOutcome {
  double coverage = 0.0;
  double attack_rate = 0.0;
  int n_immune = 0;
  std::vector<uint8_t> vaccinated;
  std::vector<uint8_t> infected;
};

// One bond-percolation epidemic: every edge between two non-immune nodes is
// active with probability T_ij (draw index = edge id), infection floods from
// the seeds through active edges, infected nodes finish recovered. Immune
// seeds are replaced by draws (index >= edge count) from the remaining
// susceptibles, with a note on stderr.
std::vector<uint8_t> run_sir_season(const ContactNetwork& net, std::span<const int> seeds,
                                    const TransmissionParams& params,
                                    const std::vector<uint8_t>& immune, const RngStream& rng);

struct R0Estimate {
  double by_mean_degree = 0.0;    // <k> <T>
  double by_excess_degree = 0.0;  // (<k^2>/<k> - 1) <T>
  double mean_transmissibility = 0.0;
};
R0Estimate estimate_R0(const ContactNetwork& net, const TransmissionParams& params);

struct FluConfig {
  NetworkSpec network;
  TransmissionParams transmission;
  BehaviorParams behavior;
  int horizon = 1 << 20;  // seasons before done; effectively a continuing task

  void validate() const;
  static FluConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Seasonal vaccination environment. One step is one flu season: the joint
// actions are the vaccination decisions, rewards are 1 for agents that ended
// the season uninfected. Observations (7 wide): own last-season vaccinated
// and infected flags, the four alter outcome proportions in DeltaTable
// order, and a recommendation slot that stays 0 in this reduced model.
class FluEnv : public Env {
 public:
  explicit FluEnv(FluConfig cfg);
  FluEnv(FluConfig cfg, ContactNetwork net);  // fixed network, skips the generator

  std::vector<std::vector<double>> reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_actions) override;

  int num_agents() const override { return n_agents_; }
  int num_actions() const override { return 2; }
  int obs_dim() const override { return 7; }
  bool done() const override { return done_; }
  std::vector<std::string> summary_columns() const override;
  std::vector<double> last_summary() const override;
  nlohmann::json config_json() const override;

  const ContactNetwork& network() const { return net_; }
  const FluConfig& config() const { return cfg_; }
  int season() const { return season_; }
  const SeasonOutcome& last_outcome() const { return last_outcome_; }

 private:
  std::vector<std::vector<double>> observations() const;

  FluConfig cfg_;
  std::optional<ContactNetwork> fixed_net_;
  ContactNetwork net_;
  std::vector<double> edge_t_;  // activation probability per edge
  int n_agents_ = 0;
  int season_ = 0;
  bool done_ = false;
  bool ready_ = false;
  std::vector<uint8_t> prev_vaccinated_;
  std::vector<uint8_t> prev_infected_;
  SeasonOutcome last_outcome_;
  RngStream immunity_rng_;
  RngStream percolation_root_;
  RngStream seeding_rng_;
};

// Default adaptive behavioral model: discounted pro-vaccination experience
// V updated from each season's personal and social evaluations, normalized
// into a decision propensity. The first season uses the configured prior.
class DefaultFluAgent : public Agent {
 public:
  explicit DefaultFluAgent(BehaviorParams params);

  void reset(RngStream rng) override;
  int act(const std::vector<double>& obs) override;

  double experience() const { return v_; }
  int seasons() const { return seasons_; }
  double last_propensity() const { return last_w_; }
  // Hand a mid-run agent an established experience level (counterfactual
  // comparisons, ensemble swaps).
  void set_experience(double v, int seasons);

  const BehaviorParams& params() const { return params_; }

 private:
  BehaviorParams params_;
  RngStream rng_;
  double v_ = 0.0;
  int seasons_ = 0;
  double last_w_ = 0.0;
};

struct BurnInConfig {
  int window = 50;
  double tol = 0.01;
  int max_seasons = 500;
};

// Runs seasons until coverage and attack rate are stationary: the means of
// the two most recent disjoint `window`-season blocks differ by less than
// tol for both series. Returns the season count at stop. An infinite tol is
// vacuous and returns after `window` seasons. Throws when max_seasons pass
// without convergence.
int burn_in(FluEnv& env, std::span<Agent* const> agents, std::vector<std::vector<double>>& obs,
            const BurnInConfig& cfg);

}  // namespace abmrl
