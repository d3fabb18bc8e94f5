#include "abmrl/flu.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "abmrl/errors.hpp"

namespace abmrl {

double DeltaTable::at(bool vaccinated, bool infected) const {
  if (vaccinated) return infected ? vacc_infected : vacc_healthy;
  return infected ? novacc_infected : novacc_healthy;
}

void DeltaTable::validate() const {
  for (double v : {vacc_infected, vacc_healthy, novacc_infected, novacc_healthy})
    require(v >= 0.0 && v <= 1.0, "DeltaTable: entries must lie in [0,1]");
}

void BehaviorParams::validate() const {
  require(beta_a >= 0.0 && beta_b >= 0.0 && beta_c >= 0.0,
          "BehaviorParams: beta coefficients must be non-negative");
  require(std::fabs(beta_a + beta_b + beta_c - 1.0) < 1e-9,
          "BehaviorParams: beta coefficients must sum to 1");
  require(omega_pe >= 0.0 && omega_sn >= 0.0, "BehaviorParams: omegas must be non-negative");
  require(std::fabs(omega_pe + omega_sn - 1.0) < 1e-9, "BehaviorParams: omegas must sum to 1");
  require(s >= 0.0 && s <= 1.0, "BehaviorParams: s must lie in [0,1]");
  require(prior_coverage >= 0.0 && prior_coverage <= 1.0,
          "BehaviorParams: prior_coverage must lie in [0,1]");
  require(phi >= 0.0 && phi <= 1.0 && psi >= 0.0 && psi <= 1.0,
          "BehaviorParams: phi and psi must lie in [0,1]");
  delta.validate();
}

BehaviorParams BehaviorParams::from_json(const nlohmann::json& j) {
  BehaviorParams p;
  p.beta_a = j.value("beta_a", p.beta_a);
  p.beta_b = j.value("beta_b", p.beta_b);
  p.beta_c = j.value("beta_c", p.beta_c);
  p.omega_pe = j.value("omega_pe", p.omega_pe);
  p.omega_sn = j.value("omega_sn", p.omega_sn);
  p.s = j.value("s", p.s);
  p.prior_coverage = j.value("prior_coverage", p.prior_coverage);
  p.phi = j.value("phi", p.phi);
  p.psi = j.value("psi", p.psi);
  if (j.contains("delta_table")) {
    const auto& d = j.at("delta_table");
    p.delta.vacc_infected = d.value("vacc_infected", p.delta.vacc_infected);
    p.delta.vacc_healthy = d.value("vacc_healthy", p.delta.vacc_healthy);
    p.delta.novacc_infected = d.value("novacc_infected", p.delta.novacc_infected);
    p.delta.novacc_healthy = d.value("novacc_healthy", p.delta.novacc_healthy);
  }
  p.validate();
  return p;
}

nlohmann::json BehaviorParams::to_json() const {
  return nlohmann::json{{"beta_a", beta_a},
                        {"beta_b", beta_b},
                        {"beta_c", beta_c},
                        {"omega_pe", omega_pe},
                        {"omega_sn", omega_sn},
                        {"s", s},
                        {"prior_coverage", prior_coverage},
                        {"phi", phi},
                        {"psi", psi},
                        {"delta_table",
                         {{"vacc_infected", delta.vacc_infected},
                          {"vacc_healthy", delta.vacc_healthy},
                          {"novacc_infected", delta.novacc_infected},
                          {"novacc_healthy", delta.novacc_healthy}}}};
}

void TransmissionParams::validate() const {
  require(gamma_rec > 0.0, "TransmissionParams: gamma_rec must be positive");
  require(efficacy >= 0.0 && efficacy <= 1.0, "TransmissionParams: efficacy must lie in [0,1]");
  require(seed_infections >= 0, "TransmissionParams: seed_infections must be >= 0");
}

TransmissionParams TransmissionParams::from_json(const nlohmann::json& j) {
  TransmissionParams p;
  p.gamma_rec = j.value("gamma_rec", p.gamma_rec);
  p.efficacy = j.value("efficacy", p.efficacy);
  p.seed_infections = j.value("seed_infections", p.seed_infections);
  p.validate();
  return p;
}

nlohmann::json TransmissionParams::to_json() const {
  return nlohmann::json{{"gamma_rec", gamma_rec},
                        {"efficacy", efficacy},
                        {"seed_infections", seed_infections}};
}

double nsum(double s, int n) {
  require(s >= 0.0 && s <= 1.0, "nsum: s must lie in [0,1]");
  require(n >= 1, "nsum: n must be >= 1");
  if (s == 1.0) return static_cast<double>(n);
  return (1.0 - std::pow(s, n)) / (1.0 - s);
}

double evaluate_personal(bool vaccinated, bool infected, const DeltaTable& table) {
  return table.at(vaccinated, infected);
}

double evaluate_social(std::span<const double> proportions, const DeltaTable& table) {
  require(proportions.size() == 4, "evaluate_social: need four outcome proportions");
  double sum = 0.0;
  for (double p : proportions) {
    require(p >= 0.0, "evaluate_social: proportions must be non-negative");
    sum += p;
  }
  require(std::fabs(sum - 1.0) <= 1e-9, "evaluate_social: proportions must sum to 1");
  return proportions[0] * table.vacc_infected + proportions[1] * table.vacc_healthy +
         proportions[2] * table.novacc_infected + proportions[3] * table.novacc_healthy;
}

double combine_evaluations(double d_pe, double d_sn, double omega_pe, double omega_sn) {
  require(omega_pe >= 0.0 && omega_sn >= 0.0 && std::fabs(omega_pe + omega_sn - 1.0) < 1e-9,
          "combine_evaluations: weights must be convex");
  return omega_pe * d_pe + omega_sn * d_sn;
}

double update_experience(double v_prev, double delta, double s) {
  require(v_prev >= 0.0, "update_experience: experience must be non-negative");
  return s * v_prev + delta;
}

double propensity(double v, double s, int n) {
  double u = v / nsum(s, n);
  // Clamp rounding residue; the accumulation bound guarantees [0,1].
  return std::min(1.0, std::max(0.0, u));
}

double vaccination_probability(double upsilon, double phi, double psi, const BehaviorParams& p) {
  p.validate();
  return p.beta_a * upsilon + p.beta_b * phi + p.beta_c * psi;
}

double edge_activation_prob(double lambda, double gamma_rec) {
  require(lambda > 0.0 && gamma_rec > 0.0, "edge_activation_prob: rates must be positive");
  return 1.0 - std::exp(-lambda / gamma_rec);
}

std::vector<uint8_t> apply_vaccination(const std::vector<uint8_t>& decisions, double efficacy,
                                       const RngStream& rng, uint64_t index_base) {
  require(efficacy >= 0.0 && efficacy <= 1.0, "apply_vaccination: efficacy must lie in [0,1]");
  std::vector<uint8_t> immune(decisions.size(), 0);
  if (efficacy <= 0.0) return immune;
  for (size_t i = 0; i < decisions.size(); ++i)
    if (decisions[i]) immune[i] = rng.bernoulli_at(index_base + i, efficacy) ? 1 : 0;
  return immune;
}

std::vector<uint8_t> run_sir_season(const ContactNetwork& net, std::span<const int> seeds,
                                    const TransmissionParams& params,
                                    const std::vector<uint8_t>& immune, const RngStream& rng) {
  params.validate();
  require(static_cast<int>(immune.size()) == net.n_nodes,
          "run_sir_season: immune flag per node required");
  size_t n_edges = net.edges.size();

  std::vector<uint8_t> infected(static_cast<size_t>(net.n_nodes), 0);
  std::vector<int> queue;
  uint64_t reseed_index = n_edges;
  for (int s : seeds) {
    require(s >= 0 && s < net.n_nodes, "run_sir_season: seed out of range");
    int node = s;
    if (immune[static_cast<size_t>(node)]) {
      // Replace the index case with a susceptible node, if any remain.
      std::vector<int> pool;
      for (int v = 0; v < net.n_nodes; ++v)
        if (!immune[static_cast<size_t>(v)] && !infected[static_cast<size_t>(v)]) pool.push_back(v);
      if (pool.empty()) continue;
      uint64_t u = rng.at(reseed_index++);
      node = pool[static_cast<size_t>(
          (static_cast<__uint128_t>(u) * pool.size()) >> 64)];
      std::cerr << "note: run_sir_season reseeded immune index case " << s << " -> " << node
                << "\n";
    }
    if (!infected[static_cast<size_t>(node)]) {
      infected[static_cast<size_t>(node)] = 1;
      queue.push_back(node);
    }
  }

  // Percolation flood: an edge transmits iff both ends are non-immune and its
  // activation draw (indexed by edge id) falls below T_ij.
  while (!queue.empty()) {
    int v = queue.back();
    queue.pop_back();
    for (int eid : net.incident[static_cast<size_t>(v)]) {
      const ContactEdge& e = net.edges[static_cast<size_t>(eid)];
      int other = (e.a == v) ? e.b : e.a;
      if (infected[static_cast<size_t>(other)] || immune[static_cast<size_t>(other)]) continue;
      double t = edge_activation_prob(e.lambda, params.gamma_rec);
      if (!rng.bernoulli_at(static_cast<uint64_t>(eid), t)) continue;
      infected[static_cast<size_t>(other)] = 1;
      queue.push_back(other);
    }
  }
  return infected;
}

R0Estimate estimate_R0(const ContactNetwork& net, const TransmissionParams& params) {
  require(net.n_nodes > 0, "estimate_R0: empty network");
  R0Estimate est;
  double t_sum = 0.0;
  for (const auto& e : net.edges) t_sum += edge_activation_prob(e.lambda, params.gamma_rec);
  est.mean_transmissibility = net.edges.empty() ? 0.0 : t_sum / net.edges.size();
  est.by_mean_degree = net.mean_degree() * est.mean_transmissibility;
  est.by_excess_degree = net.mean_excess_degree() * est.mean_transmissibility;
  return est;
}

void FluConfig::validate() const {
  transmission.validate();
  behavior.validate();
  require(horizon >= 1, "FluConfig: horizon must be >= 1");
}

FluConfig FluConfig::from_json(const nlohmann::json& j) {
  FluConfig cfg;
  if (j.contains("network")) cfg.network = NetworkSpec::from_json(j.at("network"));
  cfg.transmission = TransmissionParams::from_json(j);
  cfg.behavior = BehaviorParams::from_json(j);
  cfg.horizon = j.value("horizon", cfg.horizon);
  if (j.contains("burn_in")) {
    // burn-in keys are read by the harness; accept and ignore here
  }
  cfg.validate();
  return cfg;
}

nlohmann::json FluConfig::to_json() const {
  nlohmann::json j = transmission.to_json();
  j.update(behavior.to_json());
  j["network"] = network.to_json();
  j["horizon"] = horizon;
  return j;
}

FluEnv::FluEnv(FluConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

FluEnv::FluEnv(FluConfig cfg, ContactNetwork net)
    : cfg_(std::move(cfg)), fixed_net_(std::move(net)) {
  cfg_.validate();
}

std::vector<std::vector<double>> FluEnv::reset(uint64_t seed) {
  RngStream root(seed, "flu-env");
  if (fixed_net_) {
    net_ = *fixed_net_;
  } else {
    RngStream net_rng = root.fork("network");
    net_ = generate_network(cfg_.network, net_rng);
  }
  n_agents_ = net_.n_nodes;
  edge_t_.clear();
  edge_t_.reserve(net_.edges.size());
  for (const auto& e : net_.edges)
    edge_t_.push_back(edge_activation_prob(e.lambda, cfg_.transmission.gamma_rec));

  immunity_rng_ = root.fork("immunity");
  percolation_root_ = root.fork("percolation");
  seeding_rng_ = root.fork("seeding");
  season_ = 0;
  done_ = false;
  ready_ = true;
  prev_vaccinated_.assign(static_cast<size_t>(n_agents_), 0);
  prev_infected_.assign(static_cast<size_t>(n_agents_), 0);
  last_outcome_ = SeasonOutcome{};
  return observations();
}

std::vector<std::vector<double>> FluEnv::observations() const {
  std::vector<std::vector<double>> obs(static_cast<size_t>(n_agents_),
                                       std::vector<double>(7, 0.0));
  if (season_ == 0) return obs;
  for (int v = 0; v < n_agents_; ++v) {
    auto& o = obs[static_cast<size_t>(v)];
    o[0] = prev_vaccinated_[static_cast<size_t>(v)] ? 1.0 : 0.0;
    o[1] = prev_infected_[static_cast<size_t>(v)] ? 1.0 : 0.0;
    int deg = net_.degree(v);
    if (deg > 0) {
      double counts[4] = {0, 0, 0, 0};
      for (int eid : net_.incident[static_cast<size_t>(v)]) {
        const ContactEdge& e = net_.edges[static_cast<size_t>(eid)];
        int alter = (e.a == v) ? e.b : e.a;
        bool av = prev_vaccinated_[static_cast<size_t>(alter)];
        bool ai = prev_infected_[static_cast<size_t>(alter)];
        counts[(av ? 0 : 2) + (ai ? 0 : 1)] += 1.0;
      }
      for (int c = 0; c < 4; ++c) o[2 + c] = counts[c] / deg;
    }
    // o[6] stays 0: recommendation channel absent from the reduced model
  }
  return obs;
}

StepResult FluEnv::step(const std::vector<int>& joint_actions) {
  require(ready_, "FluEnv::step: call reset first");
  require(!done_, "FluEnv::step: episode already finished");
  require(static_cast<int>(joint_actions.size()) == n_agents_,
          "FluEnv::step: need one action per agent");

  std::vector<uint8_t> decisions(static_cast<size_t>(n_agents_), 0);
  int n_vacc = 0;
  for (int i = 0; i < n_agents_; ++i) {
    int a = joint_actions[static_cast<size_t>(i)];
    require(a == 0 || a == 1, "FluEnv::step: actions must be 0 (abstain) or 1 (vaccinate)");
    decisions[static_cast<size_t>(i)] = static_cast<uint8_t>(a);
    n_vacc += a;
  }

  uint64_t immunity_base = static_cast<uint64_t>(season_) * static_cast<uint64_t>(n_agents_);
  auto immune = apply_vaccination(decisions, cfg_.transmission.efficacy, immunity_rng_,
                                  immunity_base);
  int n_immune = std::accumulate(immune.begin(), immune.end(), 0);

  // Index cases drawn uniformly among the non-immune (all susceptible at
  // season start) via partial Fisher-Yates on the pool.
  std::vector<int> pool;
  pool.reserve(static_cast<size_t>(n_agents_));
  for (int v = 0; v < n_agents_; ++v)
    if (!immune[static_cast<size_t>(v)]) pool.push_back(v);
  int n_seeds = std::min<int>(cfg_.transmission.seed_infections, static_cast<int>(pool.size()));
  std::vector<int> seeds;
  for (int k = 0; k < n_seeds; ++k) {
    size_t j = k + seeding_rng_.below(pool.size() - static_cast<size_t>(k));
    std::swap(pool[static_cast<size_t>(k)], pool[j]);
    seeds.push_back(pool[static_cast<size_t>(k)]);
  }

  RngStream season_rng = percolation_root_.fork(std::to_string(season_));
  auto infected = run_sir_season(net_, seeds, cfg_.transmission, immune, season_rng);
  int n_infected = std::accumulate(infected.begin(), infected.end(), 0);

  StepResult result;
  result.rewards.resize(static_cast<size_t>(n_agents_));
  for (int i = 0; i < n_agents_; ++i)
    result.rewards[static_cast<size_t>(i)] = infected[static_cast<size_t>(i)] ? 0.0 : 1.0;

  prev_vaccinated_ = decisions;
  prev_infected_ = infected;
  last_outcome_.coverage = static_cast<double>(n_vacc) / n_agents_;
  last_outcome_.attack_rate = static_cast<double>(n_infected) / n_agents_;
  last_outcome_.n_immune = n_immune;
  last_outcome_.vaccinated = decisions;
  last_outcome_.infected = infected;

  ++season_;
  done_ = season_ >= cfg_.horizon;
  result.done = done_;
  result.observations = observations();
  return result;
}

std::vector<std::string> FluEnv::summary_columns() const {
  return {"coverage", "attack_rate", "n_immune"};
}

std::vector<double> FluEnv::last_summary() const {
  return {last_outcome_.coverage, last_outcome_.attack_rate,
          static_cast<double>(last_outcome_.n_immune)};
}

nlohmann::json FluEnv::config_json() const {
  nlohmann::json j = cfg_.to_json();
  j["env"] = "flu";
  return j;
}

DefaultFluAgent::DefaultFluAgent(BehaviorParams params) : params_(std::move(params)) {
  params_.validate();
}

void DefaultFluAgent::reset(RngStream rng) {
  rng_ = std::move(rng);
  v_ = 0.0;
  seasons_ = 0;
  last_w_ = params_.prior_coverage;
}

void DefaultFluAgent::set_experience(double v, int seasons) {
  require(v >= 0.0 && seasons >= 0, "DefaultFluAgent::set_experience: bad state");
  if (seasons >= 1)
    require(v <= nsum(params_.s, seasons) + 1e-9,
            "DefaultFluAgent::set_experience: experience above attainable bound");
  v_ = v;
  seasons_ = seasons;
}

int DefaultFluAgent::act(const std::vector<double>& obs) {
  require(obs.size() >= 7, "DefaultFluAgent: observation must be 7 wide");
  double w;
  if (seasons_ == 0) {
    w = params_.prior_coverage;
  } else {
    bool vacc = obs[0] != 0.0;
    bool inf = obs[1] != 0.0;
    double d_pe = evaluate_personal(vacc, inf, params_.delta);
    std::span<const double> props(obs.data() + 2, 4);
    double psum = props[0] + props[1] + props[2] + props[3];
    // Isolated agents have no alters to observe; fall back to their own read.
    double d_sn = psum < 0.5 ? d_pe : evaluate_social(props, params_.delta);
    double d = combine_evaluations(d_pe, d_sn, params_.omega_pe, params_.omega_sn);
    v_ = update_experience(v_, d, params_.s);
    double upsilon = propensity(v_, params_.s, seasons_);
    w = vaccination_probability(upsilon, params_.phi, params_.psi, params_);
  }
  ++seasons_;
  last_w_ = w;
  return rng_.bernoulli(w) ? 1 : 0;
}

int burn_in(FluEnv& env, std::span<Agent* const> agents, std::vector<std::vector<double>>& obs,
            const BurnInConfig& cfg) {
  require(cfg.window >= 10, "burn_in: window must be >= 10");
  require(cfg.max_seasons >= cfg.window, "burn_in: max_seasons must cover one window");
  std::deque<double> cov, att;
  auto block_mean = [](const std::deque<double>& q, size_t from, size_t len) {
    double s = 0.0;
    for (size_t i = from; i < from + len; ++i) s += q[i];
    return s / static_cast<double>(len);
  };
  size_t w = static_cast<size_t>(cfg.window);
  bool vacuous = std::isinf(cfg.tol);
  for (int season = 1; season <= cfg.max_seasons; ++season) {
    int took = run_window(env, agents, obs, 1, nullptr);
    require(took == 1, "burn_in: environment finished before stationarity");
    auto summary = env.last_summary();
    cov.push_back(summary[0]);
    att.push_back(summary[1]);
    if (cov.size() > 2 * w) {
      cov.pop_front();
      att.pop_front();
    }
    if (vacuous && season >= cfg.window) return season;
    if (cov.size() == 2 * w) {
      double dc = std::fabs(block_mean(cov, w, w) - block_mean(cov, 0, w));
      double da = std::fabs(block_mean(att, w, w) - block_mean(att, 0, w));
      if (dc < cfg.tol && da < cfg.tol) return season;
    }
  }
  std::ostringstream msg;
  msg << "burn_in: no stationarity after " << cfg.max_seasons << " seasons"
      << " (window " << cfg.window << ", tol " << cfg.tol << "; last coverage "
      << (cov.empty() ? 0.0 : cov.back()) << ", last attack rate "
      << (att.empty() ? 0.0 : att.back()) << ")";
  throw NumericError(msg.str());
}

}  // namespace abmrl
