#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "abmrl/errors.hpp"
#include "abmrl/flu.hpp"

using namespace abmrl;

namespace {

FluConfig tiny_config(int n_nodes = 40, double mean_degree = 4.0) {
  FluConfig cfg;
  cfg.network.type = "config_poisson";
  cfg.network.n_nodes = n_nodes;
  cfg.network.mean_degree = mean_degree;
  cfg.network.lambda = 0.25;
  cfg.transmission.gamma_rec = 1.0;
  cfg.transmission.efficacy = 0.6;
  cfg.transmission.seed_infections = 2;
  return cfg;
}

}  // namespace

TEST_CASE("nsum is the geometric partial sum with the s = 1 limit") {
  CHECK(nsum(0.0, 1) == doctest::Approx(1.0));
  CHECK(nsum(0.0, 9) == doctest::Approx(1.0));
  CHECK(nsum(1.0, 7) == doctest::Approx(7.0));
  CHECK(nsum(0.5, 3) == doctest::Approx(1.75).epsilon(1e-12));
  // direct summation agreement across a grid
  for (double s : {0.0, 0.1, 0.5, 0.9, 0.99, 1.0}) {
    for (int n : {1, 2, 5, 17, 60}) {
      double direct = 0.0;
      for (int j = 0; j < n; ++j) direct += std::pow(s, j);
      CHECK(nsum(s, n) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("personal evaluation reads the outcome table") {
  DeltaTable table;
  CHECK(evaluate_personal(false, true, table) == 1.0);
  CHECK(evaluate_personal(true, true, table) == doctest::Approx(0.1));
  CHECK(evaluate_personal(true, false, table) == doctest::Approx(0.9));
  CHECK(evaluate_personal(false, false, table) == 0.0);
  for (bool v : {false, true})
    for (bool i : {false, true}) {
      double d = evaluate_personal(v, i, table);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
}

TEST_CASE("social evaluation is the proportion-weighted table mean") {
  DeltaTable table;
  SUBCASE("all alters unvaccinated and infected") {
    CHECK(evaluate_social(std::array{0.0, 0.0, 1.0, 0.0}, table) == doctest::Approx(1.0));
  }
  SUBCASE("uniform proportions give the table mean") {
    double expect = (table.vacc_infected + table.vacc_healthy + table.novacc_infected +
                     table.novacc_healthy) /
                    4.0;
    CHECK(evaluate_social(std::array{0.25, 0.25, 0.25, 0.25}, table) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("proportions must sum to one") {
    CHECK_THROWS_AS(evaluate_social(std::array{0.3, 0.3, 0.3, 0.3}, table), ContractError);
  }
}

TEST_CASE("combined evaluation is the convex mix") {
  CHECK(combine_evaluations(0.4, 0.8, 1.0, 0.0) == doctest::Approx(0.4));
  CHECK(combine_evaluations(0.6, 0.6, 0.35, 0.65) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(combine_evaluations(0.2, 0.8, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(combine_evaluations(0.2, 0.8, 0.7, 0.7), ContractError);
}

TEST_CASE("experience update follows the discounted recursion") {
  CHECK(update_experience(5.0, 0.3, 0.0) == doctest::Approx(0.3));  // s=0 forgets the past
  double v = 0.0;
  for (int n = 0; n < 6; ++n) v = update_experience(v, 1.0, 1.0);
  CHECK(v == doctest::Approx(6.0));  // s=1 tallies the years
  CHECK(update_experience(1.5, 0.25, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("propensity is the normalized experience") {
  SUBCASE("constant evaluations pin the propensity exactly") {
    for (double c : {0.0, 0.37, 1.0}) {
      double v = 0.0;
      for (int n = 1; n <= 50; ++n) {
        v = update_experience(v, c, 0.8);
        CHECK(propensity(v, 0.8, n) == doctest::Approx(c).epsilon(1e-9));
      }
    }
  }
  SUBCASE("bounds hold under fuzzed evaluations") {
    RngStream rng(8, "fuzz");
    for (int rep = 0; rep < 2000; ++rep) {
      double s = rng.uniform();
      double v = 0.0;
      for (int n = 1; n <= 30; ++n) {
        v = update_experience(v, rng.uniform(), s);
        double u = propensity(v, s, n);
        CHECK(u >= 0.0);
        CHECK(u <= 1.0);
      }
    }
  }
}

TEST_CASE("vaccination probability is the convex driver mix") {
  BehaviorParams p;
  SUBCASE("reduced model passes the propensity through") {
    CHECK(vaccination_probability(0.3, 0.0, 0.0, p) == doctest::Approx(0.3));
  }
  SUBCASE("all drivers at one give probability one for any convex mix") {
    p.beta_a = 0.2;
    p.beta_b = 0.5;
    p.beta_c = 0.3;
    p.phi = 1.0;
    p.psi = 1.0;
    CHECK(vaccination_probability(1.0, 1.0, 1.0, p) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("hand-computed mix") {
    p.beta_a = 0.5;
    p.beta_b = 0.3;
    p.beta_c = 0.2;
    CHECK(vaccination_probability(0.4, 1.0, 0.0, p) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("edge activation probability") {
  CHECK(edge_activation_prob(1e-9, 1.0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(edge_activation_prob(1.0, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  // monotone in lambda, antitone in gamma
  CHECK(edge_activation_prob(2.0, 1.0) > edge_activation_prob(1.0, 1.0));
  CHECK(edge_activation_prob(1.0, 2.0) < edge_activation_prob(1.0, 1.0));
  CHECK_THROWS_AS(edge_activation_prob(0.0, 1.0), ContractError);
}

TEST_CASE("vaccination immunity draws") {
  RngStream rng(9, "imm");
  std::vector<uint8_t> decisions(10000, 1);
  SUBCASE("efficacy one immunizes every vaccinated agent") {
    auto immune = apply_vaccination(decisions, 1.0, rng);
    CHECK(std::accumulate(immune.begin(), immune.end(), 0) == 10000);
  }
  SUBCASE("efficacy zero immunizes nobody") {
    auto immune = apply_vaccination(decisions, 0.0, rng);
    CHECK(std::accumulate(immune.begin(), immune.end(), 0) == 0);
  }
  SUBCASE("monte-carlo rate matches the efficacy") {
    auto immune = apply_vaccination(decisions, 0.6, rng);
    double rate = std::accumulate(immune.begin(), immune.end(), 0) / 10000.0;
    CHECK(rate == doctest::Approx(0.6).epsilon(0.034));
  }
  SUBCASE("abstainers are never immunized") {
    std::vector<uint8_t> none(100, 0);
    auto immune = apply_vaccination(none, 1.0, rng);
    CHECK(std::accumulate(immune.begin(), immune.end(), 0) == 0);
  }
}

TEST_CASE("percolation on a line: P(C) = T^2") {
  // A - B - C with T = 0.5 per edge; C is infected iff both edges fire.
  double lambda = std::log(2.0);  // T = 1 - exp(-lambda) = 0.5
  auto net = ContactNetwork::from_edges(3, {{0, 1, lambda}, {1, 2, lambda}});
  TransmissionParams params;
  params.gamma_rec = 1.0;
  std::vector<uint8_t> immune(3, 0);
  RngStream root(10, "line");
  int hits = 0;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    RngStream stream = root.fork(std::to_string(r));
    auto infected = run_sir_season(net, std::array{0}, params, immune, stream);
    CHECK(infected[0] == 1);  // the seed always counts
    hits += infected[2];
  }
  CHECK(hits / static_cast<double>(reps) == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("complete graph with certain transmission infects everyone non-immune") {
  double lambda = 50.0;  // T effectively 1
  std::vector<ContactEdge> edges;
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b) edges.push_back({a, b, lambda});
  auto net = ContactNetwork::from_edges(6, edges);
  TransmissionParams params;
  std::vector<uint8_t> immune{0, 1, 0, 0, 1, 0};
  RngStream stream(11, "complete");
  auto infected = run_sir_season(net, std::array{0}, params, immune, stream);
  CHECK(infected == std::vector<uint8_t>{1, 0, 1, 1, 0, 1});
}

TEST_CASE("zero seeds give a zero attack") {
  auto net = ContactNetwork::from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  TransmissionParams params;
  std::vector<uint8_t> immune(3, 0);
  RngStream stream(12, "none");
  auto infected = run_sir_season(net, std::vector<int>{}, params, immune, stream);
  CHECK(std::accumulate(infected.begin(), infected.end(), 0) == 0);
}

TEST_CASE("percolation matches exact enumeration on a 5-node graph") {
  // Graph: square 0-1-2-3 with chord 1-3 and pendant 4 off node 2.
  double lambda = 0.4;
  std::vector<ContactEdge> edges{{0, 1, lambda}, {1, 2, lambda}, {2, 3, lambda},
                                 {0, 3, lambda}, {1, 3, lambda}, {2, 4, lambda}};
  auto net = ContactNetwork::from_edges(5, edges);
  TransmissionParams params;
  double t = edge_activation_prob(lambda, params.gamma_rec);

  // Exact oracle: enumerate all 2^E activation patterns, flood from the seed
  // through active edges, accumulate each node's infection probability.
  int n_edges = net.num_edges();
  std::vector<double> exact(5, 0.0);
  for (int mask = 0; mask < (1 << n_edges); ++mask) {
    double prob = 1.0;
    for (int e = 0; e < n_edges; ++e) prob *= (mask >> e) & 1 ? t : 1.0 - t;
    std::vector<uint8_t> reached(5, 0);
    reached[0] = 1;
    std::vector<int> queue{0};
    while (!queue.empty()) {
      int v = queue.back();
      queue.pop_back();
      for (int e = 0; e < n_edges; ++e) {
        if (!((mask >> e) & 1)) continue;
        const auto& edge = net.edges[static_cast<size_t>(e)];
        int other = -1;
        if (edge.a == v) other = edge.b;
        if (edge.b == v) other = edge.a;
        if (other >= 0 && !reached[static_cast<size_t>(other)]) {
          reached[static_cast<size_t>(other)] = 1;
          queue.push_back(other);
        }
      }
    }
    for (int v = 0; v < 5; ++v) exact[static_cast<size_t>(v)] += reached[static_cast<size_t>(v)] * prob;
  }

  std::vector<uint8_t> immune(5, 0);
  RngStream root(13, "exact");
  const int reps = 100000;
  std::vector<double> mc(5, 0.0);
  for (int r = 0; r < reps; ++r) {
    RngStream stream = root.fork(std::to_string(r));
    auto infected = run_sir_season(net, std::array{0}, params, immune, stream);
    for (int v = 0; v < 5; ++v) mc[static_cast<size_t>(v)] += infected[static_cast<size_t>(v)];
  }
  for (int v = 0; v < 5; ++v) {
    double p = exact[static_cast<size_t>(v)];
    double got = mc[static_cast<size_t>(v)] / reps;
    double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / reps);
    CHECK(std::fabs(got - p) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("immune index cases are replaced from the susceptible pool") {
  auto net = ContactNetwork::from_edges(3, {{0, 1, 10.0}, {1, 2, 10.0}});
  TransmissionParams params;
  std::vector<uint8_t> immune{1, 1, 0};  // only node 2 susceptible
  RngStream stream(14, "reseed");
  auto infected = run_sir_season(net, std::array{0}, params, immune, stream);
  CHECK(infected == std::vector<uint8_t>{0, 0, 1});
}

TEST_CASE("higher efficacy never enlarges the infected set under shared draws") {
  FluConfig cfg = tiny_config(200, 6.0);
  RngStream net_rng(15, "net");
  auto net = generate_network(cfg.network, net_rng);
  TransmissionParams params = cfg.transmission;

  RngStream decisions_rng(16, "dec");
  std::vector<uint8_t> decisions(static_cast<size_t>(net.n_nodes), 0);
  std::vector<int> seeds;
  for (int v = 0; v < net.n_nodes; ++v)
    decisions[static_cast<size_t>(v)] = decisions_rng.bernoulli(0.5) ? 1 : 0;
  for (int v = 0; v < net.n_nodes && static_cast<int>(seeds.size()) < 4; ++v)
    if (!decisions[static_cast<size_t>(v)]) seeds.push_back(v);  // never immune

  RngStream imm_rng(17, "imm");
  RngStream perc_rng(18, "perc");
  std::vector<uint8_t> prev_infected;
  for (double eff : {0.0, 0.3, 0.6, 0.9, 1.0}) {
    auto immune = apply_vaccination(decisions, eff, imm_rng);
    auto infected = run_sir_season(net, seeds, params, immune, perc_rng);
    if (!prev_infected.empty()) {
      for (size_t v = 0; v < infected.size(); ++v)
        CHECK(infected[v] <= prev_infected[v]);  // subset, node by node
    }
    prev_infected = infected;
  }
}

TEST_CASE("reproduction number estimates") {
  TransmissionParams params;
  params.gamma_rec = 1.0;
  SUBCASE("regular ring: <k> T and (d-1) T") {
    NetworkSpec spec;
    spec.type = "ring";
    spec.n_nodes = 50;
    spec.lambda = 1.0;
    RngStream rng(19, "net");
    auto net = generate_network(spec, rng);
    double t = edge_activation_prob(1.0, 1.0);
    auto est = estimate_R0(net, params);
    CHECK(est.by_mean_degree == doctest::Approx(2.0 * t).epsilon(1e-12));
    CHECK(est.by_excess_degree == doctest::Approx(1.0 * t).epsilon(1e-12));
    CHECK(est.mean_transmissibility == doctest::Approx(t).epsilon(1e-12));
  }
  SUBCASE("star graph closed forms") {
    int leaves = 9;
    std::vector<ContactEdge> edges;
    for (int v = 1; v <= leaves; ++v) edges.push_back({0, v, 1.0});
    auto net = ContactNetwork::from_edges(leaves + 1, edges);
    double t = edge_activation_prob(1.0, 1.0);
    // <k> = 2E/n; <k^2>/<k> - 1 = (n^2 + n) / (2n) - 1 with n = leaves
    double mean_k = 2.0 * leaves / (leaves + 1);
    double excess = (static_cast<double>(leaves) * leaves + leaves) / (2.0 * leaves) - 1.0;
    auto est = estimate_R0(net, params);
    CHECK(est.by_mean_degree == doctest::Approx(mean_k * t).epsilon(1e-12));
    CHECK(est.by_excess_degree == doctest::Approx(excess * t).epsilon(1e-12));
  }
  SUBCASE("vanishing transmissibility sends both estimates to zero") {
    NetworkSpec spec;
    spec.type = "ring";
    spec.n_nodes = 10;
    spec.lambda = 1e-9;
    RngStream rng(20, "net");
    auto net = generate_network(spec, rng);
    auto est = estimate_R0(net, params);
    CHECK(est.by_mean_degree == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(est.by_excess_degree == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("flu environment basics") {
  FluConfig cfg = tiny_config();
  FluEnv env(cfg);
  auto obs = env.reset(21);
  int n = env.num_agents();
  REQUIRE(n == cfg.network.n_nodes);

  SUBCASE("reset leaves everyone susceptible at season zero") {
    CHECK(env.season() == 0);
    for (const auto& o : obs) {
      REQUIRE(o.size() == 7);
      for (double v : o) CHECK(v == 0.0);
    }
  }

  SUBCASE("reset is deterministic") {
    FluEnv env2(cfg);
    CHECK(env2.reset(21) == obs);  // initial observations are all-zero either way
    // the seed shows up in the generated network and season draws
    FluEnv env3(cfg);
    env3.reset(22);
    bool same_net = env3.network().num_edges() == env.network().num_edges();
    if (same_net) {
      std::vector<int> all(static_cast<size_t>(env3.num_agents()), 1);
      std::vector<int> all2(static_cast<size_t>(env.num_agents()), 1);
      same_net = env3.step(all).rewards == env.step(all2).rewards;
    }
    CHECK_FALSE(same_net);
  }

  SUBCASE("rewards are 1 exactly for the uninfected") {
    std::vector<int> actions(static_cast<size_t>(n), 0);
    auto result = env.step(actions);
    const auto& outcome = env.last_outcome();
    for (int i = 0; i < n; ++i)
      CHECK(result.rewards[static_cast<size_t>(i)] ==
            (outcome.infected[static_cast<size_t>(i)] ? 0.0 : 1.0));
    CHECK(outcome.attack_rate > 0.0);  // nobody vaccinated, seeds spread
  }

  SUBCASE("observations report own outcome and alter proportions") {
    std::vector<int> actions(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; i += 2) actions[static_cast<size_t>(i)] = 1;
    auto result = env.step(actions);
    const auto& outcome = env.last_outcome();
    for (int i = 0; i < n; ++i) {
      const auto& o = result.observations[static_cast<size_t>(i)];
      CHECK(o[0] == (actions[static_cast<size_t>(i)] ? 1.0 : 0.0));
      CHECK(o[1] == (outcome.infected[static_cast<size_t>(i)] ? 1.0 : 0.0));
      double psum = o[2] + o[3] + o[4] + o[5];
      if (env.network().degree(i) > 0)
        CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));
      else
        CHECK(psum == 0.0);
      CHECK(o[6] == 0.0);  // recommendation slot is inert
    }
  }

  SUBCASE("infected and immune never overlap, and counts conserve") {
    std::vector<int> actions(static_cast<size_t>(n), 1);
    env.step(actions);
    const auto& outcome = env.last_outcome();
    int immune = 0, infected = 0;
    for (int i = 0; i < n; ++i) {
      bool imm = false;
      // immune agents are exactly those vaccinated minus the failures; the
      // env does not expose the immune set directly, but an infected agent
      // can never be immune, so cross-check via the counters
      (void)imm;
      infected += outcome.infected[static_cast<size_t>(i)];
    }
    immune = outcome.n_immune;
    CHECK(infected + immune <= n);
    CHECK(outcome.attack_rate == doctest::Approx(infected / static_cast<double>(n)));
  }

  SUBCASE("full immunity stops the epidemic") {
    FluConfig sure = cfg;
    sure.transmission.efficacy = 1.0;
    FluEnv env2(sure);
    env2.reset(23);
    std::vector<int> actions(static_cast<size_t>(env2.num_agents()), 1);
    auto result = env2.step(actions);
    CHECK(env2.last_outcome().attack_rate == 0.0);
    for (double r : result.rewards) CHECK(r == 1.0);
  }
}

TEST_CASE("default behavioral agent") {
  BehaviorParams params;
  DefaultFluAgent agent(params);
  agent.reset(RngStream(24, "agent"));

  SUBCASE("first decision uses the configured prior") {
    std::vector<double> zeros(7, 0.0);
    int ones = 0;
    const int reps = 4000;
    DefaultFluAgent probe(params);
    for (int r = 0; r < reps; ++r) {
      probe.reset(RngStream(static_cast<uint64_t>(r), "probe"));
      ones += probe.act(zeros);
    }
    CHECK(ones / static_cast<double>(reps) == doctest::Approx(params.prior_coverage).epsilon(0.08));
  }

  SUBCASE("experience accumulates from observations") {
    std::vector<double> zeros(7, 0.0);
    agent.act(zeros);  // season 0, no update
    CHECK(agent.experience() == 0.0);
    // vaccinated and healthy, alters evenly split
    std::vector<double> obs{1.0, 0.0, 0.25, 0.25, 0.25, 0.25, 0.0};
    agent.act(obs);
    double d_pe = params.delta.vacc_healthy;
    double d_sn = (params.delta.vacc_infected + params.delta.vacc_healthy +
                   params.delta.novacc_infected + params.delta.novacc_healthy) /
                  4.0;
    double d = params.omega_pe * d_pe + params.omega_sn * d_sn;
    CHECK(agent.experience() == doctest::Approx(d).epsilon(1e-12));
    CHECK(agent.last_propensity() == doctest::Approx(d).epsilon(1e-12));
  }

  SUBCASE("isolated agents fall back to their personal evaluation") {
    DefaultFluAgent loner(params);
    loner.reset(RngStream(25, "loner"));
    std::vector<double> zeros(7, 0.0);
    loner.act(zeros);
    std::vector<double> obs{0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // infected, no alters
    loner.act(obs);
    CHECK(loner.experience() == doctest::Approx(params.delta.novacc_infected).epsilon(1e-12));
  }
}

TEST_CASE("burn-in stationarity") {
  FluConfig cfg = tiny_config(150, 5.0);
  SUBCASE("a vacuous tolerance returns after one window") {
    FluEnv env(cfg);
    auto obs = env.reset(26);
    std::vector<DefaultFluAgent> agents;
    for (int i = 0; i < env.num_agents(); ++i) agents.emplace_back(cfg.behavior);
    RngStream root(27, "agents");
    std::vector<Agent*> roster;
    for (int i = 0; i < env.num_agents(); ++i) {
      agents[static_cast<size_t>(i)].reset(root.fork(std::to_string(i)));
      roster.push_back(&agents[static_cast<size_t>(i)]);
    }
    BurnInConfig bcfg;
    bcfg.window = 10;
    bcfg.tol = std::numeric_limits<double>::infinity();
    bcfg.max_seasons = 100;
    CHECK(burn_in(env, roster, obs, bcfg) == 10);
  }

  SUBCASE("degenerate parameters converge fast to zero coverage") {
    FluConfig dead = cfg;
    dead.transmission.efficacy = 0.0;
    dead.behavior.delta = DeltaTable{0.0, 0.0, 0.0, 0.0};
    FluEnv env(dead);
    auto obs = env.reset(28);
    std::vector<DefaultFluAgent> agents;
    for (int i = 0; i < env.num_agents(); ++i) agents.emplace_back(dead.behavior);
    RngStream root(29, "agents");
    std::vector<Agent*> roster;
    for (int i = 0; i < env.num_agents(); ++i) {
      agents[static_cast<size_t>(i)].reset(root.fork(std::to_string(i)));
      roster.push_back(&agents[static_cast<size_t>(i)]);
    }
    BurnInConfig bcfg;
    bcfg.window = 10;
    bcfg.tol = 0.02;
    bcfg.max_seasons = 200;
    int stop = burn_in(env, roster, obs, bcfg);
    CHECK(stop <= 60);
    CHECK(env.last_summary()[0] == doctest::Approx(0.0).epsilon(0.01));  // coverage died
  }

  SUBCASE("an impossible tolerance raises a diagnostic error") {
    FluEnv env(cfg);
    auto obs = env.reset(30);
    std::vector<DefaultFluAgent> agents;
    for (int i = 0; i < env.num_agents(); ++i) agents.emplace_back(cfg.behavior);
    RngStream root(31, "agents");
    std::vector<Agent*> roster;
    for (int i = 0; i < env.num_agents(); ++i) {
      agents[static_cast<size_t>(i)].reset(root.fork(std::to_string(i)));
      roster.push_back(&agents[static_cast<size_t>(i)]);
    }
    BurnInConfig bcfg;
    bcfg.window = 10;
    bcfg.tol = 0.0;
    bcfg.max_seasons = 40;
    CHECK_THROWS_AS(burn_in(env, roster, obs, bcfg), NumericError);
  }
}

TEST_CASE("season pipeline is deterministic and ordered") {
  FluConfig cfg = tiny_config(80, 4.0);
  auto run_seasons = [&](uint64_t seed) {
    FluEnv env(cfg);
    auto obs = env.reset(seed);
    std::vector<DefaultFluAgent> agents;
    for (int i = 0; i < env.num_agents(); ++i) agents.emplace_back(cfg.behavior);
    RngStream root(seed + 1000, "agents");
    std::vector<Agent*> roster;
    for (int i = 0; i < env.num_agents(); ++i) {
      agents[static_cast<size_t>(i)].reset(root.fork(std::to_string(i)));
      roster.push_back(&agents[static_cast<size_t>(i)]);
    }
    std::vector<double> series;
    for (int season = 0; season < 30; ++season) {
      run_window(env, roster, obs, 1, nullptr);
      auto s = env.last_summary();
      series.push_back(s[0]);
      series.push_back(s[1]);
    }
    return series;
  };
  CHECK(run_seasons(32) == run_seasons(32));
  CHECK(run_seasons(32) != run_seasons(33));
}
