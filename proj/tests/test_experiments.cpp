#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "abmrl/errors.hpp"
#include "abmrl/experiments.hpp"

using namespace abmrl;
namespace fs = std::filesystem;

namespace {

// Desk-sized single-learner game that trains in a couple of seconds.
ExperimentSpec small_mg_spec() {
  ExperimentSpec spec = default_spec("mg_single_fixed");
  spec.env["n_agents"] = 21;
  spec.env["horizon"] = 200;
  spec.train["epochs"] = 150;
  spec.seeds = {5};
  return spec;
}

}  // namespace

TEST_CASE("spec json round-trip and validation") {
  ExperimentSpec spec = default_spec("mg_single_fixed");
  auto j = spec.to_json();
  ExperimentSpec back = ExperimentSpec::from_json(j);
  CHECK(back.kind == spec.kind);
  CHECK(back.seeds == spec.seeds);
  CHECK(back.env == spec.env);

  SUBCASE("missing seeds are rejected") {
    j.erase("seeds");
    CHECK_THROWS_AS(ExperimentSpec::from_json(j), ConfigError);
  }
  SUBCASE("unknown kinds are rejected") {
    j["kind"] = "quantum_chess";
    CHECK_THROWS_AS(ExperimentSpec::from_json(j), ConfigError);
  }
}

TEST_CASE("every built-in default spec validates") {
  for (const auto& kind : known_kinds()) CHECK_NOTHROW(default_spec(kind).validate());
}

TEST_CASE("sweep expansion is a cartesian product with distinct ids") {
  ExperimentSpec spec = small_mg_spec();
  spec.sweep = {{"train.alpha_pi", {0.01, 0.05}}, {"env.rl_window", {3, 4, 5}}};
  auto children = expand_sweep(spec);
  REQUIRE(children.size() == 6);
  std::set<std::string> ids;
  for (const auto& c : children) {
    ids.insert(c.id);
    CHECK(c.sweep.empty());
    double a = c.train.at("alpha_pi").get<double>();
    CHECK((a == 0.01 || a == 0.05));
    int w = c.env.at("rl_window").get<int>();
    CHECK((w == 3 || w == 4 || w == 5));
  }
  CHECK(ids.size() == 6);
}

TEST_CASE("a learner beats the fixed small population it trained against") {
  ExperimentSpec spec = small_mg_spec();
  auto result = run_mg_single_fixed(spec);
  REQUIRE(result.final_win_rates.size() == 1);
  // 20 basic agents cycle; the learner should come close to always winning
  CHECK(result.untrained_win_rates[0] > 0.3);
  CHECK(result.untrained_win_rates[0] < 0.7);
  CHECK(result.final_win_rates[0] > 0.9);
  CHECK(result.final_win_rates[0] > result.untrained_win_rates[0]);

  SUBCASE("the mirrored training population breaks the learned policy") {
    auto gen = run_mg_generalization(result.trained_policies[0], spec, spec.seeds[0],
                                     result.final_win_rates[0]);
    CHECK(gen.mirror_win_rate < result.final_win_rates[0] - 0.05);
    // evaluation over fresh populations exists for every requested population
    CHECK(gen.population_win_rates.size() == 100);
  }
}

TEST_CASE("cycle probe works at the experiment scale") {
  GameConfig cfg;
  cfg.n_agents = 301;
  cfg.memory_m = 2;
  cfg.strategies_k = 2;
  auto probe = mg_attendance_cycle(cfg, 12345, 64, 16);
  CHECK(probe.period > 0);
  CHECK(static_cast<int>(probe.winner_pattern.size()) == probe.period);
}

TEST_CASE("experiment metrics are a pure function of spec and seed") {
  ExperimentSpec spec = small_mg_spec();
  auto a = run_mg_single_fixed(spec).metrics.csv();
  auto b = run_mg_single_fixed(spec).metrics.csv();
  CHECK(a == b);
  spec.seeds = {6};
  auto c = run_mg_single_fixed(spec).metrics.csv();
  CHECK(a != c);
}

TEST_CASE("multi-learner training runs and logs rewards in range") {
  ExperimentSpec spec = default_spec("mg_multi");
  spec.train["epochs"] = 30;
  spec.eval["episodes"] = 5;
  spec.env["horizon"] = 60;
  auto result = run_mg_multi(spec, 77);
  CHECK(result.pre_per_agent.size() == 3);
  CHECK(result.post_per_agent.size() == 3);
  for (double r : result.post_per_agent) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  for (const auto& row : result.metrics.rows) {
    if (row.metric == "agg_reward") {
      CHECK(row.value >= 0.0);
      CHECK(row.value <= 1.0);
    }
  }
}

TEST_CASE("flu single-seed run improves the learner and writes sane metrics") {
  ExperimentSpec spec = default_spec("flu_single");
  // desk-size the network and schedule so the test stays quick
  spec.env["network"]["n_nodes"] = 300;
  spec.env["burn_in"] = {{"window", 20}, {"tol", 0.02}, {"max", 300}};
  spec.train["epochs"] = 150;
  spec.train["window_seasons"] = 5;
  spec.eval["seasons"] = 60;
  spec.write_trace = false;
  auto result = run_flu_single(spec, 9001);
  CHECK(result.burn_in_seasons >= 20);
  CHECK(result.post_rate >= 0.0);
  CHECK(result.post_rate <= 1.0);
  CHECK(result.post_rate > result.pre_rate - 0.05);  // training must not wreck the agent
  // with vaccination free and effective, the trained learner should do well
  CHECK(result.post_rate > 0.5);
}

TEST_CASE("zero efficacy removes any learner advantage exactly") {
  ExperimentSpec spec = default_spec("flu_single");
  spec.env["network"]["n_nodes"] = 250;
  spec.env["efficacy"] = 0.0;
  spec.env["burn_in"] = {{"window", 20}, {"tol", 0.05}, {"max", 300}};
  spec.train["epochs"] = 40;
  spec.train["window_seasons"] = 5;
  spec.eval["seasons"] = 50;
  spec.write_trace = false;
  auto result = run_flu_single(spec, 4242);
  // vaccination is the only action channel; with it disabled the shared
  // epidemic draws make the learner and its twin identical
  CHECK(result.diff == doctest::Approx(0.0));
}

TEST_CASE("run_experiment writes a complete artifact set") {
  ExperimentSpec spec = small_mg_spec();
  spec.train["epochs"] = 40;
  auto dir = (fs::temp_directory_path() / "abmrl_run_test").string();
  fs::remove_all(dir);
  auto artifacts = run_experiment(spec);
  write_run(artifacts, dir);
  CHECK(fs::exists(dir + "/manifest.json"));
  CHECK(fs::exists(dir + "/metrics.csv"));
  CHECK(fs::exists(dir + "/policy.bin"));
  CHECK(fs::exists(dir + "/trace.csv"));
  auto metrics = MetricsTable::read_csv(dir + "/metrics.csv");
  CHECK(!metrics.rows.empty());
  nlohmann::json manifest;
  std::ifstream(dir + "/manifest.json") >> manifest;
  CHECK(manifest["spec"]["kind"] == "mg_single_fixed");
  CHECK(manifest["spec"]["seeds"].size() == 1);
  fs::remove_all(dir);
}
