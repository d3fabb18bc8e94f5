// Command-line front end: runs experiment specs, evaluates saved policies,
// expands sweeps, and aggregates metrics into report CSVs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "abmrl/errors.hpp"
#include "abmrl/experiments.hpp"
#include "abmrl/metrics.hpp"
#include "abmrl/mlp.hpp"

namespace fs = std::filesystem;
using namespace abmrl;

namespace {

ExperimentSpec load_spec(const std::string& path, uint64_t seed_override, bool has_seed,
                         const std::string& out_override) {
  ExperimentSpec spec = ExperimentSpec::load(path);
  if (has_seed) spec.seeds = {seed_override};
  if (!out_override.empty()) spec.output_dir = out_override;
  if (const char* env = std::getenv("ABMRL_OUTDIR")) spec.output_dir = env;
  spec.validate();
  return spec;
}

std::string run_dir_for(const ExperimentSpec& spec) {
  std::string dir = spec.output_dir + "/" + spec.id;
  if (spec.seeds.size() == 1) dir += "-seed" + std::to_string(spec.seeds[0]);
  return dir;
}

int do_run(const ExperimentSpec& spec, bool quiet) {
  auto artifacts = run_experiment(spec);
  std::string dir = run_dir_for(spec);
  write_run(artifacts, dir);
  if (!quiet)
    std::cout << "wrote " << artifacts.metrics.rows.size() << " metric rows to " << dir << "\n";
  return 0;
}

int do_eval(const ExperimentSpec& spec, const std::string& policy_path) {
  Mlp policy = load_mlp(policy_path);
  uint64_t train_seed = spec.eval.value("train_seed", spec.seeds.at(0));
  double train_rate = spec.eval.value("train_win_rate", 1.0);
  if (spec.kind != "mg_single_fixed" && spec.kind != "mg_resampled")
    throw ConfigError("eval currently supports the minority-game kinds");
  auto result = run_mg_generalization(policy, spec, train_seed, train_rate);
  std::string dir = run_dir_for(spec) + "-eval";
  fs::create_directories(dir);
  result.metrics.write_csv(dir + "/metrics.csv");
  std::ofstream m(dir + "/manifest.json");
  m << nlohmann::json{{"spec", spec.to_json()}, {"policy", policy_path}}.dump(2) << "\n";
  double mean = 0.0, below = 0.0;
  for (double r : result.population_win_rates) {
    mean += r;
    if (r < 0.9) below += 1.0;
  }
  mean /= static_cast<double>(result.population_win_rates.size());
  std::cout << "populations: " << result.population_win_rates.size() << ", mean win rate " << mean
            << ", below 0.9: " << below << ", mirrored-population win rate "
            << result.mirror_win_rate << "\n";
  return 0;
}

int do_report(const std::string& dir, const std::string& out) {
  MetricsTable combined;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("report: no metrics.csv found under '" + dir + "'");
  for (const auto& f : files) combined.append(MetricsTable::read_csv(f.string()));
  fs::create_directories(out);
  combined.write_csv(out + "/combined.csv");

  // per (run, metric) mean/min/max/count
  struct Agg {
    double sum = 0, mn = 1e300, mx = -1e300;
    long n = 0;
  };
  std::map<std::pair<std::string, std::string>, Agg> groups;
  for (const auto& r : combined.rows) {
    auto& g = groups[{r.run_id, r.metric}];
    g.sum += r.value;
    g.mn = std::min(g.mn, r.value);
    g.mx = std::max(g.mx, r.value);
    ++g.n;
  }
  std::ofstream s(out + "/summary.csv");
  if (!s) throw ConfigError("report: cannot open summary.csv");
  s << "run_id,metric,count,mean,min,max\n";
  s.precision(12);
  for (const auto& [key, g] : groups)
    s << key.first << "," << key.second << "," << g.n << "," << g.sum / g.n << "," << g.mn << ","
      << g.mx << "\n";
  std::cout << "combined " << combined.rows.size() << " rows from " << files.size()
            << " metrics files into " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent simulation and learning experiment runner"};
  app.require_subcommand(1);

  std::string spec_path, policy_path, report_dir, report_out = "report", out_override;
  uint64_t seed = 0;
  bool quiet = false;
  std::vector<CLI::Option*> seed_opts;

  auto add_spec_opts = [&](CLI::App* cmd, bool need_spec = true) {
    auto* opt = cmd->add_option("--spec", spec_path, "Experiment spec JSON file");
    if (need_spec) opt->required();
    seed_opts.push_back(
        cmd->add_option("--seed", seed, "Replace the spec's seed list with a single seed"));
    cmd->add_option("--out", out_override, "Override the spec's output directory");
  };

  auto* run_cmd = app.add_subcommand("run", "Execute an experiment spec");
  add_spec_opts(run_cmd);
  run_cmd->add_flag("--quiet", quiet, "Suppress the completion line");

  auto* train_cmd = app.add_subcommand("train", "Execute the training part of a spec");
  add_spec_opts(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved policy against fresh populations");
  add_spec_opts(eval_cmd);
  eval_cmd->add_option("--policy", policy_path, "Saved policy file")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Expand the spec's sweep grid into child runs");
  add_spec_opts(sweep_cmd);

  auto* report_cmd = app.add_subcommand("report", "Aggregate metrics.csv files under a directory");
  report_cmd->add_option("--dir", report_dir, "Directory holding run outputs")->required();
  report_cmd->add_option("--out", report_out, "Report output directory");

  auto* validate_cmd = app.add_subcommand("validate-config", "Check a spec file and exit");
  add_spec_opts(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    bool has_seed = false;
    for (auto* opt : seed_opts) has_seed = has_seed || opt->count() > 0;

    if (run_cmd->parsed() || train_cmd->parsed()) {
      auto spec = load_spec(spec_path, seed, has_seed, out_override);
      if (train_cmd->parsed() && spec.train.empty())
        throw ConfigError("train: spec has no training section");
      return do_run(spec, quiet);
    }
    if (eval_cmd->parsed()) {
      auto spec = load_spec(spec_path, seed, has_seed, out_override);
      return do_eval(spec, policy_path);
    }
    if (sweep_cmd->parsed()) {
      auto spec = load_spec(spec_path, seed, has_seed, out_override);
      auto children = expand_sweep(spec);
      for (const auto& child : children) {
        std::cout << "sweep child: " << child.id << "\n";
        do_run(child, true);
      }
      std::cout << "sweep ran " << children.size() << " child runs\n";
      return 0;
    }
    if (report_cmd->parsed()) return do_report(report_dir, report_out);
    if (validate_cmd->parsed()) {
      load_spec(spec_path, seed, has_seed, out_override);
      std::cout << "ok\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
