#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isac/config.hpp"
#include "isac/harness.hpp"
#include "json.hpp"

// Experiment driver. Subcommands: train, eval, sweep, verify-rce, gradcheck.
// Exit codes: 0 success, 1 verification failure, 2 invalid configuration.

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::uint64_t> seeds{1};
  int episodes = 0;
  int iterations = 0;
  std::string out_dir = "out";
  bool paper_scale = false;
  std::string policy = "lpdrl-f";
  double alpha = 0.2;
  int z_fixed = 7;
  double sensing_fraction = 0.5;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--seed", args.seeds, "RNG seed(s)");
  cmd->add_option("--episodes", args.episodes, "episode count (0 = config default)");
  cmd->add_option("--iterations", args.iterations, "iterations per episode (0 = config default)");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_flag("--paper-scale", args.paper_scale, "paper-scale episode counts");
  cmd->add_option("--policy", args.policy,
                  "lpdrl-f | lpdrl | jdrl-f | saqa-fg | cgq-fsg | saqa-oracle");
  cmd->add_option("--alpha", args.alpha, "CGQ-FSG sensing share");
  cmd->add_option("--z-fixed", args.z_fixed, "fixed generating step");
  cmd->add_option("--sensing-fraction", args.sensing_fraction,
                  "saqa-oracle per-user sensing share of E_max/K");
  cmd->add_option("--checkpoint", args.checkpoint, "checkpoint prefix to load");
}

isac::Config load_config(const CommonArgs& args) {
  if (args.config_path.empty()) {
    isac::Config cfg;
    cfg.validate();
    return cfg;
  }
  return isac::Config::from_file(args.config_path);
}

isac::harness::ExperimentPlan make_plan(const CommonArgs& args) {
  isac::harness::ExperimentPlan plan;
  plan.episodes = args.episodes;
  plan.iterations = args.iterations;
  plan.seeds = args.seeds;
  plan.out_dir = args.out_dir;
  plan.paper_scale = args.paper_scale;
  plan.policy.kind = isac::harness::parse_policy(args.policy);
  plan.policy.alpha = args.alpha;
  plan.policy.z_fixed = args.z_fixed;
  plan.policy.sensing_fraction = args.sensing_fraction;
  plan.policy.checkpoint = args.checkpoint;
  return plan;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISAC-driven AIGC resource allocation harness"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string axis = "num-users";
  std::vector<double> axis_values;

  auto* train = app.add_subcommand("train", "train a policy");
  add_common(train, args);

  auto* eval = app.add_subcommand("eval", "evaluate a policy on the test distribution");
  add_common(eval, args);

  auto* sweep = app.add_subcommand("sweep", "evaluate a policy along a parameter axis");
  add_common(sweep, args);
  sweep->add_option("--axis", axis, "num-users | e-max | z-step | t-max");
  sweep->add_option("--values", axis_values, "axis values")->required();

  auto* verify = app.add_subcommand("verify-rce", "RCE/FCFS/gradient verification suite");
  add_common(verify, args);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(gradcheck, args);

  CLI11_PARSE(app, argc, argv);

  try {
    const isac::Config cfg = load_config(args);
    auto plan = make_plan(args);

    if (train->parsed()) {
      for (const auto seed : plan.seeds) {
        const auto res = isac::harness::run_training(plan, cfg, seed);
        std::printf("seed %llu: checkpoint %s (%.1f s)\n",
                    static_cast<unsigned long long>(seed),
                    res.checkpoint_prefix.c_str(), res.wall_seconds);
      }
      return 0;
    }
    if (eval->parsed()) {
      for (const auto seed : plan.seeds) {
        const auto s = isac::harness::run_eval(plan, cfg, seed);
        nlohmann::json j{{"policy", s.policy},
                         {"seed", seed},
                         {"mean_avg_caqa", s.mean_avg_caqa},
                         {"std_avg_caqa", s.std_avg_caqa},
                         {"mean_accuracy", s.mean_accuracy},
                         {"mean_quality", s.mean_quality},
                         {"violation_rate", s.violation_rate},
                         {"per_user_caqa_quantiles", s.per_user_caqa_quantiles},
                         {"scenarios", s.scenarios}};
        std::printf("%s\n", j.dump().c_str());
      }
      return 0;
    }
    if (sweep->parsed()) {
      plan.axis = isac::harness::parse_axis(axis);
      plan.axis_values = axis_values;
      const auto rows = isac::harness::run_sweep(plan, cfg);
      for (const auto& r : rows)
        std::printf("%s=%g: mean AvgCAQA %.4f (acc %.4f, qual %.4f)\n",
                    axis.c_str(), r.axis_value, r.summary.mean_avg_caqa,
                    r.summary.mean_accuracy, r.summary.mean_quality);
      return 0;
    }
    if (verify->parsed())
      return isac::harness::run_verification(plan, cfg) == 0 ? 0 : 1;
    if (gradcheck->parsed())
      return isac::harness::run_gradcheck(cfg, plan.seeds.empty() ? 1 : plan.seeds[0]) == 0
                 ? 0
                 : 1;
  } catch (const isac::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
