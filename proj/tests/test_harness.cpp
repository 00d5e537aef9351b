#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "isac/harness.hpp"
#include "json.hpp"

using namespace isac;
using namespace isac::harness;
namespace fs = std::filesystem;

namespace {
std::string temp_dir(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("isac_harness_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// strips fields that are legitimately run-dependent (none in the iteration
// stream today; kept for clarity of intent)
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}
}  // namespace

TEST_CASE("config json round trip and error paths") {
  Config cfg;
  cfg.system.num_users = 12;
  cfg.agent.gamma = 0.8;
  cfg.harness.train_episodes = 123;
  const auto text = cfg.to_json_string();
  const auto back = Config::from_json_string(text);
  CHECK(back.system.num_users == 12);
  CHECK(back.agent.gamma == 0.8);
  CHECK(back.harness.train_episodes == 123);
  CHECK(back.hash() == cfg.hash());

  CHECK_THROWS_AS(Config::from_json_string("{ not json"), ConfigError);
  CHECK_THROWS_AS(Config::from_json_string(R"({"system":{"num_users":0}})"),
                  ConfigError);
  CHECK_THROWS_AS(Config::from_file("/nonexistent/cfg.json"), ConfigError);

  // partial configs inherit defaults
  const auto partial = Config::from_json_string(R"({"system":{"num_users":4}})");
  CHECK(partial.system.num_users == 4);
  CHECK(partial.system.bandwidth_hz == 1e8);
}

TEST_CASE("policy and axis tags parse both ways") {
  for (const auto kind :
       {PolicyKind::lpdrl_f, PolicyKind::lpdrl, PolicyKind::jdrl_f,
        PolicyKind::saqa_fg, PolicyKind::cgq_fsg, PolicyKind::saqa_oracle})
    CHECK(parse_policy(policy_tag(kind)) == kind);
  CHECK_THROWS_AS(parse_policy("nope"), ConfigError);

  for (const auto axis : {SweepAxis::num_users, SweepAxis::e_max,
                          SweepAxis::z_step, SweepAxis::t_max})
    CHECK(parse_axis(axis_tag(axis)) == axis);
  CHECK_THROWS_AS(parse_axis("nope"), ConfigError);
}

TEST_CASE("two identical single-worker runs produce identical metric streams") {
  Config cfg;
  cfg.agent.buffer_min_fill = 200;
  cfg.agent.batch_size = 64;

  ExperimentPlan plan;
  plan.episodes = 8;
  plan.iterations = 25;
  plan.policy.kind = PolicyKind::lpdrl_f;

  plan.out_dir = temp_dir("repro1");
  run_training(plan, cfg, 42, /*quiet=*/true);
  const auto a = read_lines(plan.out_dir + "/train_lpdrl-f_seed42.jsonl");

  plan.out_dir = temp_dir("repro2");
  run_training(plan, cfg, 42, /*quiet=*/true);
  const auto b = read_lines(plan.out_dir + "/train_lpdrl-f_seed42.jsonl");

  REQUIRE(a.size() == b.size());
  CHECK(a == b);

  // a different seed must diverge
  plan.out_dir = temp_dir("repro3");
  run_training(plan, cfg, 43, /*quiet=*/true);
  const auto c = read_lines(plan.out_dir + "/train_lpdrl-f_seed43.jsonl");
  CHECK(a != c);
}

TEST_CASE("metrics stream parses as jsonl with the expected schema") {
  Config cfg;
  cfg.agent.buffer_min_fill = 100;
  cfg.agent.batch_size = 64;
  ExperimentPlan plan;
  plan.episodes = 3;
  plan.iterations = 40;
  plan.out_dir = temp_dir("schema");
  run_training(plan, cfg, 7, /*quiet=*/true);

  int iters = 0, episodes = 0, updated = 0;
  for (const auto& line :
       read_lines(plan.out_dir + "/train_lpdrl-f_seed7.jsonl")) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("schema") == 1);
    if (j.at("type") == "iter") {
      ++iters;
      CHECK(j.contains("avg_caqa"));
      CHECK(j.contains("reward"));
      CHECK(j.contains("c5_violations"));
      if (j.at("updated").get<bool>()) ++updated;
    } else {
      ++episodes;
      CHECK(j.contains("mean_avg_caqa"));
      CHECK(j.contains("std_reward"));
    }
  }
  CHECK(iters == 120);
  CHECK(episodes == 3);
  CHECK(updated == 21);  // fill hits 100 on the 100th push, same-step update
}

TEST_CASE("eval summary on the deterministic baseline") {
  Config cfg;
  ExperimentPlan plan;
  plan.episodes = 40;
  plan.iterations = 2;
  plan.policy.kind = PolicyKind::cgq_fsg;
  plan.policy.alpha = 0.2;
  const auto s = run_eval(plan, cfg, 5);
  CHECK(s.scenarios == 80);
  CHECK(s.mean_avg_caqa > 0.0);
  CHECK(s.mean_accuracy > 0.0);
  CHECK(s.mean_quality > 0.0);
  CHECK(s.mean_quality <= 1.0 + 1e-12);
  REQUIRE(s.per_user_caqa_quantiles.size() == 5);
  CHECK(s.per_user_caqa_quantiles.front() <= s.per_user_caqa_quantiles.back());
  // identical seed reproduces the summary exactly
  const auto s2 = run_eval(plan, cfg, 5);
  CHECK(s2.mean_avg_caqa == s.mean_avg_caqa);
}

TEST_CASE("sweep writes csv and jsonl with one row per value") {
  Config cfg;
  ExperimentPlan plan;
  plan.episodes = 10;
  plan.iterations = 2;
  plan.policy.kind = PolicyKind::cgq_fsg;
  plan.axis = SweepAxis::e_max;
  plan.axis_values = {0.6, 1.0};
  plan.out_dir = temp_dir("sweep");
  const auto rows = run_sweep(plan, cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].axis_value == 0.6);
  CHECK(rows[1].axis_value == 1.0);

  const auto csv = read_lines(plan.out_dir + "/sweep_e-max_cgq-fsg.csv");
  REQUIRE(csv.size() == 3);
  CHECK(csv[0].find("mean_avg_caqa") != std::string::npos);
  const auto jl = read_lines(plan.out_dir + "/sweep_e-max_cgq-fsg.jsonl");
  REQUIRE(jl.size() == 2);
  CHECK(nlohmann::json::parse(jl[0]).at("axis") == "e-max");

  // z-step sweeps require a fixed-step policy
  plan.axis = SweepAxis::z_step;
  plan.axis_values = {5, 7};
  CHECK_THROWS_AS(run_sweep(plan, cfg), ConfigError);
  plan.policy.kind = PolicyKind::saqa_oracle;
  CHECK_NOTHROW(run_sweep(plan, cfg));
}

TEST_CASE("training then eval from the saved checkpoint reproduces the policy") {
  Config cfg;
  cfg.agent.buffer_min_fill = 150;
  cfg.agent.batch_size = 64;
  ExperimentPlan plan;
  plan.episodes = 6;
  plan.iterations = 30;
  plan.out_dir = temp_dir("ckpt");
  const auto res = run_training(plan, cfg, 11, /*quiet=*/true);
  REQUIRE(fs::exists(res.checkpoint_prefix + ".ckpt"));
  REQUIRE(fs::exists(res.checkpoint_prefix + ".meta.json"));

  ExperimentPlan eval_plan;
  eval_plan.episodes = 5;
  eval_plan.iterations = 2;
  eval_plan.policy.kind = PolicyKind::lpdrl_f;
  eval_plan.policy.checkpoint = res.checkpoint_prefix;
  const auto s1 = run_eval(eval_plan, cfg, 3);
  const auto s2 = run_eval(eval_plan, cfg, 3);
  CHECK(s1.mean_avg_caqa == s2.mean_avg_caqa);
}

TEST_CASE("verification suite passes end to end") {
  Config cfg;
  ExperimentPlan plan;
  CHECK(run_verification(plan, cfg) == 0);
}
