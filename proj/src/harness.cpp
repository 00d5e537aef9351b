#include "isac/harness.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "isac/oracles.hpp"
#include "json.hpp"

namespace isac::harness {

namespace fs = std::filesystem;
using nlohmann::json;

PolicyKind parse_policy(const std::string& tag) {
  if (tag == "lpdrl-f") return PolicyKind::lpdrl_f;
  if (tag == "lpdrl") return PolicyKind::lpdrl;
  if (tag == "jdrl-f") return PolicyKind::jdrl_f;
  if (tag == "saqa-fg") return PolicyKind::saqa_fg;
  if (tag == "cgq-fsg") return PolicyKind::cgq_fsg;
  if (tag == "saqa-oracle") return PolicyKind::saqa_oracle;
  throw ConfigError("unknown policy tag: " + tag);
}

std::string policy_tag(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::lpdrl_f: return "lpdrl-f";
    case PolicyKind::lpdrl: return "lpdrl";
    case PolicyKind::jdrl_f: return "jdrl-f";
    case PolicyKind::saqa_fg: return "saqa-fg";
    case PolicyKind::cgq_fsg: return "cgq-fsg";
    case PolicyKind::saqa_oracle: return "saqa-oracle";
  }
  return "?";
}

bool policy_is_trained(PolicyKind kind) {
  return kind == PolicyKind::lpdrl_f || kind == PolicyKind::lpdrl ||
         kind == PolicyKind::jdrl_f || kind == PolicyKind::saqa_fg;
}

SweepAxis parse_axis(const std::string& tag) {
  if (tag == "num-users") return SweepAxis::num_users;
  if (tag == "e-max") return SweepAxis::e_max;
  if (tag == "z-step") return SweepAxis::z_step;
  if (tag == "t-max") return SweepAxis::t_max;
  throw ConfigError("unknown sweep axis: " + tag);
}

std::string axis_tag(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::num_users: return "num-users";
    case SweepAxis::e_max: return "e-max";
    case SweepAxis::z_step: return "z-step";
    case SweepAxis::t_max: return "t-max";
  }
  return "?";
}

namespace {

sac::AgentVariant variant_for(const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicyKind::lpdrl_f: return sac::AgentVariant::lpdrl_f();
    case PolicyKind::lpdrl: return sac::AgentVariant::lpdrl();
    case PolicyKind::jdrl_f: return sac::AgentVariant::jdrl_f();
    case PolicyKind::saqa_fg: return sac::AgentVariant::saqa_fg(spec.z_fixed);
    default:
      throw ConfigError("policy has no agent variant: " + policy_tag(spec.kind));
  }
}

struct Stats {
  double mean = 0.0, stdev = 0.0;
};

Stats mean_std(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double acc = 0.0;
  for (const double x : v) acc += (x - s.mean) * (x - s.mean);
  s.stdev = std::sqrt(acc / v.size());
  return s;
}

}  // namespace

std::unique_ptr<sac::SacAgent> make_policy_agent(const PolicySpec& spec,
                                                 const Config& cfg,
                                                 std::uint64_t seed) {
  if (!policy_is_trained(spec.kind)) return nullptr;
  auto agent = std::make_unique<sac::SacAgent>(cfg, variant_for(spec), seed);
  if (!spec.checkpoint.empty()) agent->load_checkpoint(spec.checkpoint);
  return agent;
}

baselines::PolicyResult apply_policy(const PolicySpec& spec,
                                     sac::SacAgent* agent,
                                     const scenario::Scenario& sc,
                                     const SystemConfig& cfg) {
  switch (spec.kind) {
    case PolicyKind::cgq_fsg:
      return baselines::cgq_fsg(sc, spec.alpha, cfg);
    case PolicyKind::saqa_oracle:
      return baselines::saqa_oracle(sc, spec.z_fixed, spec.sensing_fraction, cfg);
    default:
      if (!agent) throw std::invalid_argument("apply_policy: agent required");
      return baselines::apply_agent(*agent, sc, sac::ActionMode::deterministic);
  }
}

// ---------------------------------------------------------------------------
// metrics

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("MetricsWriter: cannot open " + path_);
}

void MetricsWriter::iteration(int episode, int iteration,
                              const std::string& policy,
                              const sac::StepMetrics& m) {
  json j{{"schema", 1},
         {"type", "iter"},
         {"episode", episode},
         {"iteration", iteration},
         {"policy", policy},
         {"avg_caqa", m.avg_caqa},
         {"reward", m.reward},
         {"c5_violations", m.c5_violations},
         {"filter_flags", m.filter_flags},
         {"updated", m.updated},
         {"critic_loss_1", m.critic_loss_1},
         {"critic_loss_2", m.critic_loss_2},
         {"actor_loss", m.actor_loss},
         {"alpha", m.alpha},
         {"gumbel_temperature", m.gumbel_temperature}};
  std::ofstream out(path_, std::ios::app);
  out << j.dump() << "\n";
}

void MetricsWriter::episode_summary(int episode, const std::string& policy,
                                    double mean_caqa, double std_caqa,
                                    double mean_reward, double std_reward) {
  json j{{"schema", 1},
         {"type", "episode"},
         {"episode", episode},
         {"policy", policy},
         {"mean_avg_caqa", mean_caqa},
         {"std_avg_caqa", std_caqa},
         {"mean_reward", mean_reward},
         {"std_reward", std_reward}};
  std::ofstream out(path_, std::ios::app);
  out << j.dump() << "\n";
}

// ---------------------------------------------------------------------------
// training

// The update loop cycles multi-hundred-KB scratch buffers; keeping glibc from
// returning them to the kernel roughly halves the per-update wall time.
void tune_allocator_for_long_runs() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, -1);
    return true;
  }();
  (void)done;
#endif
}

TrainResult run_training(const ExperimentPlan& plan, const Config& cfg,
                         std::uint64_t seed, bool quiet) {
  tune_allocator_for_long_runs();
  const auto t0 = std::chrono::steady_clock::now();
  Config run_cfg = cfg;
  const int episodes = plan.episodes > 0 ? plan.episodes
                       : plan.paper_scale ? cfg.harness.paper_train_episodes
                                          : cfg.harness.train_episodes;
  const int iters = plan.iterations > 0 ? plan.iterations
                                        : cfg.harness.iterations_per_episode;
  if (!policy_is_trained(plan.policy.kind))
    throw ConfigError("train mode needs a trainable policy, got " +
                      policy_tag(plan.policy.kind));

  const std::string tag = policy_tag(plan.policy.kind);
  fs::create_directories(plan.out_dir);
  MetricsWriter metrics(plan.out_dir + "/train_" + tag + "_seed" +
                        std::to_string(seed) + ".jsonl");

  sac::SacAgent agent(run_cfg, variant_for(plan.policy), seed);
  Rng env_rng(seed, 10);

  TrainResult result;
  auto positions = scenario::draw_positions(run_cfg.system, env_rng);
  auto current = scenario::refresh_scenario(run_cfg.system, positions, env_rng);

  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> ep_caqa, ep_reward;
    ep_caqa.reserve(iters);
    ep_reward.reserve(iters);
    for (int it = 0; it < iters; ++it) {
      scenario::Scenario next;
      if (it + 1 < iters) {
        next = scenario::refresh_scenario(run_cfg.system, positions, env_rng);
      } else {
        positions = scenario::draw_positions(run_cfg.system, env_rng);
        next = scenario::refresh_scenario(run_cfg.system, positions, env_rng);
      }
      const auto m = agent.train_step(current, next);
      metrics.iteration(ep, it, tag, m);
      ep_caqa.push_back(m.avg_caqa);
      ep_reward.push_back(m.reward);
      current = std::move(next);
    }
    const auto sc = mean_std(ep_caqa);
    const auto sr = mean_std(ep_reward);
    metrics.episode_summary(ep, tag, sc.mean, sc.stdev, sr.mean, sr.stdev);
    result.episode_mean_caqa.push_back(sc.mean);
    result.episode_mean_reward.push_back(sr.mean);
    result.episode_std_reward.push_back(sr.stdev);

    if (cfg.harness.checkpoint_every_episodes > 0 &&
        (ep + 1) % cfg.harness.checkpoint_every_episodes == 0) {
      agent.save_checkpoint(
          plan.out_dir + "/" + tag + "_seed" + std::to_string(seed), ep + 1);
    }
    if (!quiet && ((ep + 1) % 100 == 0 || ep + 1 == episodes)) {
      std::printf("[train %s seed %llu] episode %d/%d mean AvgCAQA %.4f\n",
                  tag.c_str(), static_cast<unsigned long long>(seed), ep + 1,
                  episodes, sc.mean);
      std::fflush(stdout);
    }
  }

  result.checkpoint_prefix =
      plan.out_dir + "/" + tag + "_seed" + std::to_string(seed);
  agent.save_checkpoint(result.checkpoint_prefix, episodes);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// evaluation

EvalSummary run_eval(const ExperimentPlan& plan, const Config& cfg,
                     std::uint64_t seed) {
  const int episodes = plan.episodes > 0 ? plan.episodes
                       : plan.paper_scale ? cfg.harness.paper_test_episodes
                                          : cfg.harness.test_episodes;
  const int iters =
      plan.iterations > 0 ? plan.iterations : cfg.harness.test_iterations;

  auto agent = make_policy_agent(plan.policy, cfg, seed);
  Rng env_rng(seed, 20);

  std::vector<double> caqas;
  std::vector<double> all_user_caqa;
  double acc_sum = 0.0, qual_sum = 0.0;
  long violations = 0, user_count = 0;

  for (int ep = 0; ep < episodes; ++ep) {
    const auto positions = scenario::draw_positions(cfg.system, env_rng);
    for (int it = 0; it < iters; ++it) {
      const auto sc = scenario::refresh_scenario(cfg.system, positions, env_rng);
      const auto res = apply_policy(plan.policy, agent.get(), sc, cfg.system);
      caqas.push_back(res.outcome.avg_caqa);
      for (const auto& u : res.outcome.users) {
        all_user_caqa.push_back(u.omega);
        acc_sum += u.theta;
        qual_sum += u.quality;
        violations += u.c5 ? 0 : 1;
        ++user_count;
      }
    }
  }

  EvalSummary s;
  s.policy = policy_tag(plan.policy.kind);
  const auto st = mean_std(caqas);
  s.mean_avg_caqa = st.mean;
  s.std_avg_caqa = st.stdev;
  s.mean_accuracy = acc_sum / user_count;
  s.mean_quality = qual_sum / user_count;
  s.violation_rate = static_cast<double>(violations) / user_count;
  s.scenarios = static_cast<int>(caqas.size());
  std::sort(all_user_caqa.begin(), all_user_caqa.end());
  const auto q = [&](double p) {
    const std::size_t i = static_cast<std::size_t>(
        p * static_cast<double>(all_user_caqa.size() - 1));
    return all_user_caqa[i];
  };
  s.per_user_caqa_quantiles = {q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)};
  return s;
}

// ---------------------------------------------------------------------------
// sweeps

namespace {
Config config_for_point(const Config& base, SweepAxis axis, double value,
                        PolicySpec& policy) {
  Config cfg = base;
  switch (axis) {
    case SweepAxis::num_users:
      cfg.system.num_users = static_cast<int>(value);
      break;
    case SweepAxis::e_max:
      cfg.system.e_max_j = value;
      break;
    case SweepAxis::z_step:
      policy.z_fixed = static_cast<int>(value);
      break;
    case SweepAxis::t_max:
      cfg.system.t_max_s = value;
      break;
  }
  cfg.validate();
  return cfg;
}
}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentPlan& plan, const Config& cfg) {
  if (plan.axis_values.empty())
    throw ConfigError("sweep: no axis values given");
  if (plan.axis == SweepAxis::z_step &&
      !(plan.policy.kind == PolicyKind::saqa_oracle ||
        plan.policy.kind == PolicyKind::saqa_fg))
    throw ConfigError("sweep over z-step needs a fixed-step policy");

  std::vector<SweepRow> rows;
  for (const double value : plan.axis_values) {
    PolicySpec policy = plan.policy;
    const Config point_cfg = config_for_point(cfg, plan.axis, value, policy);
    ExperimentPlan point_plan = plan;
    point_plan.policy = policy;

    // aggregate over seeds: mean of per-seed means
    std::vector<double> seed_means, seed_acc, seed_qual, seed_viol;
    EvalSummary last;
    for (const auto seed : plan.seeds) {
      last = run_eval(point_plan, point_cfg, seed);
      seed_means.push_back(last.mean_avg_caqa);
      seed_acc.push_back(last.mean_accuracy);
      seed_qual.push_back(last.mean_quality);
      seed_viol.push_back(last.violation_rate);
    }
    SweepRow row;
    row.axis_value = value;
    row.summary = last;
    row.summary.mean_avg_caqa = mean_std(seed_means).mean;
    row.summary.std_avg_caqa = mean_std(seed_means).stdev;
    row.summary.mean_accuracy = mean_std(seed_acc).mean;
    row.summary.mean_quality = mean_std(seed_qual).mean;
    row.summary.violation_rate = mean_std(seed_viol).mean;
    rows.push_back(row);
  }

  // persist as CSV + JSONL
  fs::create_directories(plan.out_dir);
  const std::string base = plan.out_dir + "/sweep_" + axis_tag(plan.axis) +
                           "_" + policy_tag(plan.policy.kind);
  {
    std::ofstream csv(base + ".csv", std::ios::trunc);
    csv << "axis,value,policy,mean_avg_caqa,std_avg_caqa,mean_accuracy,"
           "mean_quality,violation_rate,scenarios\n";
    for (const auto& r : rows) {
      csv << axis_tag(plan.axis) << "," << r.axis_value << ","
          << r.summary.policy << "," << r.summary.mean_avg_caqa << ","
          << r.summary.std_avg_caqa << "," << r.summary.mean_accuracy << ","
          << r.summary.mean_quality << "," << r.summary.violation_rate << ","
          << r.summary.scenarios << "\n";
    }
  }
  {
    std::ofstream jl(base + ".jsonl", std::ios::trunc);
    for (const auto& r : rows) {
      json j{{"schema", 1},
             {"axis", axis_tag(plan.axis)},
             {"value", r.axis_value},
             {"policy", r.summary.policy},
             {"mean_avg_caqa", r.summary.mean_avg_caqa},
             {"std_avg_caqa", r.summary.std_avg_caqa},
             {"mean_accuracy", r.summary.mean_accuracy},
             {"mean_quality", r.summary.mean_quality},
             {"violation_rate", r.summary.violation_rate},
             {"scenarios", r.summary.scenarios}};
      jl << j.dump() << "\n";
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// verification

int run_verification(const ExperimentPlan& plan, const Config& cfg) {
  int failures = 0;
  Rng rng(plan.seeds.empty() ? 1 : plan.seeds[0], 30);

  // RCE vs grid oracle on feasible instances + exchange certificate
  {
    const int count = 500;
    int pass = 0;
    double worst_gap = 0.0;
    int exchange_fail = 0;
    for (int i = 0; i < count; ++i) {
      const int k = 2 + static_cast<int>(rng.uniform_int(4));
      const auto inst = oracles::random_instance(k, cfg.system, rng,
                                                 oracles::BudgetRegime::feasible);
      const auto e_c = comra::rce_allocate(inst);
      double increment = 0.0;
      const double oracle =
          oracles::grid_brute_force_objective(inst, cfg.system, 400, &increment);
      const double rce = comra::comra_objective(inst, e_c, cfg.system);
      const double gap = oracle - rce;
      worst_gap = std::max(worst_gap, gap);
      if (gap <= increment + 1e-12) ++pass;
      if (!comra::greedy_exchange_check(inst, e_c)) ++exchange_fail;
    }
    std::printf("verify-rce: %d/%d within one grid increment, worst gap %.3e, "
                "exchange failures %d\n",
                pass, count, worst_gap, exchange_fail);
    if (pass != count || exchange_fail != 0) ++failures;
  }

  // FCFS closed form vs event simulation
  {
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      const int k = 1 + static_cast<int>(rng.uniform_int(6));
      std::vector<double> e_s(k), arrivals(k), service_t(k);
      std::vector<int> z(k);
      for (int u = 0; u < k; ++u) {
        e_s[u] = rng.uniform(0.0, cfg.system.e_s_max_j);
        z[u] = cfg.system.z_min +
               static_cast<int>(rng.uniform_int(cfg.system.step_choices()));
      }
      const auto tl = service::timeline(e_s, z, cfg.system);
      double sensing_end = 0.0;
      for (int u = 0; u < k; ++u) {
        arrivals[u] = tl[u].t_arr;
        service_t[u] = tl[u].t_gen;
        sensing_end = std::max(sensing_end, tl[u].t_arr);
      }
      const auto sim =
          oracles::fcfs_event_simulation(arrivals, service_t, sensing_end);
      for (int u = 0; u < k; ++u) {
        if (std::abs(sim.queue[u] - tl[u].t_que) > 1e-9 ||
            std::abs(sim.wait[u] - tl[u].t_wait) > 1e-9)
          ++bad;
      }
    }
    std::printf("verify-fcfs: %s (%d mismatches)\n", bad == 0 ? "ok" : "FAIL", bad);
    if (bad != 0) ++failures;
  }

  failures += run_gradcheck(cfg, plan.seeds.empty() ? 1 : plan.seeds[0]);
  return failures;
}

int run_gradcheck(const Config& cfg, std::uint64_t seed) {
  Rng rng(seed, 31);
  int failures = 0;
  const int k = cfg.system.num_users;

  nn::DenseNet critic({static_cast<std::size_t>(4 * k),
                       {256, 128, 1},
                       {nn::Activation::relu, nn::Activation::relu,
                        nn::Activation::linear}},
                      1.0, 1.0, rng);
  const double critic_err = oracles::gradcheck_dense(critic, 4, rng, 200);
  std::printf("gradcheck critic: max rel err %.3e %s\n", critic_err,
              critic_err < 1e-4 ? "ok" : "FAIL");
  if (critic_err >= 1e-4) ++failures;

  const double actor_err = oracles::gradcheck_actor_composite(
      k, cfg.system.step_choices(), rng, 200);
  std::printf("gradcheck actor composite: max rel err %.3e %s\n", actor_err,
              actor_err < 1e-4 ? "ok" : "FAIL");
  if (actor_err >= 1e-4) ++failures;
  return failures;
}

}  // namespace isac::harness
