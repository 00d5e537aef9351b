#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isac/baselines.hpp"
#include "isac/config.hpp"
#include "isac/sac_agent.hpp"

namespace isac::harness {

enum class PolicyKind {
  lpdrl_f,
  lpdrl,
  jdrl_f,
  saqa_fg,
  cgq_fsg,
  saqa_oracle,
};

PolicyKind parse_policy(const std::string& tag);  // throws ConfigError
std::string policy_tag(PolicyKind kind);
bool policy_is_trained(PolicyKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::lpdrl_f;
  double alpha = 0.2;             // CGQ-FSG share
  int z_fixed = 7;                // fixed-step policies
  double sensing_fraction = 0.5;  // saqa_oracle share
  std::string checkpoint;         // trained policies in eval/sweep mode
};

enum class SweepAxis { num_users, e_max, z_step, t_max };

SweepAxis parse_axis(const std::string& tag);
std::string axis_tag(SweepAxis axis);

struct ExperimentPlan {
  int episodes = 0;    // 0: defaults from HarnessConfig (mode-dependent)
  int iterations = 0;  // 0: defaults from HarnessConfig
  std::vector<std::uint64_t> seeds = {1};
  PolicySpec policy;
  SweepAxis axis = SweepAxis::num_users;
  std::vector<double> axis_values;
  std::string out_dir = "out";
  bool paper_scale = false;
};

// One JSONL record per training iteration plus one summary record per
// episode. Streams are append-only and schema-versioned; wall-clock lives
// only in the run summary because it can never reproduce bitwise.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void iteration(int episode, int iteration, const std::string& policy,
                 const sac::StepMetrics& m);
  void episode_summary(int episode, const std::string& policy, double mean_caqa,
                       double std_caqa, double mean_reward, double std_reward);

 private:
  std::string path_;
};

struct TrainResult {
  std::string checkpoint_prefix;
  std::vector<double> episode_mean_caqa;
  std::vector<double> episode_mean_reward;
  std::vector<double> episode_std_reward;
  double wall_seconds = 0.0;
};

struct EvalSummary {
  std::string policy;
  double mean_avg_caqa = 0.0;
  double std_avg_caqa = 0.0;
  double mean_accuracy = 0.0;  // mean content accuracy theta
  double mean_quality = 0.0;   // mean display-capped quality
  double violation_rate = 0.0; // fraction of users below their CAQA floor
  std::vector<double> per_user_caqa_quantiles;  // p0 p25 p50 p75 p100
  int scenarios = 0;
};

struct SweepRow {
  double axis_value = 0.0;
  EvalSummary summary;
};

TrainResult run_training(const ExperimentPlan& plan, const Config& cfg,
                         std::uint64_t seed, bool quiet = false);

EvalSummary run_eval(const ExperimentPlan& plan, const Config& cfg,
                     std::uint64_t seed);

std::vector<SweepRow> run_sweep(const ExperimentPlan& plan, const Config& cfg);

// RCE-vs-oracle comparison plus the FCFS and gradient checks; returns the
// number of failures and prints one line per suite.
int run_verification(const ExperimentPlan& plan, const Config& cfg);

// gradient checks only
int run_gradcheck(const Config& cfg, std::uint64_t seed);

// applies a (possibly trained) policy to one scenario
baselines::PolicyResult apply_policy(const PolicySpec& spec, sac::SacAgent* agent,
                                     const scenario::Scenario& sc,
                                     const SystemConfig& cfg);

// Keeps glibc from returning large scratch buffers to the kernel; called by
// run_training and worth calling before any other allocation-heavy loop.
void tune_allocator_for_long_runs();

// builds the agent a trained policy needs (loading its checkpoint when set)
std::unique_ptr<sac::SacAgent> make_policy_agent(const PolicySpec& spec,
                                                 const Config& cfg,
                                                 std::uint64_t seed);

}  // namespace isac::harness
