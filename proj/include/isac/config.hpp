#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace isac {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Physical and model constants of the ISAC/AIGC environment. Defaults follow
// the simulation parameter table; the sensing-fit constants (xi, varpi, tau)
// and the log-gain normalization are deployment-specific and exposed here.
struct SystemConfig {
  double coverage_radius_m = 200.0;
  int num_users = 10;                    // K
  double bandwidth_hz = 1e8;             // B
  double t_max_s = 1.0;                  // service deadline
  double t_s_s = 6e-5;                   // one sensing cycle
  double display_capacity_pixels = 512.0 * 512.0;  // D_c
  double e_max_j = 1.0;
  double e_s_max_j = 0.1;
  double bits_per_pixel = 24.0;          // beta
  int z_min = 5;
  int z_max = 10;
  double flops_per_step = 0.2e12;        // chi
  double server_flops = 20e12;           // f
  double eps_fwd = 0.03;
  double mu = 0.2;
  double p_s_w = 1.0;
  double p_c_w = 1.5;
  double noise_psd_w_per_hz = 3.9810717055349565e-21;  // -174 dBm/Hz
  // sensing-accuracy fit: Upsilon(n) = xi - varpi * n^-tau
  double xi = 0.95;
  double varpi = 2.0;
  double tau = 0.6;
  // log-gain normalization; <= 0 means "derive from the coverage edge"
  double log_gain_norm = 0.0;
  std::array<double, 2> omega_min_range = {0.4, 0.45};

  int step_choices() const { return z_max - z_min + 1; }
  // path-loss-only gain at the coverage edge, the default normalization
  double default_log_gain_norm() const;
  double effective_log_gain_norm() const {
    return log_gain_norm > 0.0 ? log_gain_norm : default_log_gain_norm();
  }

  void validate() const;  // throws ConfigError
};

// SAC learner hyperparameters. Network widths are fixed by the agent
// (shared trunk [256,128], sensing branch [64]); everything schedule-like
// lives here.
struct AgentConfig {
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double alpha_lr = 1e-3;
  double soft_update_eps = 0.005;
  double gamma = 0.9;
  double init_temperature = 0.2;
  // 0 means "use the hybrid-action heuristic" (see SacAgent)
  double target_entropy = 0.0;
  double gumbel_temperature = 1.0;
  double gumbel_anneal = 0.9995;
  double gumbel_floor = 0.3;
  std::size_t buffer_capacity = 50000;
  std::size_t buffer_min_fill = 5000;
  std::size_t batch_size = 256;
  // retraining hook: fractional AvgCAQA drop that flags a stale policy
  double retrain_drop_threshold = 0.25;

  void validate() const;
};

struct HarnessConfig {
  int train_episodes = 800;
  int iterations_per_episode = 50;
  int test_episodes = 1000;
  int test_iterations = 10;
  int checkpoint_every_episodes = 200;

  // paper-scale experiment sizes, enabled by --paper-scale
  int paper_train_episodes = 6000;
  int paper_test_episodes = 10000;

  void validate() const;
};

struct Config {
  SystemConfig system;
  AgentConfig agent;
  HarnessConfig harness;

  void validate() const;
  std::string to_json_string() const;
  // 64-bit FNV-1a over the canonical JSON form, for checkpoint metadata
  std::uint64_t hash() const;

  static Config from_json_string(const std::string& text);
  static Config from_file(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace isac
