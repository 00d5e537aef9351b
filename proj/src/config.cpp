#include "isac/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace isac {

using nlohmann::json;

double SystemConfig::default_log_gain_norm() const {
  const double pl_db =
      128.1 + 37.6 * std::log10(coverage_radius_m / 1000.0);
  return std::pow(10.0, -pl_db / 10.0);
}

void SystemConfig::validate() const {
  auto req = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("system config: ") + msg);
  };
  req(num_users >= 1, "num_users must be >= 1");
  req(coverage_radius_m > 0, "coverage radius must be positive");
  req(bandwidth_hz > 0, "bandwidth must be positive");
  req(t_max_s > 0 && t_s_s > 0, "times must be positive");
  req(display_capacity_pixels > 0, "display capacity must be positive");
  req(e_max_j > 0 && e_s_max_j > 0, "energy budgets must be positive");
  req(e_s_max_j <= e_max_j, "per-user sensing cap cannot exceed total energy");
  req(bits_per_pixel > 0, "bits per pixel must be positive");
  req(z_min >= 1, "z_min must be >= 1");
  req(z_max >= z_min, "z_max must be >= z_min");
  req(flops_per_step > 0 && server_flops > 0, "compute rates must be positive");
  req(eps_fwd > 0 && eps_fwd <= 1, "eps_fwd must be in (0, 1]");
  req(mu > 0, "mu must be positive");
  req(p_s_w > 0 && p_c_w > 0, "powers must be positive");
  req(noise_psd_w_per_hz > 0, "noise PSD must be positive");
  req(xi > 0 && xi <= 1, "xi must be in (0, 1]");
  req(varpi > 0 && tau > 0, "varpi and tau must be positive");
  req(omega_min_range[0] > 0 && omega_min_range[1] < 1 &&
          omega_min_range[0] <= omega_min_range[1],
      "omega_min_range must satisfy 0 < lo <= hi < 1");
}

void AgentConfig::validate() const {
  auto req = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("agent config: ") + msg);
  };
  req(actor_lr > 0 && critic_lr > 0 && alpha_lr > 0, "learning rates must be positive");
  req(soft_update_eps > 0 && soft_update_eps < 1, "soft update eps must be in (0, 1)");
  req(gamma >= 0 && gamma < 1, "gamma must be in [0, 1)");
  req(init_temperature > 0, "initial temperature must be positive");
  req(gumbel_temperature > 0 && gumbel_floor > 0, "Gumbel temperatures must be positive");
  req(gumbel_anneal > 0 && gumbel_anneal <= 1, "Gumbel anneal must be in (0, 1]");
  req(buffer_capacity > 0, "buffer capacity must be positive");
  req(buffer_min_fill <= buffer_capacity, "min fill cannot exceed capacity");
  req(batch_size > 0 && batch_size <= buffer_min_fill, "batch must fit below min fill");
}

void HarnessConfig::validate() const {
  if (train_episodes < 1 || iterations_per_episode < 1 || test_episodes < 1 ||
      test_iterations < 1)
    throw ConfigError("harness config: episode/iteration counts must be >= 1");
}

void Config::validate() const {
  system.validate();
  agent.validate();
  harness.validate();
}

namespace {

json system_to_json(const SystemConfig& s) {
  return json{{"coverage_radius_m", s.coverage_radius_m},
              {"num_users", s.num_users},
              {"bandwidth_hz", s.bandwidth_hz},
              {"t_max_s", s.t_max_s},
              {"t_s_s", s.t_s_s},
              {"display_capacity_pixels", s.display_capacity_pixels},
              {"e_max_j", s.e_max_j},
              {"e_s_max_j", s.e_s_max_j},
              {"bits_per_pixel", s.bits_per_pixel},
              {"z_min", s.z_min},
              {"z_max", s.z_max},
              {"flops_per_step", s.flops_per_step},
              {"server_flops", s.server_flops},
              {"eps_fwd", s.eps_fwd},
              {"mu", s.mu},
              {"p_s_w", s.p_s_w},
              {"p_c_w", s.p_c_w},
              {"noise_psd_w_per_hz", s.noise_psd_w_per_hz},
              {"xi", s.xi},
              {"varpi", s.varpi},
              {"tau", s.tau},
              {"log_gain_norm", s.log_gain_norm},
              {"omega_min_range", s.omega_min_range}};
}

json agent_to_json(const AgentConfig& a) {
  return json{{"actor_lr", a.actor_lr},
              {"critic_lr", a.critic_lr},
              {"alpha_lr", a.alpha_lr},
              {"soft_update_eps", a.soft_update_eps},
              {"gamma", a.gamma},
              {"init_temperature", a.init_temperature},
              {"target_entropy", a.target_entropy},
              {"gumbel_temperature", a.gumbel_temperature},
              {"gumbel_anneal", a.gumbel_anneal},
              {"gumbel_floor", a.gumbel_floor},
              {"buffer_capacity", a.buffer_capacity},
              {"buffer_min_fill", a.buffer_min_fill},
              {"batch_size", a.batch_size},
              {"retrain_drop_threshold", a.retrain_drop_threshold}};
}

json harness_to_json(const HarnessConfig& h) {
  return json{{"train_episodes", h.train_episodes},
              {"iterations_per_episode", h.iterations_per_episode},
              {"test_episodes", h.test_episodes},
              {"test_iterations", h.test_iterations},
              {"checkpoint_every_episodes", h.checkpoint_every_episodes},
              {"paper_train_episodes", h.paper_train_episodes},
              {"paper_test_episodes", h.paper_test_episodes}};
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void system_from_json(const json& j, SystemConfig& s) {
  get_if_present(j, "coverage_radius_m", s.coverage_radius_m);
  get_if_present(j, "num_users", s.num_users);
  get_if_present(j, "bandwidth_hz", s.bandwidth_hz);
  get_if_present(j, "t_max_s", s.t_max_s);
  get_if_present(j, "t_s_s", s.t_s_s);
  get_if_present(j, "display_capacity_pixels", s.display_capacity_pixels);
  get_if_present(j, "e_max_j", s.e_max_j);
  get_if_present(j, "e_s_max_j", s.e_s_max_j);
  get_if_present(j, "bits_per_pixel", s.bits_per_pixel);
  get_if_present(j, "z_min", s.z_min);
  get_if_present(j, "z_max", s.z_max);
  get_if_present(j, "flops_per_step", s.flops_per_step);
  get_if_present(j, "server_flops", s.server_flops);
  get_if_present(j, "eps_fwd", s.eps_fwd);
  get_if_present(j, "mu", s.mu);
  get_if_present(j, "p_s_w", s.p_s_w);
  get_if_present(j, "p_c_w", s.p_c_w);
  get_if_present(j, "noise_psd_w_per_hz", s.noise_psd_w_per_hz);
  get_if_present(j, "xi", s.xi);
  get_if_present(j, "varpi", s.varpi);
  get_if_present(j, "tau", s.tau);
  get_if_present(j, "log_gain_norm", s.log_gain_norm);
  get_if_present(j, "omega_min_range", s.omega_min_range);
}

void agent_from_json(const json& j, AgentConfig& a) {
  get_if_present(j, "actor_lr", a.actor_lr);
  get_if_present(j, "critic_lr", a.critic_lr);
  get_if_present(j, "alpha_lr", a.alpha_lr);
  get_if_present(j, "soft_update_eps", a.soft_update_eps);
  get_if_present(j, "gamma", a.gamma);
  get_if_present(j, "init_temperature", a.init_temperature);
  get_if_present(j, "target_entropy", a.target_entropy);
  get_if_present(j, "gumbel_temperature", a.gumbel_temperature);
  get_if_present(j, "gumbel_anneal", a.gumbel_anneal);
  get_if_present(j, "gumbel_floor", a.gumbel_floor);
  get_if_present(j, "buffer_capacity", a.buffer_capacity);
  get_if_present(j, "buffer_min_fill", a.buffer_min_fill);
  get_if_present(j, "batch_size", a.batch_size);
  get_if_present(j, "retrain_drop_threshold", a.retrain_drop_threshold);
}

void harness_from_json(const json& j, HarnessConfig& h) {
  get_if_present(j, "train_episodes", h.train_episodes);
  get_if_present(j, "iterations_per_episode", h.iterations_per_episode);
  get_if_present(j, "test_episodes", h.test_episodes);
  get_if_present(j, "test_iterations", h.test_iterations);
  get_if_present(j, "checkpoint_every_episodes", h.checkpoint_every_episodes);
  get_if_present(j, "paper_train_episodes", h.paper_train_episodes);
  get_if_present(j, "paper_test_episodes", h.paper_test_episodes);
}

}  // namespace

std::string Config::to_json_string() const {
  json j{{"system", system_to_json(system)},
         {"agent", agent_to_json(agent)},
         {"harness", harness_to_json(harness)}};
  return j.dump(2);
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : to_json_string()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Config Config::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  Config cfg;
  try {
    if (j.contains("system")) system_from_json(j.at("system"), cfg.system);
    if (j.contains("agent")) agent_from_json(j.at("agent"), cfg.agent);
    if (j.contains("harness")) harness_from_json(j.at("harness"), cfg.harness);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << to_json_string() << "\n";
}

}  // namespace isac
