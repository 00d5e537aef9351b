#include "isac/scenario.hpp"

#include <cmath>
#include <stdexcept>

namespace isac::scenario {

double disk_radius_from_uniform(double radius, double u) {
  return radius * std::sqrt(u);
}

std::vector<double> draw_positions(const SystemConfig& cfg, Rng& rng) {
  std::vector<double> d(cfg.num_users);
  for (auto& di : d) di = disk_radius_from_uniform(cfg.coverage_radius_m, rng.uniform());
  return d;
}

double path_loss_db(double distance_m) {
  if (distance_m <= 0.0)
    throw std::invalid_argument("path_loss_db: distance must be positive");
  return 128.1 + 37.6 * std::log10(distance_m / 1000.0);
}

double gain_from_fade(double distance_m, double fade) {
  if (fade <= 0.0)
    throw std::invalid_argument("gain_from_fade: fade must be positive");
  return std::pow(10.0, -path_loss_db(distance_m) / 10.0) * fade;
}

double channel_gain(double distance_m, Rng& rng) {
  double fade = rng.exponential();
  while (fade < 1e-6) fade = rng.exponential();
  return gain_from_fade(distance_m, fade);
}

double normalized_log_gain(double gain_g, const SystemConfig& cfg) {
  if (gain_g <= 0.0)
    throw std::invalid_argument("normalized_log_gain: gain must be positive");
  return std::log10(gain_g / cfg.effective_log_gain_norm());
}

Scenario refresh_scenario(const SystemConfig& cfg,
                          const std::vector<double>& distances, Rng& rng) {
  const int k = cfg.num_users;
  if (static_cast<int>(distances.size()) != k)
    throw std::invalid_argument("refresh_scenario: distances size mismatch");

  // Draw per-user attributes in draw order, then assign a uniform random
  // priority permutation and re-index so position == sensing order.
  std::vector<UserScenario> drawn(k);
  for (int i = 0; i < k; ++i) {
    drawn[i].distance_m = distances[i];
    drawn[i].gain_g = channel_gain(distances[i], rng);
    drawn[i].log_gain_h = normalized_log_gain(drawn[i].gain_g, cfg);
    drawn[i].omega_min =
        rng.uniform(cfg.omega_min_range[0], cfg.omega_min_range[1]);
  }
  const std::vector<int> rank_of = rng.permutation(k);  // rank_of[i] in 0..K-1

  Scenario sc;
  sc.users.resize(k);
  for (int i = 0; i < k; ++i) {
    UserScenario u = drawn[i];
    u.priority_rank = rank_of[i] + 1;
    sc.users[rank_of[i]] = u;
  }
  sc.state = pack_state(sc.users);
  return sc;
}

Scenario draw_scenario(const SystemConfig& cfg, Rng& rng) {
  return refresh_scenario(cfg, draw_positions(cfg, rng), rng);
}

std::vector<double> pack_state(const std::vector<UserScenario>& users) {
  std::vector<double> s;
  s.reserve(users.size() * 2);
  for (const auto& u : users) {
    s.push_back(u.log_gain_h);
    s.push_back(u.omega_min);
  }
  return s;
}

}  // namespace isac::scenario
