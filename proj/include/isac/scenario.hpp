#pragma once

#include <vector>

#include "isac/config.hpp"
#include "isac/rng.hpp"

namespace isac::scenario {

// One user's draw, already re-indexed so that vector position == sensing
// order (priority_rank is 1-based and equals index+1 after draw_scenario).
struct UserScenario {
  double distance_m = 0.0;
  double gain_g = 0.0;     // path loss x Rayleigh power fade
  double log_gain_h = 0.0; // log10(g / L_n)
  double omega_min = 0.0;  // per-user CAQA floor
  int priority_rank = 0;   // 1 = sensed first
};

struct Scenario {
  std::vector<UserScenario> users;  // priority order
  std::vector<double> state;        // [h_1, omega_1, ..., h_K, omega_K]
};

// area-uniform radius on a disk: r = R * sqrt(u)
double disk_radius_from_uniform(double radius, double u);

std::vector<double> draw_positions(const SystemConfig& cfg, Rng& rng);

double path_loss_db(double distance_m);

// gain for a given Rayleigh power fade; fade <= 0 is rejected
double gain_from_fade(double distance_m, double fade);

// path loss x Exp(1) fade; fades below 1e-6 are redrawn to keep log-gain finite
double channel_gain(double distance_m, Rng& rng);

double normalized_log_gain(double gain_g, const SystemConfig& cfg);

// users with fresh fades/requirements/priorities on fixed positions
Scenario refresh_scenario(const SystemConfig& cfg,
                          const std::vector<double>& distances, Rng& rng);

// fresh positions + refresh in one call
Scenario draw_scenario(const SystemConfig& cfg, Rng& rng);

std::vector<double> pack_state(const std::vector<UserScenario>& users);

}  // namespace isac::scenario
