#pragma once

#include <optional>
#include <vector>

#include "isac/config.hpp"
#include "isac/scenario.hpp"

namespace isac::service {

// Joint resource decision for one scenario, indexed in priority order.
struct Allocation {
  std::vector<double> e_s;  // sensing energy, J
  std::vector<int> z;       // generating steps
  std::vector<double> e_c;  // communication energy, J
};

struct UserTimeline {
  double n_cycles = 0.0;
  double t_arr = 0.0;   // sensing completes / task reaches the server
  double t_que = 0.0;   // FCFS queueing
  double t_gen = 0.0;
  double t_wait = 0.0;  // wait for the device to finish sensing everyone
};

struct UserOutcome {
  UserTimeline timeline;
  double t_c = 0.0;
  double t_total = 0.0;
  double upsilon = 0.0;   // sensing accuracy
  double eps = 0.0;       // generation error
  double theta = 0.0;     // content accuracy
  double rate_c = 0.0;    // bit/s
  double x_pixels = 0.0;  // delivered resolution
  double quality = 0.0;   // min(x / D_c, 1)
  double omega = 0.0;     // CAQA
  bool c1 = false, c3 = false, c4 = false, c5 = false, c6 = false;
};

struct ServiceOutcome {
  std::vector<UserOutcome> users;
  bool c2 = false;  // total energy budget
  double avg_caqa = 0.0;

  int c5_violations() const;
  bool all_feasible() const;
};

// n = E_s / (T_s P_s), continuous
double sensing_cycles(double e_s, const SystemConfig& cfg);

// Upsilon = xi - varpi n^-tau, clamped at 0; n == 0 means no sensing
double sensing_accuracy(double n, const SystemConfig& cfg);

// n with sensing_accuracy(n) == target; nullopt when target >= xi,
// 0 when target <= 0
std::optional<double> inverse_sensing_accuracy(double target,
                                               const SystemConfig& cfg);

// eps = eps_fwd exp(-mu (z - z_min)); z below z_min is rejected
double aeg(int z, const SystemConfig& cfg);

double generation_time(double z, const SystemConfig& cfg);

// FCFS timeline for all users (priority order), given sensing energies and
// steps. T_arr is cumulative sensing, queueing follows the single-server
// recurrence, waiting covers the tail of the sensing schedule.
std::vector<UserTimeline> timeline(const std::vector<double>& e_s,
                                   const std::vector<int>& z,
                                   const SystemConfig& cfg);

// per-user Shannon rate on the B/K subchannel
double transmission_rate(double gain_g, const SystemConfig& cfg);

struct CaqaResult {
  double theta;
  double x_pixels;
  double omega;
};

// content accuracy + delivered resolution + CAQA for one user, ignoring
// timeline feasibility
CaqaResult caqa(double e_s, int z, double e_c, double gain_g,
                const SystemConfig& cfg);

// Full evaluation of an allocation against a scenario: timelines, rates,
// CAQA, and the C1..C6 constraint flags. Users with zero communication
// energy score Omega = 0.
ServiceOutcome evaluate(const std::vector<scenario::UserScenario>& users,
                        const Allocation& alloc, const SystemConfig& cfg);

}  // namespace isac::service
