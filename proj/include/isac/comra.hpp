#pragma once

#include <optional>
#include <vector>

#include "isac/config.hpp"
#include "isac/scenario.hpp"
#include "isac/service_model.hpp"

namespace isac::comra {

// Per-user data for the communication-energy sub-problem. A user is eligible
// when its CAQA floor is reachable at all: theta > 0, omega_min/theta <= 1,
// and the energy window [e_min, e_max_comm] is non-empty.
struct ComraUser {
  double theta = 0.0;
  double gain_g = 0.0;
  double e_min = 0.0;
  double e_max_comm = 0.0;
  double lambda = 0.0;  // marginal CAQA per joule on the unsaturated region
  bool eligible = false;
};

struct ComraInstance {
  std::vector<ComraUser> users;
  double e_r = 0.0;  // remaining energy after sensing
};

// Smallest communication energy reaching omega_min; nullopt when theta == 0
// or omega_min/theta > 1 (even a full-resolution image cannot reach it).
std::optional<double> min_comm_energy(double theta, double gain_g,
                                      double omega_min,
                                      const SystemConfig& cfg);

// min(service-time energy, display-cap energy), floored at 0
double max_comm_energy(double time_budget_s, double gain_g,
                       const SystemConfig& cfg);

// Lambda = theta * C / (P_c beta D_c) = dOmega/dE_c below the display cap
double priority_metric(double theta, double gain_g, const SystemConfig& cfg);

// Assemble the sub-problem from a scenario and fixed sensing/step decisions.
// theta_override, when given, replaces the computed content accuracy inside
// the bounds and metric (the CGQ-style baselines assume theta = 1); eps_zero
// drops the generation-error factor (the SAQA baseline ignores it).
ComraInstance build_instance(const std::vector<scenario::UserScenario>& users,
                             const std::vector<double>& e_s,
                             const std::vector<int>& z,
                             const SystemConfig& cfg,
                             std::optional<double> theta_override = {},
                             bool eps_zero = false);

// Ranking-based greedy: fund minima, then pour the residual in descending
// lambda order up to each user's cap. Optimal for the linear objective with
// box constraints; ineligible users receive zero.
std::vector<double> rce_allocate(const ComraInstance& inst);

// Local-optimality certificate: no eps-sized transfer between users improves
// the objective while respecting the box and budget constraints.
bool greedy_exchange_check(const ComraInstance& inst,
                           const std::vector<double>& e_c,
                           double eps_transfer = 1e-6);

// objective value (sum of per-user CAQA) of a communication allocation
double comra_objective(const ComraInstance& inst,
                       const std::vector<double>& e_c,
                       const SystemConfig& cfg);

}  // namespace isac::comra
