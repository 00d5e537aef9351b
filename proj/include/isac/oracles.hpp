#pragma once

#include <cstdint>
#include <vector>

#include "isac/comra.hpp"
#include "isac/config.hpp"
#include "isac/nn.hpp"
#include "isac/rng.hpp"
#include "isac/service_model.hpp"

// Independent verification machinery: brute-force and event-driven oracles
// plus finite-difference gradient checks. Used only by tests and the verify
// subcommands, never by the production allocation or learning paths.

namespace isac::oracles {

// Random ComRA instance in a controlled budget regime.
enum class BudgetRegime { feasible, shortfall, exhausted };

comra::ComraInstance random_instance(int num_users, const SystemConfig& cfg,
                                     Rng& rng, BudgetRegime regime);

// Grid brute force for the communication LP: each eligible user's energy
// ranges over `levels` budget-aligned points above its minimum, enumerated
// exactly by dynamic programming over budget units. Returns the best
// objective; `increment` receives the objective value of one grid cell
// (the comparison tolerance).
double grid_brute_force_objective(const comra::ComraInstance& inst,
                                  const SystemConfig& cfg, int levels,
                                  double* increment);

// Single-server FCFS timing by explicit event simulation; the closed-form
// queue recurrence must reproduce it exactly.
struct FcfsTimes {
  std::vector<double> queue;
  std::vector<double> wait;
};
FcfsTimes fcfs_event_simulation(const std::vector<double>& arrivals,
                                const std::vector<double>& service,
                                double sensing_end);

// Central finite-difference check of DenseNet gradients on a random linear
// functional of the outputs. Returns the worst relative error over `probes`
// randomly chosen parameter coordinates.
double gradcheck_dense(nn::DenseNet& net, std::size_t batch, Rng& rng,
                       int probes, double step = 1e-5);

// Same check for the actor composite (trunk -> step head, trunk ++ one-hot
// -> gaussian branch) with a frozen one-hot so the map stays differentiable.
double gradcheck_actor_composite(int num_users, int step_choices, Rng& rng,
                                 int probes, double step = 1e-5);

}  // namespace isac::oracles
