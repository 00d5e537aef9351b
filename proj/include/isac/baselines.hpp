#pragma once

#include "isac/sac_agent.hpp"
#include "isac/scenario.hpp"
#include "isac/service_model.hpp"

namespace isac::baselines {

struct PolicyResult {
  service::Allocation alloc;
  service::ServiceOutcome outcome;
};

// CGQ-FSG-alpha: sensing energy fixed at alpha * E_max / K (capped at the
// per-user limit), generating step fixed at floor((z_min+z_max)/2), and RCE
// on the residual. The CGQ view assumes perfect content accuracy, so theta=1
// inside the allocator's metric and bounds; evaluation always uses the true
// model.
PolicyResult cgq_fsg(const scenario::Scenario& sc, double alpha,
                     const SystemConfig& cfg,
                     bool assume_perfect_accuracy = true);

// Deterministic SAQA-style evaluation used by the step sweeps: fixed step,
// sensing fixed at sensing_fraction * E_max / K, RCE with theta = upsilon
// (generation error ignored, as SAQA assumes), true-model evaluation.
PolicyResult saqa_oracle(const scenario::Scenario& sc, int z_fixed,
                         double sensing_fraction, const SystemConfig& cfg);

// trained-policy application (SAQA-FG / LPDRL / LPDRL-F / JDRL-F are agent
// variants; see sac::AgentVariant)
PolicyResult apply_agent(sac::SacAgent& agent, const scenario::Scenario& sc,
                         sac::ActionMode mode);

}  // namespace isac::baselines
