#include "isac/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "isac/comra.hpp"

namespace isac::baselines {

namespace {
PolicyResult finish(const scenario::Scenario& sc, service::Allocation alloc,
                    const SystemConfig& cfg) {
  PolicyResult res;
  res.outcome = service::evaluate(sc.users, alloc, cfg);
  res.alloc = std::move(alloc);
  return res;
}
}  // namespace

PolicyResult cgq_fsg(const scenario::Scenario& sc, double alpha,
                     const SystemConfig& cfg, bool assume_perfect_accuracy) {
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("cgq_fsg: alpha must be in (0, 1)");
  const int k = cfg.num_users;
  service::Allocation alloc;
  alloc.e_s.assign(k, std::min(alpha * cfg.e_max_j / k, cfg.e_s_max_j));
  alloc.z.assign(k, (cfg.z_min + cfg.z_max) / 2);
  const auto inst = comra::build_instance(
      sc.users, alloc.e_s, alloc.z, cfg,
      assume_perfect_accuracy ? std::optional<double>(1.0) : std::nullopt);
  alloc.e_c = comra::rce_allocate(inst);
  return finish(sc, std::move(alloc), cfg);
}

PolicyResult saqa_oracle(const scenario::Scenario& sc, int z_fixed,
                         double sensing_fraction, const SystemConfig& cfg) {
  if (z_fixed < cfg.z_min || z_fixed > cfg.z_max)
    throw std::invalid_argument("saqa_oracle: z_fixed outside [z_min, z_max]");
  const int k = cfg.num_users;
  service::Allocation alloc;
  alloc.e_s.assign(k, std::min(sensing_fraction * cfg.e_max_j / k, cfg.e_s_max_j));
  alloc.z.assign(k, z_fixed);
  const auto inst = comra::build_instance(sc.users, alloc.e_s, alloc.z, cfg,
                                          std::nullopt, /*eps_zero=*/true);
  alloc.e_c = comra::rce_allocate(inst);
  return finish(sc, std::move(alloc), cfg);
}

PolicyResult apply_agent(sac::SacAgent& agent, const scenario::Scenario& sc,
                         sac::ActionMode mode) {
  return finish(sc, agent.act(sc, mode), agent.config().system);
}

}  // namespace isac::baselines
