#include "isac/comra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace isac::comra {

namespace {
constexpr double kBudgetSlack = 1e-12;

// energy at which the delivered resolution hits the display cap
double display_cap_energy(double gain_g, const SystemConfig& cfg) {
  const double rate = service::transmission_rate(gain_g, cfg);
  return cfg.p_c_w * cfg.bits_per_pixel * cfg.display_capacity_pixels / rate;
}
}  // namespace

std::optional<double> min_comm_energy(double theta, double gain_g,
                                      double omega_min,
                                      const SystemConfig& cfg) {
  if (omega_min <= 0.0) return 0.0;
  if (theta <= 0.0) return std::nullopt;
  if (omega_min / theta > 1.0) return std::nullopt;
  // Omega = theta * x / D_c with x = C E_c / (P_c beta); solve Omega = omega_min
  return omega_min / theta * display_cap_energy(gain_g, cfg);
}

double max_comm_energy(double time_budget_s, double gain_g,
                       const SystemConfig& cfg) {
  const double time_energy = cfg.p_c_w * time_budget_s;
  return std::max(std::min(time_energy, display_cap_energy(gain_g, cfg)), 0.0);
}

double priority_metric(double theta, double gain_g, const SystemConfig& cfg) {
  const double rate = service::transmission_rate(gain_g, cfg);
  return theta * rate /
         (cfg.p_c_w * cfg.bits_per_pixel * cfg.display_capacity_pixels);
}

ComraInstance build_instance(const std::vector<scenario::UserScenario>& users,
                             const std::vector<double>& e_s,
                             const std::vector<int>& z,
                             const SystemConfig& cfg,
                             std::optional<double> theta_override,
                             bool eps_zero) {
  const std::size_t k = users.size();
  if (e_s.size() != k || z.size() != k)
    throw std::invalid_argument("build_instance: length mismatch");

  ComraInstance inst;
  inst.users.resize(k);
  const auto tl = service::timeline(e_s, z, cfg);

  double total_sensing = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    auto& u = inst.users[i];
    const double upsilon =
        service::sensing_accuracy(tl[i].n_cycles, cfg);
    const double eps = eps_zero ? 0.0 : service::aeg(z[i], cfg);
    u.theta = theta_override ? *theta_override : (1.0 - eps) * upsilon;
    u.gain_g = users[i].gain_g;
    const double budget =
        cfg.t_max_s -
        (tl[i].t_arr + tl[i].t_que + tl[i].t_gen + tl[i].t_wait);
    u.e_max_comm = max_comm_energy(budget, u.gain_g, cfg);
    const auto e_min = min_comm_energy(u.theta, u.gain_g, users[i].omega_min, cfg);
    if (e_min && *e_min <= u.e_max_comm) {
      u.e_min = *e_min;
      u.lambda = priority_metric(u.theta, u.gain_g, cfg);
      u.eligible = true;
    } else {
      u.e_min = e_min.value_or(0.0);
      u.lambda = 0.0;
      u.eligible = false;
    }
    total_sensing += e_s[i];
  }
  inst.e_r = cfg.e_max_j - total_sensing;
  return inst;
}

std::vector<double> rce_allocate(const ComraInstance& inst) {
  const std::size_t k = inst.users.size();
  std::vector<double> e_c(k, 0.0);
  if (inst.e_r <= 0.0) return e_c;

  // Eligible users sorted by descending lambda, index ascending on ties
  // (deterministic; any tie order is optimal by the exchange argument).
  // Compact keys keep the sort cache-friendly at large K.
  struct Key {
    double lambda;
    std::uint32_t index;
  };
  std::vector<Key> order;
  order.reserve(k);
  double sum_min = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!inst.users[i].eligible) continue;
    order.push_back({inst.users[i].lambda, static_cast<std::uint32_t>(i)});
    sum_min += inst.users[i].e_min;
  }
  if (order.empty()) return e_c;
  std::sort(order.begin(), order.end(), [](const Key& a, const Key& b) {
    return a.lambda != b.lambda ? a.lambda > b.lambda : a.index < b.index;
  });

  if (inst.e_r <= sum_min) {
    // Budget cannot cover every minimum: fund minima in ranked order, in full
    // or not at all, and stop at the first user that no longer fits.
    double remaining = inst.e_r;
    for (const auto& key : order) {
      if (inst.users[key.index].e_min > remaining + kBudgetSlack) break;
      e_c[key.index] = inst.users[key.index].e_min;
      remaining -= inst.users[key.index].e_min;
    }
    return e_c;
  }

  // Fund all minima, then pour the residual by rank up to each cap.
  double residual = inst.e_r - sum_min;
  for (const auto& key : order) e_c[key.index] = inst.users[key.index].e_min;
  for (const auto& key : order) {
    if (residual <= 0.0) break;
    const double room = inst.users[key.index].e_max_comm - e_c[key.index];
    const double grant = std::min(room, residual);
    if (grant > 0.0) {
      e_c[key.index] += grant;
      residual -= grant;
    }
  }
  return e_c;
}

double comra_objective(const ComraInstance& inst,
                       const std::vector<double>& e_c,
                       const SystemConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 0; i < inst.users.size(); ++i) {
    const auto& u = inst.users[i];
    const double rate = service::transmission_rate(u.gain_g, cfg);
    const double x = rate * (e_c[i] / cfg.p_c_w) / cfg.bits_per_pixel;
    total += u.theta * std::min(x / cfg.display_capacity_pixels, 1.0);
  }
  return total;
}

bool greedy_exchange_check(const ComraInstance& inst,
                           const std::vector<double>& e_c,
                           double eps_transfer) {
  const std::size_t k = inst.users.size();
  // per-user objective value at a hypothetical allocation (piecewise linear)
  auto val = [&](std::size_t i, double e) {
    return inst.users[i].lambda * std::min(e, inst.users[i].e_max_comm);
  };
  for (std::size_t i = 0; i < k; ++i) {
    if (e_c[i] <= 0.0) continue;
    // donor must stay inside its box after giving eps
    if (e_c[i] - eps_transfer < inst.users[i].e_min - 1e-15) continue;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i || !inst.users[j].eligible) continue;
      // receiver must already be funded (a cold user cannot absorb eps
      // without jumping to its minimum) and must have headroom
      if (e_c[j] < inst.users[j].e_min - 1e-15) continue;
      if (e_c[j] + eps_transfer > inst.users[j].e_max_comm + 1e-15) continue;
      const double delta = val(j, e_c[j] + eps_transfer) - val(j, e_c[j]) +
                           val(i, e_c[i] - eps_transfer) - val(i, e_c[i]);
      if (delta > 1e-12) return false;
    }
  }
  return true;
}

}  // namespace isac::comra
