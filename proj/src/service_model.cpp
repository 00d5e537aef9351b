#include "isac/service_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isac::service {

namespace {
// slack for floating-point constraint checks; C2 is pinned at 1e-12
constexpr double kEnergySlack = 1e-12;
constexpr double kTimeSlack = 1e-9;
constexpr double kCaqaSlack = 1e-9;
}  // namespace

int ServiceOutcome::c5_violations() const {
  int v = 0;
  for (const auto& u : users) v += u.c5 ? 0 : 1;
  return v;
}

bool ServiceOutcome::all_feasible() const {
  if (!c2) return false;
  for (const auto& u : users)
    if (!(u.c1 && u.c3 && u.c4 && u.c5 && u.c6)) return false;
  return true;
}

double sensing_cycles(double e_s, const SystemConfig& cfg) {
  if (e_s < 0.0) throw std::invalid_argument("sensing_cycles: negative energy");
  return e_s / (cfg.t_s_s * cfg.p_s_w);
}

double sensing_accuracy(double n, const SystemConfig& cfg) {
  if (n < 0.0) throw std::invalid_argument("sensing_accuracy: negative cycles");
  if (n == 0.0) return 0.0;
  return std::max(cfg.xi - cfg.varpi * std::pow(n, -cfg.tau), 0.0);
}

std::optional<double> inverse_sensing_accuracy(double target,
                                               const SystemConfig& cfg) {
  if (target <= 0.0) return 0.0;
  if (target >= cfg.xi) return std::nullopt;
  return std::pow(cfg.varpi / (cfg.xi - target), 1.0 / cfg.tau);
}

double aeg(int z, const SystemConfig& cfg) {
  if (z < cfg.z_min) throw std::invalid_argument("aeg: z below z_min");
  return cfg.eps_fwd * std::exp(-cfg.mu * static_cast<double>(z - cfg.z_min));
}

double generation_time(double z, const SystemConfig& cfg) {
  if (z < 0.0) throw std::invalid_argument("generation_time: negative steps");
  return cfg.flops_per_step * z / cfg.server_flops;
}

std::vector<UserTimeline> timeline(const std::vector<double>& e_s,
                                   const std::vector<int>& z,
                                   const SystemConfig& cfg) {
  if (e_s.size() != z.size())
    throw std::invalid_argument("timeline: length mismatch");
  const std::size_t k = e_s.size();
  std::vector<UserTimeline> tl(k);

  double arr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    tl[i].n_cycles = sensing_cycles(e_s[i], cfg);
    arr += tl[i].n_cycles * cfg.t_s_s;
    tl[i].t_arr = arr;
    tl[i].t_gen = generation_time(static_cast<double>(z[i]), cfg);
  }
  const double sensing_end = arr;

  // single-server FCFS recurrence
  for (std::size_t i = 0; i < k; ++i) {
    if (i == 0) {
      tl[i].t_que = 0.0;
    } else {
      const auto& p = tl[i - 1];
      tl[i].t_que =
          std::max(p.t_arr + p.t_que + p.t_gen - tl[i].t_arr, 0.0);
    }
    tl[i].t_wait = std::max(
        sensing_end - (tl[i].t_arr + tl[i].t_que + tl[i].t_gen), 0.0);
  }
  return tl;
}

double transmission_rate(double gain_g, const SystemConfig& cfg) {
  if (gain_g < 0.0) throw std::invalid_argument("transmission_rate: negative gain");
  const double k = static_cast<double>(cfg.num_users);
  const double snr =
      gain_g * cfg.p_c_w * k / (cfg.noise_psd_w_per_hz * cfg.bandwidth_hz);
  return cfg.bandwidth_hz / k * std::log2(1.0 + snr);
}

CaqaResult caqa(double e_s, int z, double e_c, double gain_g,
                const SystemConfig& cfg) {
  if (e_s < 0.0 || e_c < 0.0)
    throw std::invalid_argument("caqa: negative energy");
  const double upsilon = sensing_accuracy(sensing_cycles(e_s, cfg), cfg);
  const double theta = (1.0 - aeg(z, cfg)) * upsilon;
  const double t_c = e_c / cfg.p_c_w;
  const double x = transmission_rate(gain_g, cfg) * t_c / cfg.bits_per_pixel;
  const double quality = std::min(x / cfg.display_capacity_pixels, 1.0);
  return {theta, x, theta * quality};
}

ServiceOutcome evaluate(const std::vector<scenario::UserScenario>& users,
                        const Allocation& alloc, const SystemConfig& cfg) {
  const std::size_t k = users.size();
  if (alloc.e_s.size() != k || alloc.z.size() != k || alloc.e_c.size() != k)
    throw std::invalid_argument("evaluate: allocation length mismatch");

  ServiceOutcome out;
  out.users.resize(k);
  const auto tl = timeline(alloc.e_s, alloc.z, cfg);

  double total_energy = 0.0;
  double caqa_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    auto& u = out.users[i];
    u.timeline = tl[i];
    u.upsilon = sensing_accuracy(tl[i].n_cycles, cfg);
    u.eps = aeg(alloc.z[i], cfg);
    u.theta = (1.0 - u.eps) * u.upsilon;
    u.rate_c = transmission_rate(users[i].gain_g, cfg);
    u.t_c = alloc.e_c[i] / cfg.p_c_w;
    u.x_pixels = u.rate_c * u.t_c / cfg.bits_per_pixel;
    u.quality = std::min(u.x_pixels / cfg.display_capacity_pixels, 1.0);
    u.omega = u.theta * u.quality;
    u.t_total =
        tl[i].t_arr + tl[i].t_que + tl[i].t_gen + tl[i].t_wait + u.t_c;

    u.c1 = u.t_total <= cfg.t_max_s + kTimeSlack;
    u.c3 = alloc.e_s[i] >= -kEnergySlack &&
           alloc.e_s[i] <= cfg.e_s_max_j + kEnergySlack;
    u.c4 = alloc.z[i] >= cfg.z_min && alloc.z[i] <= cfg.z_max;
    u.c5 = u.omega >= users[i].omega_min - kCaqaSlack;
    u.c6 = u.x_pixels >= 0.0 &&
           u.x_pixels <= cfg.display_capacity_pixels * (1.0 + 1e-9);

    total_energy += alloc.e_s[i] + alloc.e_c[i];
    caqa_sum += u.omega;
  }
  out.c2 = total_energy <= cfg.e_max_j + kEnergySlack;
  out.avg_caqa = caqa_sum / static_cast<double>(k);
  return out;
}

}  // namespace isac::service
