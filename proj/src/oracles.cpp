#include "isac/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "isac/scenario.hpp"

namespace isac::oracles {

comra::ComraInstance random_instance(int num_users, const SystemConfig& cfg,
                                     Rng& rng, BudgetRegime regime) {
  comra::ComraInstance inst;
  inst.users.resize(num_users);
  for (auto& u : inst.users) {
    const double dist = scenario::disk_radius_from_uniform(
        cfg.coverage_radius_m, std::max(rng.uniform(), 1e-4));
    u.gain_g = scenario::channel_gain(dist, rng);
    u.theta = rng.uniform(0.3, 1.0);
    const double omega_min =
        rng.uniform(cfg.omega_min_range[0], cfg.omega_min_range[1]);
    const double budget = rng.uniform(0.05, cfg.t_max_s);
    u.e_max_comm = comra::max_comm_energy(budget, u.gain_g, cfg);
    const auto e_min = comra::min_comm_energy(u.theta, u.gain_g, omega_min, cfg);
    if (e_min && *e_min <= u.e_max_comm) {
      u.e_min = *e_min;
      u.lambda = comra::priority_metric(u.theta, u.gain_g, cfg);
      u.eligible = true;
    } else {
      u.e_min = e_min.value_or(0.0);
      u.eligible = false;
    }
  }

  double sum_min = 0.0;
  for (const auto& u : inst.users)
    if (u.eligible) sum_min += u.e_min;

  switch (regime) {
    case BudgetRegime::feasible:
      inst.e_r = sum_min * (1.0 + rng.uniform(0.0, 1.5)) + rng.uniform(0.0, 0.2);
      break;
    case BudgetRegime::shortfall:
      inst.e_r = sum_min * rng.uniform(0.1, 0.95);
      break;
    case BudgetRegime::exhausted:
      inst.e_r = -rng.uniform(0.0, 0.5);
      break;
  }
  return inst;
}

double grid_brute_force_objective(const comra::ComraInstance& inst,
                                  const SystemConfig& cfg, int levels,
                                  double* increment) {
  (void)cfg;
  // Base allocation: every eligible user at its minimum. The grid then
  // distributes the residual budget in `levels` equal units; each user may
  // take any number of units up to its box headroom. Exact DP over units.
  double sum_min = 0.0;
  double base = 0.0;
  double lambda_max = 0.0;
  for (const auto& u : inst.users) {
    if (!u.eligible) continue;
    sum_min += u.e_min;
    base += u.lambda * u.e_min;
    lambda_max = std::max(lambda_max, u.lambda);
  }
  const double residual = inst.e_r - sum_min;
  if (residual < 0.0)
    throw std::invalid_argument(
        "grid_brute_force_objective: instance not in the feasible regime");

  const double unit = residual / levels;
  if (increment) *increment = lambda_max * unit;
  if (unit <= 0.0) return base;

  std::vector<double> dp(levels + 1, 0.0);
  for (const auto& u : inst.users) {
    if (!u.eligible) continue;
    const int headroom = static_cast<int>(
        std::min(static_cast<double>(levels),
                 std::floor((u.e_max_comm - u.e_min) / unit)));
    if (headroom <= 0) continue;
    // take j units for this user; iterate budget downwards (0/1-style DP
    // with multiplicity folded into the inner loop)
    for (int b = levels; b >= 1; --b) {
      double best = dp[b];
      const int jmax = std::min(headroom, b);
      for (int j = 1; j <= jmax; ++j)
        best = std::max(best, dp[b - j] + u.lambda * (j * unit));
      dp[b] = best;
    }
  }
  return base + dp[levels];
}

FcfsTimes fcfs_event_simulation(const std::vector<double>& arrivals,
                                const std::vector<double>& service,
                                double sensing_end) {
  const std::size_t n = arrivals.size();
  if (service.size() != n)
    throw std::invalid_argument("fcfs_event_simulation: length mismatch");
  FcfsTimes out;
  out.queue.resize(n);
  out.wait.resize(n);
  double server_free = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double start = std::max(arrivals[i], server_free);
    out.queue[i] = start - arrivals[i];
    const double done = start + service[i];
    server_free = done;
    out.wait[i] = std::max(sensing_end - done, 0.0);
  }
  return out;
}

namespace {

double linear_functional(std::span<const double> values,
                         const std::vector<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * values[i];
  return acc;
}

double max_rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double gradcheck_dense(nn::DenseNet& net, std::size_t batch, Rng& rng,
                       int probes, double step) {
  const std::size_t in_dim = net.spec().input;
  const std::size_t out_dim = net.spec().output();
  std::vector<double> x(batch * in_dim);
  for (auto& v : x) v = rng.normal();
  std::vector<double> w(batch * out_dim);
  for (auto& v : w) v = rng.normal();

  nn::DenseNet::Cache cache;
  std::vector<double> y(batch * out_dim);
  net.forward(x, batch, y, &cache);
  std::vector<double> grads(net.param_count(), 0.0);
  net.backward(cache, w, grads);

  auto loss_at = [&]() {
    std::vector<double> out(batch * out_dim);
    net.forward(x, batch, out);
    return linear_functional(out, w);
  };

  auto params = net.params();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t i = rng.uniform_int(params.size());
    const double saved = params[i];
    params[i] = saved + step;
    const double lp = loss_at();
    params[i] = saved - step;
    const double lm = loss_at();
    params[i] = saved;
    worst = std::max(worst, max_rel_err(grads[i], (lp - lm) / (2.0 * step)));
  }
  return worst;
}

double gradcheck_actor_composite(int num_users, int step_choices, Rng& rng,
                                 int probes, double step) {
  const int k = num_users, s = step_choices;
  const std::size_t state_dim = 2 * k, feat = 128, ks = static_cast<std::size_t>(k) * s;

  nn::DenseNet trunk({state_dim, {256, 128}, {nn::Activation::relu, nn::Activation::relu}},
                     1.0, 1.0, rng);
  nn::DenseNet step_head({feat, {ks}, {nn::Activation::linear}}, 1.0, 0.01, rng);
  nn::DenseNet sense({feat + ks, {64, 2 * static_cast<std::size_t>(k)},
                      {nn::Activation::relu, nn::Activation::linear}},
                     1.0, 0.01, rng);

  const std::size_t batch = 3;
  std::vector<double> x(batch * state_dim);
  for (auto& v : x) v = rng.normal();
  // frozen one-hot: the discrete sample is held fixed so the composite map
  // stays differentiable
  std::vector<double> onehot(batch * ks, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (int u = 0; u < k; ++u)
      onehot[b * ks + u * s + rng.uniform_int(s)] = 1.0;

  std::vector<double> w_logits(batch * ks), w_sense(batch * 2 * k);
  for (auto& v : w_logits) v = rng.normal();
  for (auto& v : w_sense) v = rng.normal();

  auto forward_loss = [&](nn::DenseNet::Cache* tc, nn::DenseNet::Cache* stc,
                          nn::DenseNet::Cache* sec) {
    std::vector<double> trunk_out(batch * feat);
    trunk.forward(x, batch, trunk_out, tc);
    std::vector<double> logits(batch * ks);
    step_head.forward(trunk_out, batch, logits, stc);
    std::vector<double> branch_in(batch * (feat + ks));
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(trunk_out.data() + b * feat, feat,
                  branch_in.data() + b * (feat + ks));
      std::copy_n(onehot.data() + b * ks, ks,
                  branch_in.data() + b * (feat + ks) + feat);
    }
    std::vector<double> sense_out(batch * 2 * k);
    sense.forward(branch_in, batch, sense_out, sec);
    return linear_functional(logits, w_logits) +
           linear_functional(sense_out, w_sense);
  };

  // analytic gradients through the composite
  nn::DenseNet::Cache tc, stc, sec;
  forward_loss(&tc, &stc, &sec);
  std::vector<double> g_trunk(trunk.param_count(), 0.0);
  std::vector<double> g_step(step_head.param_count(), 0.0);
  std::vector<double> g_sense(sense.param_count(), 0.0);
  std::vector<double> dbranch(batch * (feat + ks), 0.0);
  sense.backward(sec, w_sense, g_sense, dbranch);
  std::vector<double> dtrunk(batch * feat, 0.0);
  std::vector<double> dtrunk2(batch * feat, 0.0);
  step_head.backward(stc, w_logits, g_step, dtrunk2);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < feat; ++f)
      dtrunk[b * feat + f] = dbranch[b * (feat + ks) + f] + dtrunk2[b * feat + f];
  trunk.backward(tc, dtrunk, g_trunk);

  struct Part {
    nn::DenseNet* net;
    std::vector<double>* grads;
  };
  std::vector<Part> parts{{&trunk, &g_trunk}, {&step_head, &g_step}, {&sense, &g_sense}};

  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    auto& part = parts[rng.uniform_int(parts.size())];
    auto params = part.net->params();
    const std::size_t i = rng.uniform_int(params.size());
    const double saved = params[i];
    params[i] = saved + step;
    const double lp = forward_loss(nullptr, nullptr, nullptr);
    params[i] = saved - step;
    const double lm = forward_loss(nullptr, nullptr, nullptr);
    params[i] = saved;
    worst = std::max(worst,
                     max_rel_err((*part.grads)[i], (lp - lm) / (2.0 * step)));
  }
  return worst;
}

}  // namespace isac::oracles
