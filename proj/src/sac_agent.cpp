#include "isac/sac_agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "isac/kernels.hpp"
#include "json.hpp"

namespace isac::sac {

namespace k = isac::kernels;

namespace {

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kDClip = 1e-12;

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_block(const double* in, double* out, int n) {
  double mx = in[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t min_fill)
    : capacity_(capacity), min_fill_(min_fill) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  if (min_fill > capacity)
    throw std::invalid_argument("ReplayBuffer: min_fill exceeds capacity");
  store_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (size_ < capacity_) {
    store_.push_back(std::move(t));
    ++size_;
  } else {
    store_[next_] = std::move(t);  // overwrite the oldest slot
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n,
                                                      Rng& rng) const {
  if (n > size_)
    throw std::invalid_argument("ReplayBuffer: batch larger than fill");
  std::vector<std::size_t> idx(size_);
  for (std::size_t i = 0; i < size_; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_int(size_ - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

// ---------------------------------------------------------------------------
// action filter + reward

double min_feasible_sensing_energy(int z, double omega_min,
                                   const SystemConfig& cfg, bool eps_zero,
                                   bool* feasible) {
  const double eps = eps_zero ? 0.0 : service::aeg(z, cfg);
  const double target = omega_min / (1.0 - eps);
  const auto n_q = service::inverse_sensing_accuracy(target, cfg);
  if (!n_q) {
    if (feasible) *feasible = false;
    return cfg.e_s_max_j;
  }
  const double e_q = *n_q * cfg.t_s_s * cfg.p_s_w;
  if (e_q > cfg.e_s_max_j) {
    if (feasible) *feasible = false;
    return cfg.e_s_max_j;
  }
  if (feasible) *feasible = true;
  return e_q;
}

FilterResult action_filter(const std::vector<double>& d,
                           const std::vector<int>& z,
                           const std::vector<scenario::UserScenario>& users,
                           const SystemConfig& cfg, bool eps_zero) {
  const std::size_t n = users.size();
  if (d.size() != n || z.size() != n)
    throw std::invalid_argument("action_filter: length mismatch");
  FilterResult out;
  out.e_s.resize(n);
  out.flagged.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    bool feasible = true;
    const double e_q =
        min_feasible_sensing_energy(z[i], users[i].omega_min, cfg, eps_zero, &feasible);
    if (!feasible) {
      out.e_s[i] = cfg.e_s_max_j;
      out.flagged[i] = true;
    } else {
      out.e_s[i] = d[i] * (cfg.e_s_max_j - e_q) + e_q;
    }
  }
  return out;
}

double lp_guided_reward(const service::ServiceOutcome& outcome) {
  const int v = outcome.c5_violations();
  const double n = static_cast<double>(outcome.users.size());
  return v == 0 ? outcome.avg_caqa : outcome.avg_caqa - v / n;
}

// ---------------------------------------------------------------------------
// hybrid actor

namespace {
nn::DenseNetSpec trunk_spec(int state_dim) {
  return {static_cast<std::size_t>(state_dim),
          {256, 128},
          {nn::Activation::relu, nn::Activation::relu}};
}
nn::DenseNetSpec step_spec(int k, int s) {
  return {128, {static_cast<std::size_t>(k * s)}, {nn::Activation::linear}};
}
nn::DenseNetSpec branch_spec(int k, int s) {
  return {static_cast<std::size_t>(128 + k * s),
          {64, static_cast<std::size_t>(2 * k)},
          {nn::Activation::relu, nn::Activation::linear}};
}
}  // namespace

HybridActor::HybridActor(int num_users, int step_choices, bool comm_branch,
                         std::optional<int> forced_step_index, Rng& rng)
    : k_(num_users),
      s_(step_choices),
      forced_step_(forced_step_index),
      trunk_(trunk_spec(2 * num_users), 1.0, 1.0, rng),
      step_head_(step_spec(num_users, step_choices), 1.0, 0.01, rng),
      sense_(branch_spec(num_users, step_choices), 1.0, 0.01, rng) {
  if (forced_step_ && (*forced_step_ < 0 || *forced_step_ >= s_))
    throw std::invalid_argument("HybridActor: forced step index out of range");
  if (comm_branch) comm_.emplace(branch_spec(num_users, step_choices), 1.0, 0.01, rng);
}

HybridActor::Eval HybridActor::forward(std::span<const double> states,
                                       std::size_t batch, ActionMode mode,
                                       Rng& rng, bool need_cache) const {
  const std::size_t state_dim = 2 * static_cast<std::size_t>(k_);
  if (states.size() != batch * state_dim)
    throw std::invalid_argument("HybridActor::forward: state size mismatch");

  Eval ev;
  ev.batch = batch;
  const std::size_t ks = static_cast<std::size_t>(k_) * s_;

  ev.trunk_out.resize(batch * 128);
  trunk_.forward(states, batch, ev.trunk_out, need_cache ? &ev.trunk_cache : nullptr);

  ev.z_index.resize(batch * k_);
  ev.z_norm.resize(batch * k_);
  ev.onehot.assign(batch * ks, 0.0);
  ev.log_prob.assign(batch, 0.0);

  if (!forced_step_) {
    ev.logits.resize(batch * ks);
    step_head_.forward(ev.trunk_out, batch, ev.logits,
                       need_cache ? &ev.step_cache : nullptr);
    ev.soft.assign(batch * ks, 0.0);
    std::vector<double> perturbed(s_);
    std::vector<double> probs(s_);
    for (std::size_t b = 0; b < batch; ++b) {
      for (int u = 0; u < k_; ++u) {
        const double* lg = ev.logits.data() + b * ks + u * s_;
        double* soft = ev.soft.data() + b * ks + u * s_;
        int choice = 0;
        if (mode == ActionMode::sample) {
          for (int i = 0; i < s_; ++i)
            perturbed[i] = (lg[i] + rng.gumbel()) / gumbel_temperature;
          softmax_block(perturbed.data(), soft, s_);
          for (int i = 1; i < s_; ++i)
            if (perturbed[i] > perturbed[choice]) choice = i;
        } else {
          for (int i = 0; i < s_; ++i) perturbed[i] = lg[i] / gumbel_temperature;
          softmax_block(perturbed.data(), soft, s_);
          for (int i = 1; i < s_; ++i)
            if (lg[i] > lg[choice]) choice = i;
        }
        ev.z_index[b * k_ + u] = choice;
        ev.onehot[b * ks + u * s_ + choice] = 1.0;
        // categorical log-probability comes from the unperturbed logits
        softmax_block(lg, probs.data(), s_);
        ev.log_prob[b] += std::log(std::max(probs[choice], 1e-300));
      }
    }
  } else {
    for (std::size_t b = 0; b < batch; ++b)
      for (int u = 0; u < k_; ++u) {
        ev.z_index[b * k_ + u] = *forced_step_;
        ev.onehot[b * ks + u * s_ + *forced_step_] = 1.0;
      }
  }
  const double denom = s_ > 1 ? static_cast<double>(s_ - 1) : 1.0;
  for (std::size_t i = 0; i < ev.z_index.size(); ++i)
    ev.z_norm[i] = static_cast<double>(ev.z_index[i]) / denom;

  // sensing branch input: trunk features ++ one-hot step choices
  const std::size_t bin = 128 + ks;
  ev.branch_in.resize(batch * bin);
  for (std::size_t b = 0; b < batch; ++b) {
    std::memcpy(ev.branch_in.data() + b * bin, ev.trunk_out.data() + b * 128,
                128 * sizeof(double));
    std::memcpy(ev.branch_in.data() + b * bin + 128, ev.onehot.data() + b * ks,
                ks * sizeof(double));
  }

  auto run_gaussian_branch =
      [&](const nn::DenseNet& net, nn::DenseNet::Cache* cache,
          std::vector<double>& mean, std::vector<double>& log_std_raw,
          std::vector<double>& log_std, std::vector<double>& noise,
          std::vector<double>& uu, std::vector<double>& val) {
        std::vector<double> raw(batch * 2 * k_);
        net.forward(ev.branch_in, batch, raw, cache);
        mean.resize(batch * k_);
        log_std_raw.resize(batch * k_);
        log_std.resize(batch * k_);
        noise.resize(batch * k_);
        uu.resize(batch * k_);
        val.resize(batch * k_);
        for (std::size_t b = 0; b < batch; ++b) {
          for (int u = 0; u < k_; ++u) {
            const std::size_t i = b * k_ + u;
            mean[i] = raw[b * 2 * k_ + u];
            log_std_raw[i] = raw[b * 2 * k_ + k_ + u];
            log_std[i] = std::clamp(log_std_raw[i], kLogStdMin, kLogStdMax);
            noise[i] = mode == ActionMode::sample ? rng.normal() : 0.0;
            uu[i] = mean[i] + std::exp(log_std[i]) * noise[i];
            val[i] = std::clamp(stable_sigmoid(uu[i]), kDClip, 1.0 - kDClip);
            // squashed-Gaussian log density of the sigmoid output
            ev.log_prob[b] += -0.5 * noise[i] * noise[i] - log_std[i] -
                              0.5 * std::log(2.0 * std::numbers::pi) +
                              softplus(uu[i]) + softplus(-uu[i]);
          }
        }
      };

  run_gaussian_branch(sense_, need_cache ? &ev.sense_cache : nullptr, ev.mean,
                      ev.log_std_raw, ev.log_std, ev.noise, ev.u, ev.d);
  if (comm_)
    run_gaussian_branch(*comm_, need_cache ? &ev.comm_cache : nullptr,
                        ev.c_mean, ev.c_log_std_raw, ev.c_log_std, ev.c_noise,
                        ev.c_u, ev.c);
  return ev;
}

HybridActor::Grads HybridActor::backward(const Eval& ev,
                                         std::span<const double> dz_norm,
                                         std::span<const double> dd,
                                         std::span<const double> dc,
                                         std::span<const double> dlogp) const {
  const std::size_t batch = ev.batch;
  const std::size_t ks = static_cast<std::size_t>(k_) * s_;
  const std::size_t bin = 128 + ks;

  Grads g;
  g.trunk.assign(trunk_.param_count(), 0.0);
  g.sense.assign(sense_.param_count(), 0.0);
  if (!forced_step_) g.step.assign(step_head_.param_count(), 0.0);
  if (comm_) g.comm.assign(comm_->param_count(), 0.0);

  std::vector<double> dbranch_in(batch * bin, 0.0);

  auto gaussian_branch_backward =
      [&](const nn::DenseNet& net, const nn::DenseNet::Cache& cache,
          std::span<double> dparams, const std::vector<double>& mean,
          const std::vector<double>& log_std_raw,
          const std::vector<double>& uu, const std::vector<double>& val,
          std::span<const double> dval) {
        std::vector<double> dout(batch * 2 * k_, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
          const double dlp = dlogp.empty() ? 0.0 : dlogp[b];
          for (int u = 0; u < k_; ++u) {
            const std::size_t i = b * k_ + u;
            const double dv = dval.empty() ? 0.0 : dval[i];
            const double sig_grad = val[i] * (1.0 - val[i]);
            const double du = dv * sig_grad;
            const double spread = uu[i] - mean[i];  // exp(log_std) * noise
            // d logp / d mean = 2 sigma(u) - 1 ; d logp / d log_std adds -1
            double dmean = du + dlp * (2.0 * val[i] - 1.0);
            double dls = du * spread + dlp * (-1.0 + (2.0 * val[i] - 1.0) * spread);
            if (log_std_raw[i] <= kLogStdMin || log_std_raw[i] >= kLogStdMax)
              dls = 0.0;  // hard clamp blocks the gradient
            dout[b * 2 * k_ + u] = dmean;
            dout[b * 2 * k_ + k_ + u] = dls;
          }
        }
        std::vector<double> din(batch * bin, 0.0);
        net.backward(cache, dout, dparams, din);
        k::axpy(1.0, din, dbranch_in);
      };

  gaussian_branch_backward(sense_, ev.sense_cache, g.sense, ev.mean,
                           ev.log_std_raw, ev.u, ev.d, dd);
  if (comm_)
    gaussian_branch_backward(*comm_, ev.comm_cache, g.comm, ev.c_mean,
                             ev.c_log_std_raw, ev.c_u, ev.c, dc);

  // trunk gradient: feature part of the branch input
  std::vector<double> dtrunk_out(batch * 128, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    k::axpy(1.0,
            std::span<const double>{dbranch_in.data() + b * bin, 128},
            std::span<double>{dtrunk_out.data() + b * 128, 128});

  if (!forced_step_) {
    // one-hot gradient = branch-input slots + z_norm slot spread over levels
    const double denom = s_ > 1 ? static_cast<double>(s_ - 1) : 1.0;
    std::vector<double> dlogits(batch * ks, 0.0);
    std::vector<double> donehot(s_);
    std::vector<double> probs(s_);
    for (std::size_t b = 0; b < batch; ++b) {
      const double dlp = dlogp.empty() ? 0.0 : dlogp[b];
      for (int u = 0; u < k_; ++u) {
        const double dz = dz_norm.empty() ? 0.0 : dz_norm[b * k_ + u];
        for (int i = 0; i < s_; ++i)
          donehot[i] = dbranch_in[b * bin + 128 + u * s_ + i] +
                       dz * static_cast<double>(i) / denom;
        // straight-through: push through the tempered softmax jacobian
        const double* soft = ev.soft.data() + b * ks + u * s_;
        double inner = 0.0;
        for (int i = 0; i < s_; ++i) inner += donehot[i] * soft[i];
        double* dl = dlogits.data() + b * ks + u * s_;
        for (int i = 0; i < s_; ++i)
          dl[i] = soft[i] * (donehot[i] - inner) / gumbel_temperature;
        // categorical log-prob term on the unperturbed logits
        if (dlp != 0.0) {
          const double* lg = ev.logits.data() + b * ks + u * s_;
          softmax_block(lg, probs.data(), s_);
          const int choice = ev.z_index[b * k_ + u];
          for (int i = 0; i < s_; ++i)
            dl[i] += dlp * ((i == choice ? 1.0 : 0.0) - probs[i]);
        }
      }
    }
    std::vector<double> dtrunk2(batch * 128, 0.0);
    step_head_.backward(ev.step_cache, dlogits, g.step, dtrunk2);
    k::axpy(1.0, dtrunk2, dtrunk_out);
  }

  trunk_.backward(ev.trunk_cache, dtrunk_out, g.trunk, {});
  return g;
}

// ---------------------------------------------------------------------------
// agent

namespace {
nn::DenseNetSpec critic_spec(std::size_t input) {
  return {input, {256, 128, 1},
          {nn::Activation::relu, nn::Activation::relu, nn::Activation::linear}};
}
}  // namespace

SacAgent::SacAgent(const Config& cfg, AgentVariant variant, std::uint64_t seed)
    : cfg_(cfg),
      variant_(variant),
      k_(cfg.system.num_users),
      s_(cfg.system.step_choices()),
      action_dim_(static_cast<std::size_t>(variant.comm_branch ? 3 : 2) * k_),
      critic_in_(2 * static_cast<std::size_t>(k_) + action_dim_),
      init_rng_(seed, 0),
      noise_rng_(seed, 1),
      sample_rng_(seed, 2),
      actor_(k_, s_, variant.comm_branch,
             variant.fixed_z
                 ? std::optional<int>(*variant.fixed_z - cfg.system.z_min)
                 : std::nullopt,
             init_rng_),
      critic1_(critic_spec(critic_in_), 1.0, 1.0, init_rng_),
      critic2_(critic_spec(critic_in_), 1.0, 1.0, init_rng_),
      target1_(critic1_),
      target2_(critic2_),
      actor_opt_trunk_(actor_.trunk().param_count()),
      actor_opt_step_(actor_.step_head().param_count()),
      actor_opt_sense_(actor_.sense_branch().param_count()),
      critic1_opt_(critic1_.param_count()),
      critic2_opt_(critic2_.param_count()),
      log_alpha_(std::log(cfg.agent.init_temperature)),
      alpha_opt_(1),
      buffer_(cfg.agent.buffer_capacity, cfg.agent.buffer_min_fill) {
  cfg_.validate();
  if (variant.fixed_z &&
      (*variant.fixed_z < cfg.system.z_min || *variant.fixed_z > cfg.system.z_max))
    throw std::invalid_argument("SacAgent: fixed_z outside [z_min, z_max]");
  if (variant.comm_branch) actor_opt_comm_.emplace(actor_.comm_branch().param_count());
  actor_.gumbel_temperature = cfg.agent.gumbel_temperature;

  if (cfg.agent.target_entropy != 0.0) {
    target_entropy_ = cfg.agent.target_entropy;
  } else {
    // half of the "full" hybrid entropy scale
    const double n_cont = static_cast<double>(k_) * (variant.comm_branch ? 2.0 : 1.0);
    const double n_cat = variant.fixed_z ? 0.0 : static_cast<double>(k_);
    target_entropy_ = -0.5 * (n_cont + n_cat * std::log(static_cast<double>(s_)));
  }
}

std::vector<double> SacAgent::encode_action(const HybridActor::Eval& ev) const {
  const std::size_t batch = ev.batch;
  std::vector<double> a(batch * action_dim_);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = a.data() + b * action_dim_;
    for (int u = 0; u < k_; ++u) {
      row[u] = ev.z_norm[b * k_ + u];
      row[k_ + u] = ev.d[b * k_ + u];
      if (variant_.comm_branch) row[2 * k_ + u] = ev.c[b * k_ + u];
    }
  }
  return a;
}

service::Allocation SacAgent::decode_action(const scenario::Scenario& sc,
                                            const HybridActor::Eval& ev,
                                            std::vector<bool>* flagged) const {
  service::Allocation alloc;
  alloc.z.resize(k_);
  for (int u = 0; u < k_; ++u)
    alloc.z[u] = cfg_.system.z_min + ev.z_index[u];

  const std::vector<double> d(ev.d.begin(), ev.d.begin() + k_);
  if (variant_.use_action_filter) {
    auto fr = action_filter(d, alloc.z, sc.users, cfg_.system,
                            variant_.filter_eps_zero);
    alloc.e_s = std::move(fr.e_s);
    if (flagged) *flagged = std::move(fr.flagged);
  } else {
    alloc.e_s.resize(k_);
    for (int u = 0; u < k_; ++u) alloc.e_s[u] = d[u] * cfg_.system.e_s_max_j;
    if (flagged) flagged->assign(k_, false);
  }

  if (variant_.comm_branch) {
    alloc.e_c.assign(k_, 0.0);
    double e_r = cfg_.system.e_max_j;
    for (const auto e : alloc.e_s) e_r -= e;
    double csum = 0.0;
    for (int u = 0; u < k_; ++u) csum += ev.c[u];
    if (e_r > 0.0 && csum > 0.0)
      for (int u = 0; u < k_; ++u) alloc.e_c[u] = ev.c[u] * e_r / csum;
  } else {
    const auto inst =
        comra::build_instance(sc.users, alloc.e_s, alloc.z, cfg_.system);
    alloc.e_c = comra::rce_allocate(inst);
  }
  return alloc;
}

service::Allocation SacAgent::act(const scenario::Scenario& sc,
                                  ActionMode mode) {
  const auto ev = actor_.forward(sc.state, 1, mode, noise_rng_, false);
  return decode_action(sc, ev, nullptr);
}

StepMetrics SacAgent::train_step(const scenario::Scenario& current,
                                 const scenario::Scenario& next) {
  StepMetrics m;
  const auto ev = actor_.forward(current.state, 1, ActionMode::sample,
                                 noise_rng_, false);
  std::vector<bool> flagged;
  const auto alloc = decode_action(current, ev, &flagged);
  const auto outcome = service::evaluate(current.users, alloc, cfg_.system);
  const double r = lp_guided_reward(outcome);

  buffer_.push({current.state, encode_action(ev), r, next.state});
  ++steps_;

  m.reward = r;
  m.avg_caqa = outcome.avg_caqa;
  m.c5_violations = outcome.c5_violations();
  for (const bool f : flagged) m.filter_flags += f ? 1 : 0;
  m.alpha = temperature();
  m.gumbel_temperature = actor_.gumbel_temperature;

  if (buffer_.ready()) update(m);
  return m;
}

StepMetrics SacAgent::update_once() {
  StepMetrics m;
  if (buffer_.size() < cfg_.agent.batch_size)
    throw std::runtime_error("SacAgent::update_once: buffer too small");
  update(m);
  return m;
}

void SacAgent::update(StepMetrics& m) {
  const std::size_t bsz = cfg_.agent.batch_size;
  const std::size_t sdim = 2 * static_cast<std::size_t>(k_);
  const auto idx = buffer_.sample_indices(bsz, sample_rng_);

  std::vector<double> s(bsz * sdim), a(bsz * action_dim_), r(bsz),
      s2(bsz * sdim);
  for (std::size_t i = 0; i < bsz; ++i) {
    const auto& t = buffer_.at(idx[i]);
    std::memcpy(s.data() + i * sdim, t.state.data(), sdim * sizeof(double));
    std::memcpy(a.data() + i * action_dim_, t.action.data(),
                action_dim_ * sizeof(double));
    std::memcpy(s2.data() + i * sdim, t.next_state.data(),
                sdim * sizeof(double));
    r[i] = t.reward;
  }

  const double alpha = temperature();
  const double gamma = cfg_.agent.gamma;

  // --- critic targets from the resampled next action
  const auto ev2 =
      actor_.forward(s2, bsz, ActionMode::sample, noise_rng_, false);
  const auto a2 = encode_action(ev2);
  std::vector<double> x2(bsz * critic_in_);
  for (std::size_t i = 0; i < bsz; ++i) {
    std::memcpy(x2.data() + i * critic_in_, s2.data() + i * sdim,
                sdim * sizeof(double));
    std::memcpy(x2.data() + i * critic_in_ + sdim, a2.data() + i * action_dim_,
                action_dim_ * sizeof(double));
  }
  std::vector<double> q1p(bsz), q2p(bsz);
  target1_.forward(x2, bsz, q1p);
  target2_.forward(x2, bsz, q2p);
  std::vector<double> y(bsz);
  for (std::size_t i = 0; i < bsz; ++i)
    y[i] = r[i] + gamma * (std::min(q1p[i], q2p[i]) - alpha * ev2.log_prob[i]);

  // --- critic regression
  std::vector<double> x(bsz * critic_in_);
  for (std::size_t i = 0; i < bsz; ++i) {
    std::memcpy(x.data() + i * critic_in_, s.data() + i * sdim,
                sdim * sizeof(double));
    std::memcpy(x.data() + i * critic_in_ + sdim, a.data() + i * action_dim_,
                action_dim_ * sizeof(double));
  }
  auto critic_pass = [&](nn::DenseNet& critic, nn::AdamState& opt) {
    nn::DenseNet::Cache cache;
    std::vector<double> q(bsz);
    critic.forward(x, bsz, q, &cache);
    double loss = 0.0;
    std::vector<double> dq(bsz);
    for (std::size_t i = 0; i < bsz; ++i) {
      const double e = q[i] - y[i];
      loss += e * e;
      dq[i] = 2.0 * e / static_cast<double>(bsz);
    }
    std::vector<double> grads(critic.param_count(), 0.0);
    critic.backward(cache, dq, grads);
    nn::adam_step(critic.params(), grads, opt, cfg_.agent.critic_lr);
    return loss / static_cast<double>(bsz);
  };
  m.critic_loss_1 = critic_pass(critic1_, critic1_opt_);
  m.critic_loss_2 = critic_pass(critic2_, critic2_opt_);

  // --- actor: maximize min_j Q(s, a_pi) - alpha log pi
  const auto evA = actor_.forward(s, bsz, ActionMode::sample, noise_rng_, true);
  const auto aA = encode_action(evA);
  std::vector<double> xA(bsz * critic_in_);
  for (std::size_t i = 0; i < bsz; ++i) {
    std::memcpy(xA.data() + i * critic_in_, s.data() + i * sdim,
                sdim * sizeof(double));
    std::memcpy(xA.data() + i * critic_in_ + sdim, aA.data() + i * action_dim_,
                action_dim_ * sizeof(double));
  }
  nn::DenseNet::Cache c1cache, c2cache;
  std::vector<double> q1(bsz), q2(bsz);
  critic1_.forward(xA, bsz, q1, &c1cache);
  critic2_.forward(xA, bsz, q2, &c2cache);

  std::vector<double> dq1(bsz, 0.0), dq2(bsz, 0.0);
  double actor_loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(bsz);
  for (std::size_t i = 0; i < bsz; ++i) {
    const double qmin = std::min(q1[i], q2[i]);
    actor_loss += alpha * evA.log_prob[i] - qmin;
    // minimize: gradient -1/B flows through the argmin critic only
    (q1[i] <= q2[i] ? dq1[i] : dq2[i]) = -inv_b;
  }
  actor_loss *= inv_b;
  m.actor_loss = actor_loss;

  std::vector<double> dx1(bsz * critic_in_), dx2(bsz * critic_in_);
  critic1_.backward(c1cache, dq1, {}, dx1);
  critic2_.backward(c2cache, dq2, {}, dx2);

  std::vector<double> dz(bsz * k_, 0.0), dd(bsz * k_, 0.0), dc;
  if (variant_.comm_branch) dc.assign(bsz * k_, 0.0);
  for (std::size_t i = 0; i < bsz; ++i) {
    const double* g1 = dx1.data() + i * critic_in_ + sdim;
    const double* g2 = dx2.data() + i * critic_in_ + sdim;
    for (int u = 0; u < k_; ++u) {
      dz[i * k_ + u] = g1[u] + g2[u];
      dd[i * k_ + u] = g1[k_ + u] + g2[k_ + u];
      if (variant_.comm_branch)
        dc[i * k_ + u] = g1[2 * k_ + u] + g2[2 * k_ + u];
    }
  }
  std::vector<double> dlogp(bsz, alpha * inv_b);
  auto ag = actor_.backward(evA, dz, dd, dc, dlogp);
  nn::adam_step(actor_.trunk().params(), ag.trunk, actor_opt_trunk_,
                cfg_.agent.actor_lr);
  if (!ag.step.empty())
    nn::adam_step(actor_.step_head().params(), ag.step, actor_opt_step_,
                  cfg_.agent.actor_lr);
  nn::adam_step(actor_.sense_branch().params(), ag.sense, actor_opt_sense_,
                cfg_.agent.actor_lr);
  if (variant_.comm_branch)
    nn::adam_step(actor_.comm_branch().params(), ag.comm, *actor_opt_comm_,
                  cfg_.agent.actor_lr);

  // --- temperature: J(rho) = E[-rho (log pi + H_target)], log-parameterized
  double mean_lp = 0.0;
  for (const double lp : evA.log_prob) mean_lp += lp;
  mean_lp *= inv_b;
  const double alpha_grad = -(mean_lp + target_entropy_);
  m.alpha_loss = -log_alpha_ * (mean_lp + target_entropy_);
  std::vector<double> la{log_alpha_}, lg{alpha_grad};
  nn::adam_step(la, lg, alpha_opt_, cfg_.agent.alpha_lr);
  log_alpha_ = la[0];
  m.alpha = temperature();

  k::soft_update(target1_.params(), critic1_.params(), cfg_.agent.soft_update_eps);
  k::soft_update(target2_.params(), critic2_.params(), cfg_.agent.soft_update_eps);

  actor_.gumbel_temperature = std::max(
      cfg_.agent.gumbel_floor, actor_.gumbel_temperature * cfg_.agent.gumbel_anneal);
  m.gumbel_temperature = actor_.gumbel_temperature;

  ++updates_;
  m.updated = true;
}

// ---------------------------------------------------------------------------
// checkpointing

namespace {
nn::NamedTensor flat_tensor(const std::string& name, std::span<const double> v) {
  return {name, 1, v.size(), std::vector<double>(v.begin(), v.end())};
}

void append_net(std::vector<nn::NamedTensor>& out, const std::string& prefix,
                const nn::DenseNet& net, const nn::AdamState* opt) {
  out.push_back(flat_tensor(prefix + ".params", net.params()));
  if (opt) {
    out.push_back(flat_tensor(prefix + ".adam_m", opt->m));
    out.push_back(flat_tensor(prefix + ".adam_v", opt->v));
    out.push_back({prefix + ".adam_step", 1, 1,
                   {static_cast<double>(opt->step)}});
  }
}

void restore_flat(const std::vector<nn::NamedTensor>& tensors,
                  const std::string& name, std::span<double> dst) {
  for (const auto& t : tensors) {
    if (t.name == name) {
      if (t.data.size() != dst.size())
        throw std::runtime_error("checkpoint: size mismatch for " + name);
      std::copy(t.data.begin(), t.data.end(), dst.begin());
      return;
    }
  }
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

double restore_scalar(const std::vector<nn::NamedTensor>& tensors,
                      const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t.data.at(0);
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

void restore_net(const std::vector<nn::NamedTensor>& tensors,
                 const std::string& prefix, nn::DenseNet& net,
                 nn::AdamState* opt) {
  restore_flat(tensors, prefix + ".params", net.params());
  if (opt) {
    restore_flat(tensors, prefix + ".adam_m", opt->m);
    restore_flat(tensors, prefix + ".adam_v", opt->v);
    opt->step = static_cast<std::int64_t>(
        restore_scalar(tensors, prefix + ".adam_step"));
  }
}
}  // namespace

void SacAgent::save_checkpoint(const std::string& path_prefix,
                               std::int64_t episode) const {
  std::vector<nn::NamedTensor> tensors;
  append_net(tensors, "actor.trunk", actor_.trunk(), &actor_opt_trunk_);
  append_net(tensors, "actor.step", actor_.step_head(), &actor_opt_step_);
  append_net(tensors, "actor.sense", actor_.sense_branch(), &actor_opt_sense_);
  if (variant_.comm_branch)
    append_net(tensors, "actor.comm", actor_.comm_branch(), &*actor_opt_comm_);
  append_net(tensors, "critic1", critic1_, &critic1_opt_);
  append_net(tensors, "critic2", critic2_, &critic2_opt_);
  append_net(tensors, "target1", target1_, nullptr);
  append_net(tensors, "target2", target2_, nullptr);
  tensors.push_back({"log_alpha", 1, 1, {log_alpha_}});
  tensors.push_back({"alpha.adam_m", 1, 1, {alpha_opt_.m[0]}});
  tensors.push_back({"alpha.adam_v", 1, 1, {alpha_opt_.v[0]}});
  tensors.push_back({"alpha.adam_step", 1, 1, {static_cast<double>(alpha_opt_.step)}});
  tensors.push_back({"gumbel_temperature", 1, 1, {actor_.gumbel_temperature}});
  nn::save_tensors(path_prefix + ".ckpt", tensors);

  nlohmann::json meta{{"format", "isac-checkpoint-v1"},
                      {"episode", episode},
                      {"env_steps", steps_},
                      {"updates", updates_},
                      {"config_hash", cfg_.hash()},
                      {"noise_rng", noise_rng_.state_string()},
                      {"sample_rng", sample_rng_.state_string()},
                      {"action_dim", action_dim_},
                      {"num_users", k_}};
  std::ofstream meta_out(path_prefix + ".meta.json");
  if (!meta_out)
    throw std::runtime_error("save_checkpoint: cannot write metadata");
  meta_out << meta.dump(2) << "\n";
}

void SacAgent::load_checkpoint(const std::string& path_prefix) {
  const auto tensors = nn::load_tensors(path_prefix + ".ckpt");
  restore_net(tensors, "actor.trunk", actor_.trunk(), &actor_opt_trunk_);
  restore_net(tensors, "actor.step", actor_.step_head(), &actor_opt_step_);
  restore_net(tensors, "actor.sense", actor_.sense_branch(), &actor_opt_sense_);
  if (variant_.comm_branch)
    restore_net(tensors, "actor.comm", actor_.comm_branch(), &*actor_opt_comm_);
  restore_net(tensors, "critic1", critic1_, &critic1_opt_);
  restore_net(tensors, "critic2", critic2_, &critic2_opt_);
  restore_net(tensors, "target1", target1_, nullptr);
  restore_net(tensors, "target2", target2_, nullptr);
  log_alpha_ = restore_scalar(tensors, "log_alpha");
  alpha_opt_.m[0] = restore_scalar(tensors, "alpha.adam_m");
  alpha_opt_.v[0] = restore_scalar(tensors, "alpha.adam_v");
  alpha_opt_.step = static_cast<std::int64_t>(restore_scalar(tensors, "alpha.adam_step"));
  actor_.gumbel_temperature = restore_scalar(tensors, "gumbel_temperature");

  std::ifstream meta_in(path_prefix + ".meta.json");
  if (meta_in) {
    nlohmann::json meta;
    meta_in >> meta;
    if (meta.contains("env_steps")) steps_ = meta["env_steps"].get<std::int64_t>();
    if (meta.contains("updates")) updates_ = meta["updates"].get<std::int64_t>();
    if (meta.contains("noise_rng")) noise_rng_.set_state(meta["noise_rng"].get<std::string>());
    if (meta.contains("sample_rng")) sample_rng_.set_state(meta["sample_rng"].get<std::string>());
  }
}

}  // namespace isac::sac
