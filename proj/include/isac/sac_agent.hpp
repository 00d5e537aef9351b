#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isac/comra.hpp"
#include "isac/config.hpp"
#include "isac/nn.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"
#include "isac/service_model.hpp"

namespace isac::sac {

// Replay record. The stored action is the critic encoding: K normalized step
// values, K raw sensing outputs, and (joint variant only) K communication
// fractions.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
};

// FIFO ring with uniform without-replacement batch sampling.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t min_fill);

  void push(Transition t);
  bool ready() const { return size_ >= min_fill_; }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return store_[i]; }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> store_;
  std::size_t capacity_;
  std::size_t min_fill_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
};

// Action filter: remap the raw sensing output d in [0,1] onto
// [E^q, E_s_max], where E^q is the smallest sensing energy that can still
// meet the user's CAQA floor at full display quality. When no finite E^q
// exists (requirement above the accuracy ceiling) the energy clamps to
// E_s_max and the user is flagged; the reward penalty carries the signal.
struct FilterResult {
  std::vector<double> e_s;
  std::vector<bool> flagged;
};

double min_feasible_sensing_energy(int z, double omega_min,
                                   const SystemConfig& cfg, bool eps_zero,
                                   bool* feasible);

FilterResult action_filter(const std::vector<double>& d,
                           const std::vector<int>& z,
                           const std::vector<scenario::UserScenario>& users,
                           const SystemConfig& cfg, bool eps_zero = false);

// AvgCAQA, minus V/K when V users miss their CAQA floor.
double lp_guided_reward(const service::ServiceOutcome& outcome);

enum class ActionMode { sample, deterministic };

// Shared-trunk hybrid actor: trunk [256,128] -> step branch (K x S logits,
// Gumbel-softmax with straight-through sampling) and a sensing branch [64]
// fed with trunk features concatenated with the one-hot step choices,
// emitting a squashed Gaussian whose sigmoid keeps d in (0,1). The joint
// variant adds a communication branch of the same shape.
class HybridActor {
 public:
  HybridActor(int num_users, int step_choices, bool comm_branch,
              std::optional<int> forced_step_index, Rng& rng);

  struct Eval {
    std::size_t batch = 0;
    std::vector<int> z_index;        // batch x K, index into 0..S-1
    std::vector<double> z_norm;      // batch x K, index / (S-1)
    std::vector<double> d;           // batch x K
    std::vector<double> c;           // batch x K (joint variant)
    std::vector<double> log_prob;    // batch

    // internals for the backward pass
    std::vector<double> trunk_out, logits, soft, onehot, branch_in;
    std::vector<double> mean, log_std_raw, log_std, noise, u;
    std::vector<double> c_mean, c_log_std_raw, c_log_std, c_noise, c_u;
    nn::DenseNet::Cache trunk_cache, step_cache, sense_cache, comm_cache;
  };

  Eval forward(std::span<const double> states, std::size_t batch,
               ActionMode mode, Rng& rng, bool need_cache) const;

  // Gradient of a scalar loss through the sampled pathway. dz_norm/dd/dc are
  // gradients on the critic-visible action slots, dlogp the per-sample
  // gradient on log_prob. Straight-through estimator on the step choices.
  struct Grads {
    std::vector<double> trunk, step, sense, comm;
  };
  Grads backward(const Eval& eval, std::span<const double> dz_norm,
                 std::span<const double> dd, std::span<const double> dc,
                 std::span<const double> dlogp) const;

  int num_users() const { return k_; }
  int step_choices() const { return s_; }
  bool has_comm_branch() const { return static_cast<bool>(comm_); }
  std::optional<int> forced_step_index() const { return forced_step_; }

  nn::DenseNet& trunk() { return trunk_; }
  nn::DenseNet& step_head() { return step_head_; }
  nn::DenseNet& sense_branch() { return sense_; }
  nn::DenseNet& comm_branch() { return *comm_; }
  const nn::DenseNet& trunk() const { return trunk_; }
  const nn::DenseNet& step_head() const { return step_head_; }
  const nn::DenseNet& sense_branch() const { return sense_; }
  const nn::DenseNet& comm_branch() const { return *comm_; }

  double gumbel_temperature = 1.0;

 private:
  int k_, s_;
  std::optional<int> forced_step_;
  nn::DenseNet trunk_;
  nn::DenseNet step_head_;
  nn::DenseNet sense_;
  std::optional<nn::DenseNet> comm_;
};

// Behavioural flavour of the learner; covers the trained baselines too.
struct AgentVariant {
  bool use_action_filter = true;  // false: E_s = d * E_s_max
  bool filter_eps_zero = false;   // SAQA: E^q computed as if AEG were zero
  bool comm_branch = false;       // joint variant: learn E_c fractions
  std::optional<int> fixed_z;     // fixed generating step (step branch off)

  static AgentVariant lpdrl_f() { return {}; }
  static AgentVariant lpdrl() {
    AgentVariant v;
    v.use_action_filter = false;
    return v;
  }
  static AgentVariant jdrl_f() {
    AgentVariant v;
    v.comm_branch = true;
    return v;
  }
  static AgentVariant saqa_fg(int z_fixed) {
    AgentVariant v;
    v.filter_eps_zero = true;
    v.fixed_z = z_fixed;
    return v;
  }
};

struct StepMetrics {
  double reward = 0.0;
  double avg_caqa = 0.0;
  int c5_violations = 0;
  int filter_flags = 0;
  bool updated = false;
  double critic_loss_1 = 0.0, critic_loss_2 = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double alpha_loss = 0.0;
  double gumbel_temperature = 0.0;
};

// Soft actor-critic over the hybrid action space with twin critics, target
// networks, temperature auto-tuning, and the LP step in the loop: sensing
// and steps come from the actor, communication energy from rce_allocate
// (except the joint variant, which emits its own normalized fractions).
class SacAgent {
 public:
  SacAgent(const Config& cfg, AgentVariant variant, std::uint64_t seed);

  // decode + filter + communication allocation for one scenario
  service::Allocation act(const scenario::Scenario& sc, ActionMode mode);

  // one interaction plus (buffer permitting) one gradient update
  StepMetrics train_step(const scenario::Scenario& current,
                         const scenario::Scenario& next);

  const Config& config() const { return cfg_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  HybridActor& actor() { return actor_; }
  nn::DenseNet& critic(int i) { return i == 0 ? critic1_ : critic2_; }
  nn::DenseNet& target_critic(int i) { return i == 0 ? target1_ : target2_; }
  double temperature() const { return std::exp(log_alpha_); }
  double target_entropy() const { return target_entropy_; }
  std::int64_t updates_done() const { return updates_; }
  std::int64_t steps_done() const { return steps_; }
  const AgentVariant& variant() const { return variant_; }

  // forces one gradient update from the current buffer (test hook)
  StepMetrics update_once();

  void save_checkpoint(const std::string& path_prefix,
                       std::int64_t episode) const;
  void load_checkpoint(const std::string& path_prefix);

  service::Allocation decode_action(const scenario::Scenario& sc,
                                    const HybridActor::Eval& eval,
                                    std::vector<bool>* flagged) const;

 private:
  struct CriticPack {
    nn::AdamState opt;
    explicit CriticPack(std::size_t n) : opt(n) {}
  };

  std::vector<double> encode_action(const HybridActor::Eval& eval) const;
  void update(StepMetrics& metrics);

  Config cfg_;
  AgentVariant variant_;
  int k_, s_;
  std::size_t action_dim_, critic_in_;

  Rng init_rng_, noise_rng_, sample_rng_;
  HybridActor actor_;
  nn::DenseNet critic1_, critic2_, target1_, target2_;
  nn::AdamState actor_opt_trunk_, actor_opt_step_, actor_opt_sense_;
  std::optional<nn::AdamState> actor_opt_comm_;
  nn::AdamState critic1_opt_, critic2_opt_;
  double log_alpha_;
  nn::AdamState alpha_opt_;
  double target_entropy_;
  ReplayBuffer buffer_;
  std::int64_t updates_ = 0;
  std::int64_t steps_ = 0;
};

}  // namespace isac::sac
