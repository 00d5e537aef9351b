#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isac/rng.hpp"

namespace isac::nn {

enum class Activation { linear, relu, sigmoid };

// Fully connected stack: input -> sizes[0] -> ... -> sizes.back(), one
// activation per layer.
struct DenseNetSpec {
  std::size_t input = 0;
  std::vector<std::size_t> sizes;
  std::vector<Activation> acts;

  std::size_t output() const { return sizes.back(); }
  void validate() const;
};

// Weight matrix with orthonormal rows (rows <= cols) or columns (otherwise),
// scaled by gain. QR of a Gaussian draw with sign correction.
std::vector<double> orthogonal(std::size_t rows, std::size_t cols, double gain,
                               Rng& rng);

// MLP with flat parameter storage, batched forward, and exact reverse-mode
// gradients. All math is double precision and runs through isac::kernels.
class DenseNet {
 public:
  // hidden layers use hidden_gain, the final layer head_gain; biases zero
  DenseNet(DenseNetSpec spec, double hidden_gain, double head_gain, Rng& rng);

  const DenseNetSpec& spec() const { return spec_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weight(std::size_t layer);
  std::span<double> bias(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  struct Cache {
    std::size_t batch = 0;
    // acts[0] is the input copy, acts[l+1] the post-activation output of
    // layer l
    std::vector<std::vector<double>> acts;
  };

  // x is batch-major [batch x input], y [batch x output]
  void forward(std::span<const double> x, std::size_t batch,
               std::span<double> y, Cache* cache = nullptr) const;

  // Accumulates parameter gradients into dparams (same layout as params())
  // and, when dx is non-empty, writes input gradients [batch x input].
  void backward(const Cache& cache, std::span<const double> dy,
                std::span<double> dparams, std::span<double> dx = {}) const;

 private:
  struct Layer {
    std::size_t in, out;
    Activation act;
    std::size_t w_off, b_off;
  };

  DenseNetSpec spec_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

// Adam with bias correction. Throws std::runtime_error on non-finite
// gradients: a poisoned update would silently corrupt training.
struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, const AdamParams& hp = {});

// Flat tensor container for the checkpoint format: a magic header, tensor
// count, then per tensor (name, rows, cols, row-major float64 payload).
struct NamedTensor {
  std::string name;
  std::uint64_t rows = 0, cols = 0;
  std::vector<double> data;
};

void save_tensors(const std::string& path,
                  const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

}  // namespace isac::nn
