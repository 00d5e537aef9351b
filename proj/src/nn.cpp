#include "isac/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "isac/kernels.hpp"

namespace isac::nn {

namespace k = isac::kernels;

void DenseNetSpec::validate() const {
  if (input == 0) throw std::invalid_argument("DenseNetSpec: zero input size");
  if (sizes.empty()) throw std::invalid_argument("DenseNetSpec: no layers");
  if (sizes.size() != acts.size())
    throw std::invalid_argument("DenseNetSpec: sizes/acts length mismatch");
  for (const auto s : sizes)
    if (s == 0) throw std::invalid_argument("DenseNetSpec: zero layer size");
}

std::vector<double> orthogonal(std::size_t rows, std::size_t cols, double gain,
                               Rng& rng) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("orthogonal: empty shape");
  const std::size_t n = std::max(rows, cols);  // tall side
  const std::size_t m = std::min(rows, cols);

  // Gaussian draw, column-major [n x m]
  std::vector<double> a(n * m);
  for (auto& v : a) v = rng.normal();

  // modified Gram-Schmidt with a re-orthogonalization pass; keeps the sign of
  // the diagonal of R positive so the distribution is symmetric
  auto col = [&](std::size_t j) { return a.data() + j * n; };
  for (std::size_t j = 0; j < m; ++j) {
    double* cj = col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const double* ci = col(i);
        double proj = 0.0;
        for (std::size_t r = 0; r < n; ++r) proj += ci[r] * cj[r];
        for (std::size_t r = 0; r < n; ++r) cj[r] -= proj * ci[r];
      }
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += cj[r] * cj[r];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      // essentially-dependent draw; re-sample this column and redo it
      for (std::size_t r = 0; r < n; ++r) cj[r] = rng.normal();
      --j;
      continue;
    }
    for (std::size_t r = 0; r < n; ++r) cj[r] /= norm;
  }

  // lay out as [rows x cols] row-major, transposing when rows < cols
  std::vector<double> w(rows * cols);
  if (rows >= cols) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) w[r * cols + c] = gain * a[c * n + r];
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) w[r * cols + c] = gain * a[r * n + c];
  }
  return w;
}

DenseNet::DenseNet(DenseNetSpec spec, double hidden_gain, double head_gain,
                   Rng& rng)
    : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  std::size_t in = spec_.input;
  for (std::size_t l = 0; l < spec_.sizes.size(); ++l) {
    const std::size_t out = spec_.sizes[l];
    layers_.push_back({in, out, spec_.acts[l], offset, offset + in * out});
    offset += in * out + out;
    in = out;
  }
  params_.assign(offset, 0.0);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& ly = layers_[l];
    const double gain = (l + 1 == layers_.size()) ? head_gain : hidden_gain;
    const auto w = orthogonal(ly.out, ly.in, gain, rng);
    std::memcpy(params_.data() + ly.w_off, w.data(), w.size() * sizeof(double));
    // biases stay zero
  }
}

std::span<double> DenseNet::weight(std::size_t layer) {
  const auto& ly = layers_.at(layer);
  return {params_.data() + ly.w_off, ly.in * ly.out};
}
std::span<double> DenseNet::bias(std::size_t layer) {
  const auto& ly = layers_.at(layer);
  return {params_.data() + ly.b_off, ly.out};
}
std::span<const double> DenseNet::weight(std::size_t layer) const {
  const auto& ly = layers_.at(layer);
  return {params_.data() + ly.w_off, ly.in * ly.out};
}
std::span<const double> DenseNet::bias(std::size_t layer) const {
  const auto& ly = layers_.at(layer);
  return {params_.data() + ly.b_off, ly.out};
}

void DenseNet::forward(std::span<const double> x, std::size_t batch,
                       std::span<double> y, Cache* cache) const {
  if (x.size() != batch * spec_.input)
    throw std::invalid_argument("DenseNet::forward: input size mismatch");
  if (y.size() != batch * spec_.output())
    throw std::invalid_argument("DenseNet::forward: output size mismatch");

  if (cache) {
    cache->batch = batch;
    cache->acts.assign(layers_.size() + 1, {});
    cache->acts[0].assign(x.begin(), x.end());
  }

  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& ly = layers_[l];
    next.assign(batch * ly.out, 0.0);
    if (batch == 1) {
      k::matvec(weight(l), cur, bias(l), next, ly.out, ly.in);
    } else {
      k::gemm_nt(cur, weight(l), next, batch, ly.out, ly.in);
      k::add_row_bias(next, bias(l), batch, ly.out);
    }
    switch (ly.act) {
      case Activation::linear:
        break;
      case Activation::relu:
        k::relu(next);
        break;
      case Activation::sigmoid:
        for (auto& v : next) v = 1.0 / (1.0 + std::exp(-v));
        break;
    }
    cur.swap(next);
    if (cache) cache->acts[l + 1] = cur;
  }
  std::copy(cur.begin(), cur.end(), y.begin());
}

void DenseNet::backward(const Cache& cache, std::span<const double> dy,
                        std::span<double> dparams, std::span<double> dx) const {
  if (cache.acts.size() != layers_.size() + 1)
    throw std::invalid_argument("DenseNet::backward: stale cache");
  // empty dparams skips weight gradients (input-gradient-only backward)
  if (!dparams.empty() && dparams.size() != params_.size())
    throw std::invalid_argument("DenseNet::backward: dparams size mismatch");
  const std::size_t batch = cache.batch;
  if (dy.size() != batch * spec_.output())
    throw std::invalid_argument("DenseNet::backward: dy size mismatch");

  std::vector<double> g(dy.begin(), dy.end());
  std::vector<double> gprev;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& ly = layers_[l];
    const auto& out_act = cache.acts[l + 1];
    // activation derivative in terms of the cached post-activation value
    switch (ly.act) {
      case Activation::linear:
        break;
      case Activation::relu:
        k::relu_backward(out_act, g);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] *= out_act[i] * (1.0 - out_act[i]);
        break;
    }

    if (!dparams.empty()) {
      std::span<double> dw{dparams.data() + ly.w_off, ly.in * ly.out};
      std::span<double> db{dparams.data() + ly.b_off, ly.out};
      const auto& in_act = cache.acts[l];
      if (batch == 1) {
        // dW += outer(g, input)
        for (std::size_t r = 0; r < ly.out; ++r)
          k::axpy(g[r], std::span<const double>{in_act}, dw.subspan(r * ly.in, ly.in));
        k::axpy(1.0, g, db);
      } else {
        k::gemm_tn_acc(g, in_act, dw, ly.out, ly.in, batch);
        for (std::size_t b = 0; b < batch; ++b)
          k::axpy(1.0, std::span<const double>{g.data() + b * ly.out, ly.out}, db);
      }
    }

    const bool need_dx = l > 0 || !dx.empty();
    if (need_dx) {
      gprev.assign(batch * ly.in, 0.0);
      if (batch == 1) {
        k::matvec_t_acc(weight(l), g, gprev, ly.out, ly.in);
      } else {
        k::gemm_nn(g, weight(l), gprev, batch, ly.in, ly.out);
      }
      g.swap(gprev);
    }
  }
  if (!dx.empty()) {
    if (dx.size() != batch * spec_.input)
      throw std::invalid_argument("DenseNet::backward: dx size mismatch");
    std::copy(g.begin(), g.end(), dx.begin());
  }
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, const AdamParams& hp) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (const double g : grads)
    if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  k::adam_update(params, grads, state.m, state.v, lr, hp.beta1, hp.beta2,
                 hp.eps, bc1, bc2);
}

namespace {
constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'N', 'E', 'T', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_tensors: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.data.size() != t.rows * t.cols)
      throw std::invalid_argument("save_tensors: shape/data mismatch for " + t.name);
    write_pod(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(out, t.rows);
    write_pod(out, t.cols);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_tensors: write failed for " + path);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tensors: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_tensors: bad header in " + path);
  std::uint64_t count = 0;
  read_pod(in, count);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    std::uint32_t name_len = 0;
    read_pod(in, name_len);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    read_pod(in, t.rows);
    read_pod(in, t.cols);
    t.data.resize(t.rows * t.cols);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_tensors: truncated file " + path);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace isac::nn
