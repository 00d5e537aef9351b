#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "isac/nn.hpp"
#include "isac/oracles.hpp"

using namespace isac;
using namespace isac::nn;

TEST_CASE("orthogonal init: scalar, square, rectangular, gain") {
  Rng rng(31);

  for (int i = 0; i < 20; ++i) {
    const auto w = orthogonal(1, 1, 1.0, rng);
    CHECK(std::abs(std::abs(w[0]) - 1.0) < 1e-12);
  }

  auto check_rows_orthonormal = [](const std::vector<double>& w, std::size_t rows,
                                   std::size_t cols, double gain) {
    double worst = 0.0;
    for (std::size_t r1 = 0; r1 < rows; ++r1)
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
          dot += w[r1 * cols + c] * w[r2 * cols + c];
        const double expect = r1 == r2 ? gain * gain : 0.0;
        worst = std::max(worst, std::abs(dot - expect));
      }
    return worst;
  };

  const auto sq = orthogonal(64, 64, 1.0, rng);
  CHECK(check_rows_orthonormal(sq, 64, 64, 1.0) < 1e-5);

  const auto g2 = orthogonal(64, 64, 2.0, rng);
  CHECK(check_rows_orthonormal(g2, 64, 64, 2.0) < 1e-5);

  // rows < cols: W W^T = I
  const auto wide = orthogonal(16, 48, 1.0, rng);
  CHECK(check_rows_orthonormal(wide, 16, 48, 1.0) < 1e-5);

  // rows > cols: W^T W = I
  const auto tall = orthogonal(48, 16, 1.0, rng);
  double worst = 0.0;
  for (int c1 = 0; c1 < 16; ++c1)
    for (int c2 = 0; c2 < 16; ++c2) {
      double dot = 0.0;
      for (int r = 0; r < 48; ++r) dot += tall[r * 16 + c1] * tall[r * 16 + c2];
      worst = std::max(worst, std::abs(dot - (c1 == c2 ? 1.0 : 0.0)));
    }
  CHECK(worst < 1e-5);
}

TEST_CASE("forward: zero net, identity layer, independent recomputation") {
  Rng rng(32);
  DenseNetSpec spec{3, {4, 2}, {Activation::relu, Activation::linear}};
  DenseNet net(spec, 1.0, 1.0, rng);

  // zero weights and biases -> zero output
  for (auto& p : net.params()) p = 0.0;
  std::vector<double> x{0.5, -1.0, 2.0}, y(2);
  net.forward(x, 1, y);
  CHECK(y == std::vector<double>{0.0, 0.0});

  // identity single layer
  DenseNet id({2, {2}, {Activation::linear}}, 1.0, 1.0, rng);
  for (auto& p : id.params()) p = 0.0;
  id.weight(0)[0] = 1.0;
  id.weight(0)[3] = 1.0;
  std::vector<double> xi{0.7, -0.3}, yi(2);
  id.forward(xi, 1, yi);
  CHECK(yi[0] == 0.7);
  CHECK(yi[1] == -0.3);

  // random net vs a test-local naive re-implementation, batch of 5
  DenseNetSpec spec2{6, {11, 7, 3},
                     {Activation::relu, Activation::sigmoid, Activation::linear}};
  DenseNet net2(spec2, 1.0, 0.5, rng);
  const std::size_t batch = 5;
  std::vector<double> xb(batch * 6);
  for (auto& v : xb) v = rng.normal();
  std::vector<double> yb(batch * 3);
  net2.forward(xb, batch, yb);

  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<double> cur(xb.begin() + b * 6, xb.begin() + (b + 1) * 6);
    const std::size_t dims[4] = {6, 11, 7, 3};
    for (int l = 0; l < 3; ++l) {
      std::vector<double> next(dims[l + 1]);
      const auto w = net2.weight(l);
      const auto bias = net2.bias(l);
      for (std::size_t o = 0; o < dims[l + 1]; ++o) {
        double acc = bias[o];
        for (std::size_t i = 0; i < dims[l]; ++i) acc += w[o * dims[l] + i] * cur[i];
        if (l == 0) acc = std::max(acc, 0.0);
        if (l == 1) acc = 1.0 / (1.0 + std::exp(-acc));
        next[o] = acc;
      }
      cur = next;
    }
    for (int o = 0; o < 3; ++o)
      CHECK(std::abs(yb[b * 3 + o] - cur[o]) < 1e-12);
  }
}

TEST_CASE("backward: analytic single layer and zero gradient") {
  Rng rng(33);
  DenseNet lin({3, {2}, {Activation::linear}}, 1.0, 1.0, rng);
  std::vector<double> x{0.3, -0.8, 1.2}, y(2);
  DenseNet::Cache cache;
  lin.forward(x, 1, y, &cache);

  std::vector<double> dy{2.0, -1.5};
  std::vector<double> grads(lin.param_count(), 0.0), dx(3);
  lin.backward(cache, dy, grads, dx);

  // dW = outer(dy, x), db = dy, dx = W^T dy
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 3; ++i)
      CHECK(grads[o * 3 + i] == doctest::Approx(dy[o] * x[i]).epsilon(1e-15));
  CHECK(grads[6] == 2.0);
  CHECK(grads[7] == -1.5);
  const auto w = lin.weight(0);
  for (int i = 0; i < 3; ++i)
    CHECK(dx[i] == doctest::Approx(w[i] * dy[0] + w[3 + i] * dy[1]).epsilon(1e-15));

  std::vector<double> zero_dy{0.0, 0.0}, zero_grads(lin.param_count(), 0.0);
  lin.backward(cache, zero_dy, zero_grads);
  for (const auto g : zero_grads) CHECK(g == 0.0);
}

TEST_CASE("finite differences confirm gradients on random architectures") {
  Rng rng(34);
  DenseNet a({7, {16, 9, 4},
              {Activation::relu, Activation::sigmoid, Activation::linear}},
             1.0, 1.0, rng);
  CHECK(oracles::gradcheck_dense(a, 3, rng, 200) < 1e-4);

  DenseNet b({5, {12, 1}, {Activation::relu, Activation::linear}}, 1.0, 0.01, rng);
  CHECK(oracles::gradcheck_dense(b, 4, rng, 100) < 1e-4);
}

TEST_CASE("adam: no-op on zero gradient, first-step identity, monotone descent") {
  Rng rng(35);
  std::vector<double> p{1.0, -2.0, 0.5};
  const auto p0 = p;
  AdamState st(3);
  adam_step(p, std::vector<double>{0.0, 0.0, 0.0}, st, 1e-3);
  CHECK(p == p0);

  // first step with constant gradient: delta = -lr * g / (|g| + eps)
  AdamState st2(3);
  std::vector<double> q{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -0.7, 0.0001};
  adam_step(q, g, st2, 1e-3);
  for (int i = 0; i < 3; ++i) {
    const double expect = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(q[i] - p0[i] == doctest::Approx(expect).epsilon(1e-6));
  }

  // constant positive gradient pushes the parameter strictly down
  AdamState st3(1);
  std::vector<double> r{5.0};
  double prev = r[0];
  for (int i = 0; i < 50; ++i) {
    adam_step(r, std::vector<double>{1.0}, st3, 1e-2);
    CHECK(r[0] < prev);
    prev = r[0];
  }

  // non-finite gradients halt training
  AdamState st4(1);
  std::vector<double> s{1.0};
  CHECK_THROWS_AS(
      adam_step(s, std::vector<double>{std::nan("")}, st4, 1e-3),
      std::runtime_error);
}

TEST_CASE("tensor checkpoint round-trips bitwise") {
  Rng rng(36);
  std::vector<NamedTensor> tensors;
  tensors.push_back({"a", 3, 4, {}});
  tensors.back().data.resize(12);
  for (auto& v : tensors.back().data) v = rng.normal();
  tensors.push_back({"b.scale", 1, 1, {0.1 + rng.normal() * 1e-17}});

  const auto path =
      (std::filesystem::temp_directory_path() / "isac_nn_ckpt_test.bin").string();
  save_tensors(path, tensors);
  const auto loaded = load_tensors(path);
  REQUIRE(loaded.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded[i].name == tensors[i].name);
    CHECK(loaded[i].rows == tensors[i].rows);
    CHECK(loaded[i].cols == tensors[i].cols);
    CHECK(loaded[i].data == tensors[i].data);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_tensors("/nonexistent/isac.ckpt"), std::runtime_error);
}

TEST_CASE("deterministic construction from equal seeds") {
  Rng a(99), b(99);
  DenseNet na({4, {8, 2}, {Activation::relu, Activation::linear}}, 1.0, 0.01, a);
  DenseNet nb({4, {8, 2}, {Activation::relu, Activation::linear}}, 1.0, 0.01, b);
  CHECK(std::equal(na.params().begin(), na.params().end(), nb.params().begin()));
}
