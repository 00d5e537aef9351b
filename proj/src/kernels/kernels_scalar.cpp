#include <cmath>
#include <cstddef>

#include "kernels_impl.hpp"

// Reference kernels. Plain loops, no manual unrolling: these define the
// semantics the vectorized backends are tested against.

namespace isac::kernels::detail {
namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_matvec(const double* w, const double* x, const double* bias, double* y,
              std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias ? bias[r] : 0.0;
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void s_matvec_t_acc(const double* w, const double* gy, double* gx,
                    std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = gy[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gx[c] += g * wr[c];
  }
}

void s_gemm_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] = acc;
    }
  }
}

void s_gemm_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = a[i * k + l];
      const double* bl = b + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
    }
  }
}

void s_gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t n, std::size_t k) {
  for (std::size_t l = 0; l < k; ++l) {
    const double* al = a + l * m;
    const double* bl = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ali = al[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ali * bl[j];
    }
  }
}

void s_add_row_bias(double* c, const double* bias, std::size_t m,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += bias[j];
  }
}

void s_relu(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_backward(const double* act, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (act[i] <= 0.0) grad[i] = 0.0;
  }
}

void s_adam_update(double* p, const double* g, double* m, double* v, double lr,
                   double b1, double b2, double eps, double bc1, double bc2,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

void s_soft_update(double* target, const double* online, double eps,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    target[i] = eps * online[i] + (1.0 - eps) * target[i];
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      .dot = s_dot,
      .axpy = s_axpy,
      .scale = s_scale,
      .matvec = s_matvec,
      .matvec_t_acc = s_matvec_t_acc,
      .gemm_nt = s_gemm_nt,
      .gemm_nn = s_gemm_nn,
      .gemm_tn_acc = s_gemm_tn_acc,
      .add_row_bias = s_add_row_bias,
      .relu = s_relu,
      .relu_backward = s_relu_backward,
      .adam_update = s_adam_update,
      .soft_update = s_soft_update,
  };
  return ops;
}

}  // namespace isac::kernels::detail
