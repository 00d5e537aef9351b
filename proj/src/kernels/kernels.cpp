#include "isac/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace isac::kernels {
namespace {

using detail::Ops;

bool host_has_avx2() {
#if defined(ISAC_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& ops_for(Backend b) {
#if defined(ISAC_HAVE_AVX2)
  if (b == Backend::avx2) return detail::avx2_ops();
#endif
  (void)b;
  return detail::scalar_ops();
}

Backend pick_default() {
  if (const char* env = std::getenv("ISAC_KERNEL_BACKEND")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && host_has_avx2()) return Backend::avx2;
  }
  return host_has_avx2() ? Backend::avx2 : Backend::scalar;
}

struct Dispatch {
  std::atomic<const Ops*> ops;
  std::atomic<Backend> backend;
  Dispatch() {
    const Backend b = pick_default();
    backend.store(b);
    ops.store(&ops_for(b));
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

inline const Ops& ops() { return *dispatch().ops.load(std::memory_order_relaxed); }

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string("kernels: size mismatch in ") + what);
}

}  // namespace

Backend active_backend() { return dispatch().backend.load(); }

bool backend_supported(Backend b) {
  if (b == Backend::scalar) return true;
  return host_has_avx2();
}

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw std::invalid_argument("kernels: backend not supported on this host");
  dispatch().backend.store(b);
  dispatch().ops.store(&ops_for(b));
}

std::string_view to_string(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size(), "dot");
  return ops().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size(), "axpy");
  ops().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) {
  ops().scale(alpha, x.data(), x.size());
}

void matvec(std::span<const double> w, std::span<const double> x,
            std::span<const double> bias, std::span<double> y,
            std::size_t rows, std::size_t cols) {
  check_same_size(w.size(), rows * cols, "matvec weights");
  check_same_size(x.size(), cols, "matvec input");
  check_same_size(y.size(), rows, "matvec output");
  if (!bias.empty()) check_same_size(bias.size(), rows, "matvec bias");
  ops().matvec(w.data(), x.data(), bias.empty() ? nullptr : bias.data(),
               y.data(), rows, cols);
}

void matvec_t_acc(std::span<const double> w, std::span<const double> gy,
                  std::span<double> gx, std::size_t rows, std::size_t cols) {
  check_same_size(w.size(), rows * cols, "matvec_t_acc weights");
  check_same_size(gy.size(), rows, "matvec_t_acc gy");
  check_same_size(gx.size(), cols, "matvec_t_acc gx");
  ops().matvec_t_acc(w.data(), gy.data(), gx.data(), rows, cols);
}

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n,
             std::size_t k) {
  check_same_size(a.size(), m * k, "gemm_nt A");
  check_same_size(b.size(), n * k, "gemm_nt B");
  check_same_size(c.size(), m * n, "gemm_nt C");
  ops().gemm_nt(a.data(), b.data(), c.data(), m, n, k);
}

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n,
             std::size_t k) {
  check_same_size(a.size(), m * k, "gemm_nn A");
  check_same_size(b.size(), k * n, "gemm_nn B");
  check_same_size(c.size(), m * n, "gemm_nn C");
  ops().gemm_nn(a.data(), b.data(), c.data(), m, n, k);
}

void gemm_tn_acc(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t n,
                 std::size_t k) {
  check_same_size(a.size(), k * m, "gemm_tn_acc A");
  check_same_size(b.size(), k * n, "gemm_tn_acc B");
  check_same_size(c.size(), m * n, "gemm_tn_acc C");
  ops().gemm_tn_acc(a.data(), b.data(), c.data(), m, n, k);
}

void add_row_bias(std::span<double> c, std::span<const double> bias,
                  std::size_t m, std::size_t n) {
  check_same_size(c.size(), m * n, "add_row_bias C");
  check_same_size(bias.size(), n, "add_row_bias bias");
  ops().add_row_bias(c.data(), bias.data(), m, n);
}

void relu(std::span<double> x) { ops().relu(x.data(), x.size()); }

void relu_backward(std::span<const double> activated, std::span<double> grad) {
  check_same_size(activated.size(), grad.size(), "relu_backward");
  ops().relu_backward(activated.data(), grad.data(), grad.size());
}

void adam_update(std::span<double> p, std::span<const double> g,
                 std::span<double> m, std::span<double> v, double lr,
                 double b1, double b2, double eps, double bc1, double bc2) {
  check_same_size(p.size(), g.size(), "adam_update");
  check_same_size(p.size(), m.size(), "adam_update m");
  check_same_size(p.size(), v.size(), "adam_update v");
  ops().adam_update(p.data(), g.data(), m.data(), v.data(), lr, b1, b2, eps,
                    bc1, bc2, p.size());
}

void soft_update(std::span<double> target, std::span<const double> online,
                 double eps) {
  check_same_size(target.size(), online.size(), "soft_update");
  ops().soft_update(target.data(), online.data(), eps, target.size());
}

}  // namespace isac::kernels
