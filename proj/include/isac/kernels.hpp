#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense numeric kernels used by the neural substrate and the optimizer hot
// loops. Every operation has a scalar reference implementation and, on x86
// machines with AVX2+FMA, a vectorized variant. The backend is picked once at
// startup (cpuid probe, overridable via the ISAC_KERNEL_BACKEND environment
// variable or set_backend) and the two variants are equivalence-tested
// against each other in tests/test_kernels.cpp.
//
// Matrices are row-major throughout.

namespace isac::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_supported(Backend b);
// Throws std::invalid_argument if the backend is not supported on this host.
void set_backend(Backend b);
std::string_view to_string(Backend b);

// sum_i a[i]*b[i]
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// x *= alpha
void scale(double alpha, std::span<double> x);

// y = W x + bias, W[rows x cols], bias may be empty (treated as zero).
void matvec(std::span<const double> w, std::span<const double> x,
            std::span<const double> bias, std::span<double> y,
            std::size_t rows, std::size_t cols);

// gx += W^T gy, W[rows x cols], gy[rows], gx[cols]
void matvec_t_acc(std::span<const double> w, std::span<const double> gy,
                  std::span<double> gx, std::size_t rows, std::size_t cols);

// C[m x n] = A[m x k] * B[n x k]^T   (dot products of rows)
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn_acc(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t n,
                 std::size_t k);

// C[m x n] += bias[n] broadcast over rows
void add_row_bias(std::span<double> c, std::span<const double> bias,
                  std::size_t m, std::size_t n);

// x = max(x, 0)
void relu(std::span<double> x);

// grad *= (activated > 0), where `activated` holds post-ReLU values
void relu_backward(std::span<const double> activated, std::span<double> grad);

// Adam with bias correction precomputed by the caller:
//   m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g^2
//   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
void adam_update(std::span<double> p, std::span<const double> g,
                 std::span<double> m, std::span<double> v, double lr,
                 double b1, double b2, double eps, double bc1, double bc2);

// target = eps*online + (1-eps)*target
void soft_update(std::span<double> target, std::span<const double> online,
                 double eps);

}  // namespace isac::kernels
