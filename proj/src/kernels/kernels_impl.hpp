#pragma once

#include <cstddef>

// Internal backend vtable. Raw pointers here: the public span-based API in
// kernels.hpp validates sizes before forwarding.

namespace isac::kernels::detail {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*matvec)(const double*, const double*, const double*, double*,
                 std::size_t, std::size_t);
  void (*matvec_t_acc)(const double*, const double*, double*, std::size_t,
                       std::size_t);
  void (*gemm_nt)(const double*, const double*, double*, std::size_t,
                  std::size_t, std::size_t);
  void (*gemm_nn)(const double*, const double*, double*, std::size_t,
                  std::size_t, std::size_t);
  void (*gemm_tn_acc)(const double*, const double*, double*, std::size_t,
                      std::size_t, std::size_t);
  void (*add_row_bias)(double*, const double*, std::size_t, std::size_t);
  void (*relu)(double*, std::size_t);
  void (*relu_backward)(const double*, double*, std::size_t);
  void (*adam_update)(double*, const double*, double*, double*, double, double,
                      double, double, double, double, std::size_t);
  void (*soft_update)(double*, const double*, double, std::size_t);
};

const Ops& scalar_ops();

#if defined(ISAC_HAVE_AVX2)
const Ops& avx2_ops();
#endif

}  // namespace isac::kernels::detail
