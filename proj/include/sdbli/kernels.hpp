#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Low-level numeric kernels on contiguous double arrays.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds,
// an AVX2+FMA variant compiled in its own translation unit.  The active set
// of kernels is resolved once per process from CPUID, overridable with the
// environment variable SDBLI_KERNELS=scalar|avx2.  SIMD variants may
// reassociate reductions, so they are tolerance-equivalent (not bitwise) to
// the scalar ones; within one process the selection is fixed, which keeps
// repeated runs bitwise reproducible.
namespace sdbli::kernels {

struct Ops {
  // sum_j a[j]*b[j]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[j] += alpha*x[j]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x[j] *= alpha
  void (*scal)(double alpha, double* x, std::size_t n);
  // out[j] = a[j] - b[j]
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  // out[j] = max(y[j], 0)
  void (*max0)(const double* y, double* out, std::size_t n);
  // u[j] -= a*g[j] + b*m[j]   (the two-term iteration update)
  void (*update2)(double* u, double a, const double* g, double b,
                  const double* m, std::size_t n);
  // 5-point Laplacian with homogeneous Dirichlet halo on an n-by-n
  // row-major interior grid: out = (4c - N - S - W - E) * inv_h2
  void (*laplacian5)(const double* in, double* out, int n, double inv_h2);
  // out[j] += mask[j] ? y[j] : 0
  void (*add_masked)(const std::uint8_t* mask, const double* y, double* out,
                     std::size_t n);
  // r[j] = lap[j] + max(y[j],0) - u[j]
  void (*semilinear_residual)(const double* lap, const double* y,
                              const double* u, double* r, std::size_t n);
  // out[r] = sum_c M[r*cols+c] * x[c]        (row-major dense)
  void (*matvec)(const double* M, std::size_t rows, std::size_t cols,
                 const double* x, double* out);
  // out[c] = sum_r M[r*cols+c] * w[r]; out must be zeroed by the caller
  void (*matvec_t)(const double* M, std::size_t rows, std::size_t cols,
                   const double* w, double* out);
};

namespace scalar {
extern const Ops ops;
}

#if defined(SDBLI_HAVE_AVX2)
namespace avx2 {
extern const Ops ops;
}
#endif

// Kernel set chosen for this process (CPUID probe + SDBLI_KERNELS override).
const Ops& active();

// Name of the active variant: "scalar" or "avx2".
const std::string& active_name();

// True when this build carries the AVX2 translation unit and the CPU
// supports it.
bool avx2_available();

}  // namespace sdbli::kernels
