// AVX2+FMA kernel variants.  This translation unit is compiled with
// -mavx2 -mfma and must only be reached through the runtime dispatcher.
#include "sdbli/kernels.hpp"

#if defined(SDBLI_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>

namespace sdbli::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j + 4), _mm256_loadu_pd(b + j + 4), acc1);
  }
  for (; j + 4 <= n; j += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d vy = _mm256_loadu_pd(y + j);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), vy);
    _mm256_storeu_pd(y + j, vy);
  }
  for (; j < n; ++j) y[j] += alpha * x[j];
}

void scal(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4)
    _mm256_storeu_pd(x + j, _mm256_mul_pd(va, _mm256_loadu_pd(x + j)));
  for (; j < n; ++j) x[j] *= alpha;
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4)
    _mm256_storeu_pd(out + j,
                     _mm256_sub_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j)));
  for (; j < n; ++j) out[j] = a[j] - b[j];
}

void max0(const double* y, double* out, std::size_t n) {
  const __m256d z = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4)
    _mm256_storeu_pd(out + j, _mm256_max_pd(_mm256_loadu_pd(y + j), z));
  for (; j < n; ++j) out[j] = std::max(y[j], 0.0);
}

void update2(double* u, double a, const double* g, double b, const double* m,
             std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d vu = _mm256_loadu_pd(u + j);
    vu = _mm256_fnmadd_pd(va, _mm256_loadu_pd(g + j), vu);
    vu = _mm256_fnmadd_pd(vb, _mm256_loadu_pd(m + j), vu);
    _mm256_storeu_pd(u + j, vu);
  }
  for (; j < n; ++j) u[j] -= a * g[j] + b * m[j];
}

void laplacian5(const double* in, double* out, int n, double inv_h2) {
  const __m256d four = _mm256_set1_pd(4.0);
  const __m256d vih2 = _mm256_set1_pd(inv_h2);
  for (int i = 0; i < n; ++i) {
    const double* c = in + static_cast<std::size_t>(i) * n;
    const double* up = i > 0 ? c - n : nullptr;
    const double* dn = i + 1 < n ? c + n : nullptr;
    double* o = out + static_cast<std::size_t>(i) * n;

    auto edge = [&](int j) {
      double v = 4.0 * c[j];
      if (j > 0) v -= c[j - 1];
      if (j + 1 < n) v -= c[j + 1];
      if (up) v -= up[j];
      if (dn) v -= dn[j];
      o[j] = v * inv_h2;
    };

    edge(0);
    // interior columns [1, n-1): shifted unaligned loads stay in bounds
    int j = 1;
    for (; j + 4 <= n - 1; j += 4) {
      __m256d v = _mm256_mul_pd(four, _mm256_loadu_pd(c + j));
      v = _mm256_sub_pd(v, _mm256_loadu_pd(c + j - 1));
      v = _mm256_sub_pd(v, _mm256_loadu_pd(c + j + 1));
      if (up) v = _mm256_sub_pd(v, _mm256_loadu_pd(up + j));
      if (dn) v = _mm256_sub_pd(v, _mm256_loadu_pd(dn + j));
      _mm256_storeu_pd(o + j, _mm256_mul_pd(v, vih2));
    }
    for (; j < n - 1; ++j) edge(j);
    if (n > 1) edge(n - 1);
  }
}

void add_masked(const std::uint8_t* mask, const double* y, double* out,
                std::size_t n) {
  for (std::size_t j = 0; j < n; ++j)
    if (mask[j]) out[j] += y[j];
}

void semilinear_residual(const double* lap, const double* y, const double* u,
                         double* r, std::size_t n) {
  const __m256d z = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d v = _mm256_add_pd(_mm256_loadu_pd(lap + j),
                              _mm256_max_pd(_mm256_loadu_pd(y + j), z));
    _mm256_storeu_pd(r + j, _mm256_sub_pd(v, _mm256_loadu_pd(u + j)));
  }
  for (; j < n; ++j) r[j] = lap[j] + std::max(y[j], 0.0) - u[j];
}

void matvec(const double* M, std::size_t rows, std::size_t cols,
            const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot(M + r * cols, x, cols);
}

void matvec_t(const double* M, std::size_t rows, std::size_t cols,
              const double* w, double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(w[r], M + r * cols, out, cols);
}

}  // namespace

const Ops ops = {
    .dot = dot,
    .axpy = axpy,
    .scal = scal,
    .sub = sub,
    .max0 = max0,
    .update2 = update2,
    .laplacian5 = laplacian5,
    .add_masked = add_masked,
    .semilinear_residual = semilinear_residual,
    .matvec = matvec,
    .matvec_t = matvec_t,
};

}  // namespace sdbli::kernels::avx2

#endif  // SDBLI_HAVE_AVX2
