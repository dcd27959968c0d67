#include "sdbli/kernels.hpp"

#include <algorithm>

namespace sdbli::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0;
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
  }
  if (j < n) s0 += a[j] * b[j];
  return s0 + s1;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

void scal(double alpha, double* x, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) x[j] *= alpha;
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] = a[j] - b[j];
}

void max0(const double* y, double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] = std::max(y[j], 0.0);
}

void update2(double* u, double a, const double* g, double b, const double* m,
             std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) u[j] -= a * g[j] + b * m[j];
}

void laplacian5(const double* in, double* out, int n, double inv_h2) {
  for (int i = 0; i < n; ++i) {
    const double* c = in + static_cast<std::size_t>(i) * n;
    const double* up = i > 0 ? c - n : nullptr;
    const double* dn = i + 1 < n ? c + n : nullptr;
    double* o = out + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double v = 4.0 * c[j];
      if (j > 0) v -= c[j - 1];
      if (j + 1 < n) v -= c[j + 1];
      if (up) v -= up[j];
      if (dn) v -= dn[j];
      o[j] = v * inv_h2;
    }
  }
}

void add_masked(const std::uint8_t* mask, const double* y, double* out,
                std::size_t n) {
  for (std::size_t j = 0; j < n; ++j)
    if (mask[j]) out[j] += y[j];
}

void semilinear_residual(const double* lap, const double* y, const double* u,
                         double* r, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j)
    r[j] = lap[j] + std::max(y[j], 0.0) - u[j];
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

}  // namespace sdbli::kernels::scalar
