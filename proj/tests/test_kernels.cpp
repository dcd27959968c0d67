#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sdbli/kernels.hpp"
#include "sdbli/rng.hpp"

using namespace sdbli;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Lengths that cover full SIMD lanes, remainders, and the empty tail.
const std::vector<std::size_t> kLens = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 257};

double rel_err(double got, double want, double floor_scale) {
  return std::fabs(got - want) / std::max(floor_scale, std::fabs(want));
}

}  // namespace

TEST_CASE("scalar dot matches a compensated reference") {
  Rng rng(0xD07);
  for (std::size_t n : kLens) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    long double want = 0.0L;
    for (std::size_t j = 0; j < n; ++j)
      want += static_cast<long double>(a[j]) * b[j];
    const double got = kernels::scalar::ops.dot(a.data(), b.data(), n);
    CHECK(rel_err(got, static_cast<double>(want), 1.0) < 1e-13);
  }
}

TEST_CASE("avx2 kernels agree with scalar within reassociation tolerance") {
  if (!kernels::avx2_available()) {
    MESSAGE("AVX2 not available on this host; skipping");
    return;
  }
#if defined(SDBLI_HAVE_AVX2)
  const auto& s = kernels::scalar::ops;
  const auto& v = kernels::avx2::ops;
  Rng rng(0xA5A5);

  for (std::size_t n : kLens) {
    const auto a = random_vec(rng, n, 3.0);
    const auto b = random_vec(rng, n, 2.0);

    CHECK(rel_err(v.dot(a.data(), b.data(), n), s.dot(a.data(), b.data(), n),
                  1.0) < 1e-12);

    std::vector<double> ys = a, yv = a;
    s.axpy(0.37, b.data(), ys.data(), n);
    v.axpy(0.37, b.data(), yv.data(), n);
    for (std::size_t j = 0; j < n; ++j) CHECK(ys[j] == doctest::Approx(yv[j]).epsilon(1e-14));

    std::vector<double> xs = a, xv = a;
    s.scal(-1.75, xs.data(), n);
    v.scal(-1.75, xv.data(), n);
    for (std::size_t j = 0; j < n; ++j) CHECK(xs[j] == xv[j]);

    std::vector<double> ds(n), dv(n);
    s.sub(a.data(), b.data(), ds.data(), n);
    v.sub(a.data(), b.data(), dv.data(), n);
    for (std::size_t j = 0; j < n; ++j) CHECK(ds[j] == dv[j]);

    std::vector<double> ms(n), mv(n);
    s.max0(a.data(), ms.data(), n);
    v.max0(a.data(), mv.data(), n);
    for (std::size_t j = 0; j < n; ++j) CHECK(ms[j] == mv[j]);

    std::vector<double> us = a, uv = a;
    s.update2(us.data(), 0.9, b.data(), 0.1, a.data(), n);
    v.update2(uv.data(), 0.9, b.data(), 0.1, a.data(), n);
    for (std::size_t j = 0; j < n; ++j)
      CHECK(us[j] == doctest::Approx(uv[j]).epsilon(1e-14));

    std::vector<std::uint8_t> mask(n);
    for (std::size_t j = 0; j < n; ++j) mask[j] = (rng.next_u64() & 1) ? 1 : 0;
    std::vector<double> as = b, av = b;
    s.add_masked(mask.data(), a.data(), as.data(), n);
    v.add_masked(mask.data(), a.data(), av.data(), n);
    for (std::size_t j = 0; j < n; ++j) CHECK(as[j] == av[j]);

    const auto lap = random_vec(rng, n);
    std::vector<double> rs(n), rv(n);
    s.semilinear_residual(lap.data(), a.data(), b.data(), rs.data(), n);
    v.semilinear_residual(lap.data(), a.data(), b.data(), rv.data(), n);
    for (std::size_t j = 0; j < n; ++j) CHECK(rs[j] == rv[j]);
  }

  for (int n : {1, 2, 3, 4, 5, 8, 16, 17}) {
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const auto in = random_vec(rng, nn);
    std::vector<double> outs(nn), outv(nn);
    const double inv_h2 = static_cast<double>((n + 1) * (n + 1));
    s.laplacian5(in.data(), outs.data(), n, inv_h2);
    v.laplacian5(in.data(), outv.data(), n, inv_h2);
    for (std::size_t j = 0; j < nn; ++j)
      CHECK(outs[j] == doctest::Approx(outv[j]).epsilon(1e-13));
  }

  for (std::size_t rows : {1u, 3u, 8u, 17u}) {
    for (std::size_t cols : {1u, 4u, 9u, 33u}) {
      const auto M = random_vec(rng, rows * cols);
      const auto x = random_vec(rng, cols);
      const auto w = random_vec(rng, rows);
      std::vector<double> os(rows), ov(rows);
      s.matvec(M.data(), rows, cols, x.data(), os.data());
      v.matvec(M.data(), rows, cols, x.data(), ov.data());
      for (std::size_t r = 0; r < rows; ++r)
        CHECK(os[r] == doctest::Approx(ov[r]).epsilon(1e-12));
      std::vector<double> ts(cols, 0.0), tv(cols, 0.0);
      s.matvec_t(M.data(), rows, cols, w.data(), ts.data());
      v.matvec_t(M.data(), rows, cols, w.data(), tv.data());
      for (std::size_t c = 0; c < cols; ++c)
        CHECK(ts[c] == doctest::Approx(tv[c]).epsilon(1e-12));
    }
  }
#endif
}

TEST_CASE("active selection is consistent and named") {
  const auto& name = kernels::active_name();
  CHECK((name == "scalar" || name == "avx2"));
  const double a[3] = {1.0, 2.0, 3.0};
  const double b[3] = {4.0, 5.0, 6.0};
  CHECK(kernels::active().dot(a, b, 3) == doctest::Approx(32.0));
}

TEST_CASE("scalar laplacian matches the hand stencil") {
  // n=2, h=1/3: interior nodes form a 2x2 block; each node has two
  // boundary neighbors (zero) and two interior ones.
  const double in[4] = {1.0, 2.0, 3.0, 4.0};
  double out[4];
  kernels::scalar::ops.laplacian5(in, out, 2, 9.0);
  CHECK(out[0] == doctest::Approx(9.0 * (4.0 * 1 - 2 - 3)));
  CHECK(out[1] == doctest::Approx(9.0 * (4.0 * 2 - 1 - 4)));
  CHECK(out[2] == doctest::Approx(9.0 * (4.0 * 3 - 4 - 1)));
  CHECK(out[3] == doctest::Approx(9.0 * (4.0 * 4 - 3 - 2)));
}
