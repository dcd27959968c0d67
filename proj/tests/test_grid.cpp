#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "sdbli/errors.hpp"
#include "sdbli/grid.hpp"
#include "sdbli/rng.hpp"

using namespace sdbli;

namespace {

GridFunction random_field(GridSpec spec, Rng& rng, double scale = 1.0) {
  GridFunction u = zeros(spec);
  for (auto& v : u.values) v = scale * rng.normal();
  return u;
}

// Dense stencil matrix assembled column by column through the public
// operator; used as the oracle for symmetry and definiteness.
Eigen::MatrixXd dense_laplacian(GridSpec spec) {
  const auto N = static_cast<Eigen::Index>(spec.size());
  Eigen::MatrixXd A(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    GridFunction e = zeros(spec);
    e.values[static_cast<std::size_t>(j)] = 1.0;
    const GridFunction col = apply_laplacian(e);
    for (Eigen::Index i = 0; i < N; ++i)
      A(i, j) = col.values[static_cast<std::size_t>(i)];
  }
  return A;
}

}  // namespace

TEST_CASE("grid construction and node coordinates") {
  const GridSpec g = make_grid(3);
  CHECK(g.n == 3);
  CHECK(g.h() == doctest::Approx(0.25));
  CHECK(g.size() == 9);
  CHECK(node_x(g, 0) == doctest::Approx(0.25));
  CHECK(node_y(g, 2) == doctest::Approx(0.75));
  CHECK_THROWS_AS(make_grid(0), ConfigError);
  CHECK_THROWS_AS(make_grid(-2), ConfigError);
}

TEST_CASE("weighted inner product pinned values") {
  const GridSpec g3 = make_grid(3);
  const GridFunction ones3 = constant(g3, 1.0);

  SUBCASE("inner(0, b) = 0") {
    CHECK(inner(zeros(g3), ones3) == 0.0);
  }
  SUBCASE("constant one field on n=3: 9 h^2 = 0.5625") {
    CHECK(inner(ones3, ones3) == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(norm(ones3) == doctest::Approx(0.75).epsilon(1e-15));
  }
  SUBCASE("symmetry and homogeneity") {
    Rng rng(0x6E6);
    const GridSpec g8 = make_grid(8);
    const GridFunction a = random_field(g8, rng);
    const GridFunction b = random_field(g8, rng);
    CHECK(inner(a, b) == doctest::Approx(inner(b, a)).epsilon(1e-15));
    const double c = -2.375;
    CHECK(norm(scaled(a, c)) == doctest::Approx(std::fabs(c) * norm(a)).epsilon(1e-14));
  }
  SUBCASE("shape mismatch throws") {
    CHECK_THROWS_AS(inner(ones3, zeros(make_grid(4))), ShapeError);
  }
}

TEST_CASE("block norm uses the same weight as the grid norm") {
  const GridSpec g = make_grid(4);
  Rng rng(0xB10C);
  GridFunction u = random_field(g, rng);
  CHECK(block_norm(g, u.values) == doctest::Approx(norm(u)).epsilon(1e-15));
}

TEST_CASE("laplacian pinned values") {
  SUBCASE("zero maps to zero") {
    const GridFunction out = apply_laplacian(zeros(make_grid(5)));
    for (double v : out.values) CHECK(v == 0.0);
  }
  SUBCASE("single node n=1: h=1/2, value 1 -> 16") {
    GridFunction u = constant(make_grid(1), 1.0);
    const GridFunction out = apply_laplacian(u);
    CHECK(out.values[0] == doctest::Approx(16.0).epsilon(1e-15));
  }
}

TEST_CASE("laplacian is symmetric positive definite (dense oracle)") {
  const GridSpec g = make_grid(8);
  const Eigen::MatrixXd A = dense_laplacian(g);

  SUBCASE("matrix symmetry") {
    CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("weighted-inner-product symmetry on random fields") {
    Rng rng(0x5A5A);
    for (int rep = 0; rep < 5; ++rep) {
      const GridFunction a = random_field(g, rng);
      const GridFunction b = random_field(g, rng);
      const double lhs = inner(apply_laplacian(a), b);
      const double rhs = inner(a, apply_laplacian(b));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
  SUBCASE("eigenvalues positive and match the separable formula") {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    REQUIRE(es.info() == Eigen::Success);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    // lambda_min = (8/h^2) sin^2(pi h / 2) for the five-point stencil.
    const double h = g.h();
    const double lam_min = 8.0 / (h * h) * std::pow(std::sin(M_PI * h / 2.0), 2);
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(lam_min).epsilon(1e-10));
  }
  SUBCASE("operator application matches the dense matrix") {
    Rng rng(0x1234);
    const GridFunction x = random_field(g, rng);
    const GridFunction got = apply_laplacian(x);
    Eigen::VectorXd xv(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j)
      xv(static_cast<Eigen::Index>(j)) = x.values[j];
    const Eigen::VectorXd want = A * xv;
    for (std::size_t j = 0; j < g.size(); ++j)
      CHECK(got.values[j] == doctest::Approx(want(static_cast<Eigen::Index>(j)))
                                 .epsilon(1e-12));
  }
}

TEST_CASE("csv and json round trips are bit exact") {
  Rng rng(0xF00D);
  for (int n : {1, 3, 8}) {
    const GridSpec g = make_grid(n);
    GridFunction u = random_field(g, rng, 7.0);
    u.values[0] = 1.0 / 3.0;
    if (u.size() > 1) u.values[1] = 1e-300;
    if (u.size() > 2) u.values[2] = -12345.6789;

    const GridFunction via_csv = from_csv(to_csv(u));
    REQUIRE(via_csv.spec == g);
    for (std::size_t j = 0; j < u.size(); ++j) CHECK(via_csv.values[j] == u.values[j]);

    const GridFunction via_json = grid_function_from_json(to_json(u));
    REQUIRE(via_json.spec == g);
    for (std::size_t j = 0; j < u.size(); ++j) CHECK(via_json.values[j] == u.values[j]);
  }
}

TEST_CASE("csv side inference rejects non-square payloads") {
  CHECK_THROWS_AS(from_csv("1\n2\n3\n4\n5\n"), ShapeError);
  const GridFunction u = from_csv("1\n2\n3\n4\n");
  CHECK(u.spec.n == 2);
}

TEST_CASE("json loader validates payload size") {
  nlohmann::json j = {{"n", 2}, {"values", {1.0, 2.0, 3.0}}};
  CHECK_THROWS_AS(grid_function_from_json(j), ShapeError);
}

TEST_CASE("axpy and arithmetic helpers") {
  const GridSpec g = make_grid(3);
  Rng rng(0xABCD);
  const GridFunction a = random_field(g, rng);
  const GridFunction b = random_field(g, rng);
  GridFunction y = b;
  axpy_inplace(2.5, a, y);
  const GridFunction want = add(b, scaled(a, 2.5));
  for (std::size_t j = 0; j < g.size(); ++j)
    CHECK(y.values[j] == doctest::Approx(want.values[j]).epsilon(1e-15));
  const GridFunction d = sub(a, a);
  for (double v : d.values) CHECK(v == 0.0);
}
