#include "sdbli/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "sdbli/kernels.hpp"

namespace sdbli {

namespace {

// Weighted residual |‑Lap y + y⁺ − u| computed with the kernel set.
double residual_norm_impl(const GridFunction& y, const GridFunction& u) {
  const auto& k = kernels::active();
  const std::size_t sz = y.size();
  std::vector<double> lap(sz), r(sz);
  const double h = y.spec.h();
  k.laplacian5(y.data(), lap.data(), y.spec.n, 1.0 / (h * h));
  k.semilinear_residual(lap.data(), y.data(), u.data(), r.data(), sz);
  return std::sqrt(h * h * k.dot(r.data(), r.data(), sz));
}

std::vector<std::uint8_t> active_set_of(const GridFunction& y) {
  std::vector<std::uint8_t> a(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) a[j] = y.values[j] > 0.0 ? 1 : 0;
  return a;
}

}  // namespace

struct StateLinearOperator::Impl {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  bool use_direct = false;
};

StateLinearOperator::StateLinearOperator(GridSpec spec,
                                         std::vector<std::uint8_t> active,
                                         const NewtonConfig& cfg)
    : spec_(spec), active_(std::move(active)), cfg_(cfg) {
  if (active_.size() != spec.size())
    throw ShapeError("active set size does not match grid");
  auto impl = std::make_shared<Impl>();
  impl->use_direct = spec.n <= cfg.direct_threshold;
  if (impl->use_direct) {
    const int n = spec.n;
    const double ih2 = 1.0 / (spec.h() * spec.h());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(spec.size() * 5);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int row = i * n + j;
        double diag = 4.0 * ih2;
        if (active_[row]) diag += 1.0;
        trips.emplace_back(row, row, diag);
        if (i > 0) trips.emplace_back(row, row - n, -ih2);
        if (i + 1 < n) trips.emplace_back(row, row + n, -ih2);
        if (j > 0) trips.emplace_back(row, row - 1, -ih2);
        if (j + 1 < n) trips.emplace_back(row, row + 1, -ih2);
      }
    }
    Eigen::SparseMatrix<double> A(spec.size(), spec.size());
    A.setFromTriplets(trips.begin(), trips.end());
    impl->llt.compute(A);
    if (impl->llt.info() != Eigen::Success)
      throw SolveError("sparse Cholesky factorization failed", 0.0, 0);
  }
  impl_ = std::move(impl);
}

GridFunction StateLinearOperator::apply(const GridFunction& v) const {
  if (!(v.spec == spec_)) throw ShapeError("operand grid mismatch");
  const auto& k = kernels::active();
  GridFunction out = zeros(spec_);
  const double h = spec_.h();
  k.laplacian5(v.data(), out.data(), spec_.n, 1.0 / (h * h));
  k.add_masked(active_.data(), v.data(), out.data(), v.size());
  return out;
}

GridFunction StateLinearOperator::solve(const GridFunction& rhs) const {
  if (!(rhs.spec == spec_)) throw ShapeError("rhs grid mismatch");
  if (impl_->use_direct) {
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), rhs.size());
    Eigen::VectorXd x = impl_->llt.solve(b);
    GridFunction out = zeros(spec_);
    Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) = x;
    return out;
  }

  // Conjugate gradients, matrix-free via the stencil kernels.
  const auto& k = kernels::active();
  const std::size_t sz = rhs.size();
  GridFunction x = zeros(spec_);
  GridFunction r = rhs;
  GridFunction p = r;
  GridFunction Ap = zeros(spec_);
  const double rhs_nrm = std::sqrt(k.dot(rhs.data(), rhs.data(), sz));
  if (rhs_nrm == 0.0) return x;
  const double tol_abs = cfg_.cg_tol * rhs_nrm;
  long max_it = cfg_.cg_max_iters > 0
                    ? cfg_.cg_max_iters
                    : 10 * static_cast<long>(sz);
  double rr = k.dot(r.data(), r.data(), sz);
  for (long it = 0; it < max_it; ++it) {
    if (std::sqrt(rr) <= tol_abs) return x;
    Ap = apply(p);
    const double pAp = k.dot(p.data(), Ap.data(), sz);
    const double alpha = rr / pAp;
    k.axpy(alpha, p.data(), x.data(), sz);
    k.axpy(-alpha, Ap.data(), r.data(), sz);
    const double rr_new = k.dot(r.data(), r.data(), sz);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t j = 0; j < sz; ++j) p.values[j] = r.values[j] + beta * p.values[j];
  }
  if (std::sqrt(rr) <= tol_abs) return x;
  throw SolveError("CG failed to reach tolerance", std::sqrt(rr), max_it);
}

double forward_residual_norm(const GridFunction& y, const GridFunction& u) {
  if (!(y.spec == u.spec)) throw ShapeError("state/source grid mismatch");
  return residual_norm_impl(y, u);
}

StateSolution solve_forward(const GridFunction& u, const NewtonConfig& cfg,
                            const StateSolution* warm) {
  const double target = cfg.tol * std::max(1.0, norm(u));

  GridFunction y = warm && warm->y.spec == u.spec ? warm->y : zeros(u.spec);
  std::vector<std::uint8_t> assumed = active_set_of(y);

  std::shared_ptr<const StateLinearOperator> op;
  double res = 0.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (warm && warm->op && warm->op->active() == assumed)
      op = warm->op;
    else if (!op || op->active() != assumed)
      op = std::make_shared<StateLinearOperator>(u.spec, assumed, cfg);

    y = op->solve(u);
    std::vector<std::uint8_t> next = active_set_of(y);
    res = residual_norm_impl(y, u);
    if (next == assumed && res <= target)
      return StateSolution{std::move(y), std::move(next), it, res, cfg, op};
    assumed = std::move(next);
  }
  throw SolveError("active-set iteration exhausted its budget", res,
                   cfg.max_iters);
}

GridFunction fixed_point_oracle(const GridFunction& u, double tol,
                                long budget) {
  // Deliberately self-contained: dense assembly by index arithmetic and a
  // dense Cholesky, so agreement with solve_forward is evidence rather
  // than tautology.
  const int n = u.spec.n;
  const auto sz = static_cast<Eigen::Index>(u.size());
  const double ih2 = 1.0 / (u.spec.h() * u.spec.h());

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(sz, sz);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = i * n + j;
      A(row, row) = 4.0 * ih2;
      if (i > 0) A(row, row - n) = -ih2;
      if (i + 1 < n) A(row, row + n) = -ih2;
      if (j > 0) A(row, row - 1) = -ih2;
      if (j + 1 < n) A(row, row + 1) = -ih2;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw SolveError("oracle factorization failed", 0.0, 0);

  Eigen::Map<const Eigen::VectorXd> uv(u.data(), sz);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(sz);
  Eigen::VectorXd rhs(sz), z(sz), y_next(sz);
  const double alpha = 0.5;
  const double h2 = u.spec.h() * u.spec.h();

  for (long it = 0; it < budget; ++it) {
    for (Eigen::Index j = 0; j < sz; ++j)
      rhs[j] = uv[j] - std::max(y[j], 0.0);
    z = llt.solve(rhs);
    y_next = (1.0 - alpha) * y + alpha * z;
    const double change = std::sqrt(h2 * (y_next - y).squaredNorm());
    y.swap(y_next);
    if (change < tol) {
      GridFunction out = zeros(u.spec);
      Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) = y;
      return out;
    }
  }
  throw SolveError("fixed-point oracle exhausted its budget",
                   std::numeric_limits<double>::quiet_NaN(), budget);
}

namespace {

std::shared_ptr<const StateLinearOperator> operator_for(
    const StateSolution& base) {
  if (base.op && base.op->active() == base.active) return base.op;
  return std::make_shared<StateLinearOperator>(base.y.spec, base.active,
                                               base.cfg);
}

}  // namespace

GridFunction apply_subderivative(const StateSolution& base,
                                 const GridFunction& hdir) {
  return operator_for(base)->solve(hdir);
}

GridFunction apply_subderivative_adjoint(const StateSolution& base,
                                         const GridFunction& w) {
  return apply_subderivative(base, w);
}

}  // namespace sdbli
