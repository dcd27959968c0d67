#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sdbli/grid.hpp"

namespace sdbli {

// Controls for the semilinear forward solver and its inner linear solves.
struct NewtonConfig {
  double tol = 1e-12;        // residual tolerance, relative to max(1, |u|)
  int max_iters = 100;       // active-set iterations before giving up
  int direct_threshold = 64; // n <= threshold: sparse Cholesky, else CG
  double cg_tol = 1e-13;     // CG relative residual
  long cg_max_iters = 0;     // 0: 10 * n^2
};

// Solver for (-Lap_h + D_A) at a frozen active set A.  Holds the sparse
// factorization (or the CG configuration) and can be shared read-only
// across threads.
class StateLinearOperator {
 public:
  StateLinearOperator(GridSpec spec, std::vector<std::uint8_t> active,
                      const NewtonConfig& cfg);

  GridFunction solve(const GridFunction& rhs) const;
  GridFunction apply(const GridFunction& v) const;
  const std::vector<std::uint8_t>& active() const { return active_; }
  GridSpec spec() const { return spec_; }

 private:
  struct Impl;
  GridSpec spec_;
  std::vector<std::uint8_t> active_;
  NewtonConfig cfg_;
  std::shared_ptr<const Impl> impl_;
};

// Converged state of -Lap y + max(y, 0) = u with Dirichlet boundary.
// `active` marks nodes with y > 0 (ties at zero count as inactive).  `op`
// caches the linear solver for the final active set so subderivative
// applications reuse the factorization; it is redundant with `active` and
// is rebuilt on demand when absent (e.g. after deserialization).
struct StateSolution {
  GridFunction y;
  std::vector<std::uint8_t> active;
  int newton_iters = 0;
  double residual_norm = 0.0;
  NewtonConfig cfg;
  std::shared_ptr<const StateLinearOperator> op;
};

// Semismooth Newton (primal active set) solve of the forward problem.
// Each sweep solves (-Lap_h + D_A) y = u for the current guess's active
// set and terminates once the set repeats and the residual satisfies
// |‑Lap y + y⁺ − u| <= tol * max(1, |u|).  `warm` seeds the initial guess
// and, when its active set matches, donates its factorization.
StateSolution solve_forward(const GridFunction& u, const NewtonConfig& cfg,
                            const StateSolution* warm = nullptr);

// Independent reference solver: damped Picard iteration
// y <- (1-alpha) y + alpha * InvLap(u - y⁺) with alpha = 0.5 on a densely
// assembled Laplacian.  Shares no code with solve_forward on purpose.
GridFunction fixed_point_oracle(const GridFunction& u, double tol = 1e-12,
                                long budget = 1000000);

// Bouligand subderivative action: v solves (-Lap_h + D_A) v = hdir with A
// the active set of `base`.
GridFunction apply_subderivative(const StateSolution& base,
                                 const GridFunction& hdir);

// The system matrix is symmetric, so the adjoint action coincides with the
// forward action; kept as a named entry point because callers reason in
// terms of adjoints.
GridFunction apply_subderivative_adjoint(const StateSolution& base,
                                         const GridFunction& w);

// Residual of the semilinear equation at y for data u (weighted norm).
double forward_residual_norm(const GridFunction& y, const GridFunction& u);

}  // namespace sdbli
