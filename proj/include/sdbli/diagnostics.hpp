#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdbli/solver.hpp"

namespace sdbli {

// Replication-averaged run statistics on a fixed iteration grid `ks`
// (every record_every-th step plus the terminal step).  Replications that
// freeze early are stationary afterwards and are extended with their
// terminal values so every replication contributes to every grid point.
struct McSummary {
  std::vector<long> ks;
  std::vector<double> mean_sq_err;      // E |u_k - u_true|^2
  std::vector<double> stderr_err;
  std::vector<double> mean_sq_residual; // E |F(u_k) - y^delta|^2, all parts
  std::vector<double> stderr_residual;
  // Cumulative mean full squared residual, summed from step 1 up to and
  // including ks[j] (every step contributes, not only recorded ones).
  std::vector<double> partial_sums;
  std::vector<double> per_rep_terminal_sq_err;
  std::vector<std::uint64_t> rep_seeds;
  int R = 0;
  long k_target = 0;
  int frozen_reps = 0;

  double initial_mean_sq_err() const { return mean_sq_err.front(); }
  double terminal_mean_sq_err() const { return mean_sq_err.back(); }
  double terminal_stderr() const { return stderr_err.back(); }
};

// Runs R independent replications of run_sdbli from u0, with replication
// r seeded by derive_seed(cfg.seed, r) (so growing R extends the seed
// sequence without disturbing earlier replications).  Replications run on
// up to SDBLI_THREADS worker threads (default: machine parallelism); the
// aggregation is a deterministic fold in replication order regardless of
// scheduling.  `on_trace`, when set, sees every replication's full trace
// (invocation order follows thread completion, so it must not care).
McSummary monte_carlo(
    const GridFunction& u0, const ProblemHandles& handles,
    const SolverConfig& cfg, int R, int record_every = 1,
    const std::function<void(int, const IterationTrace&)>& on_trace = {});

// Expected-error monotonicity along the recorded grid: flags j where
// mean_sq_err[j+1] > mean_sq_err[j] * (1 + slack) + 3 * combined stderr.
struct MonotonicityReport {
  std::vector<long> violations;  // ks[j] of each violating pair
  long pairs_checked = 0;
  double max_excess = 0.0;  // worst (lhs - allowed) over all pairs
  double slack = 0.0;
  bool pass = false;
};

MonotonicityReport check_monotonicity(const McSummary& s, double slack = 1e-3);

// Residual summability: partial_sums[j] <= |u0 - u_true|^2 / c_tilde_f for
// every recorded j, with c_tilde_f from the admissibility report.  Not
// applicable when c_tilde_f <= 0.
struct SummabilityReport {
  bool applicable = false;
  double c_tilde_f = 0.0;
  double bound = 0.0;
  double max_partial_sum = 0.0;
  double max_ratio = 0.0;  // max partial_sum / bound
  bool holds = false;
};

SummabilityReport check_summability(const McSummary& s,
                                    const EstimatedConstants& consts,
                                    const SolverConfig& cfg,
                                    const GridFunction& u0,
                                    const GridFunction& u_true);

// One noise level of a sweep.
struct SweepRow {
  double delta_total = 0.0;
  long k_delta = 0;  // a-priori count ceil(K0 delta^-theta), uncapped
  double terminal_mean_sq_err = 0.0;
  double stderr_terminal = 0.0;
  int frozen_reps = 0;
};

struct NoiseSweepReport {
  std::vector<SweepRow> rows;  // in the order the levels were given
  // Scanning rows in order (levels given largest first), terminal error
  // never rises by more than 3 combined stderr.
  bool non_increasing = false;
};

// Re-noises the exact data at each level (equal split across parts,
// per-level derived noise seeds), re-estimates the noise-dependent
// constants, and runs a Monte Carlo per level.  cfg.max_iters caps every
// level; cfg.seed seeds the per-level replication streams.
NoiseSweepReport noise_sweep(
    const GridFunction& u0, const ObservationPartition& part,
    const ExactData& exact, const std::vector<DataDrivenOperator>& ops,
    const NewtonConfig& newton, const SamplingSpec& sampling,
    int constant_samples, std::uint64_t constants_seed,
    const SolverConfig& cfg, const std::vector<double>& deltas, int R,
    std::uint64_t noise_seed,
    const std::function<void(int, const IterationTrace&)>& on_trace = {});

nlohmann::json to_json(const MonotonicityReport& r);
nlohmann::json to_json(const SummabilityReport& r);
nlohmann::json to_json(const NoiseSweepReport& r);

// Plot-ready CSV: k,mean_sq_err,stderr_err,mean_sq_residual,
// stderr_residual,partial_sum.
std::string mc_to_csv(const McSummary& s);

// Plot-ready CSV: delta,k_delta,terminal_mean_sq_err,stderr.
std::string sweep_to_csv(const NoiseSweepReport& r);

// Worker-thread cap from SDBLI_THREADS (default: hardware concurrency).
int thread_cap();

}  // namespace sdbli
