#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdbli/rng.hpp"
#include "sdbli/surrogate.hpp"
#include "sdbli/system.hpp"

namespace sdbli {

// How the per-step weight of the learned-operator correction is capped.
// "fast" checks the sampled equation only; "strict" enforces the cap
// against every equation's residual (and therefore needs all of them).
enum class LambdaMode { fast, strict };

struct SolverConfig {
  double omega_bar = 1.0;   // step size used whenever the gate is open
  double omega_min = 0.0;   // admissibility band; 0 -> omega_bar
  double omega_max = 0.0;   // admissibility band; 0 -> omega_bar
  double tau = 1.5;         // discrepancy gate factor, >= 1
  double c_lambda = 0.0;    // residual-squared coefficient of lambda_k
  double lambda_max = 1.0;  // hard cap on lambda_k
  LambdaMode lambda_mode = LambdaMode::fast;
  double sigma = 0.0;       // trust ball radius; 0 -> 2 |u0 - u_true|
  double theta = 1.0;       // a-priori stop exponent, in (0, 2)
  double K0 = 1.0;          // a-priori stop scale
  std::uint64_t seed = 0;
  long max_iters = 1000;
  int freeze_check_period = 0;  // 0 -> 2 P
};

void validate(const SolverConfig& cfg);

double resolved_omega_min(const SolverConfig& cfg);
double resolved_omega_max(const SolverConfig& cfg);

nlohmann::json to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const nlohmann::json& j);

// Residual norms per equation; `known` marks which were actually computed.
struct PerEquationResiduals {
  std::vector<double> norms;
  std::vector<std::uint8_t> known;

  static PerEquationResiduals all(std::vector<double> r) {
    PerEquationResiduals out;
    out.known.assign(r.size(), 1);
    out.norms = std::move(r);
    return out;
  }
};

// Uniform draw over {0, ..., P-1}.
int sample_index(Rng& rng, int P);

// Discrepancy gate: omega_bar while the sampled residual exceeds
// tau * delta_i, zero afterwards.
double step_size(double residual, double delta_i, const SolverConfig& cfg);

// lambda_k = min(cap, c_lambda * residual^2), with the residual taken from
// equation i_k (fast) or the smallest equation residual (strict).  Strict
// mode without a complete residual vector is a contract violation.
double lambda_schedule(const PerEquationResiduals& residuals, int i_k,
                       const SolverConfig& cfg, double lambda_cap);

// ceil(K0 * delta_total^-theta); empty when delta_total is zero (the rule
// only applies to noisy data).
std::optional<long> a_priori_stop(double delta_total, const SolverConfig& cfg);

// Step-size admissibility against the estimated constants.  `drift` is
// omega_min (1 - L_F^2 omega_max - mu); the gate condition requires it to
// dominate data_term + noise_term, and the summability constant
// c_tilde_f = 2 (drift - data_term) must be positive for the residual-sum
// bound to apply.
struct AdmissibilityReport {
  double drift = 0.0;
  double data_term = 0.0;   // 2 sigma L_M C_M_delta c_lambda
  double noise_term = 0.0;  // (1 + mu) omega_max / tau
  bool gate_condition = false;
  bool summability_condition = false;
  double c_tilde_f = 0.0;
  double sigma = 0.0;
};

AdmissibilityReport check_admissibility(const EstimatedConstants& consts,
                                        const SolverConfig& cfg);
nlohmann::json to_json(const AdmissibilityReport& r);

// Everything a step needs to see, owned elsewhere.  `exact` may be null
// when the truth is withheld (error-to-truth then records as NaN);
// `consts` may be null, in which case the lambda cap is cfg.lambda_max.
struct ProblemHandles {
  const ObservationPartition* part = nullptr;
  const ExactData* exact = nullptr;
  const NoisyData* noisy = nullptr;
  const std::vector<DataDrivenOperator>* ops = nullptr;
  const EstimatedConstants* consts = nullptr;
  NewtonConfig newton;
};

void validate(const ProblemHandles& handles);

struct StepRecord {
  long k = 0;
  int i = 0;
  double residual = 0.0;  // sampled equation, before the update
  double omega = 0.0;
  double lambda = 0.0;
  double err_to_truth = 0.0;  // NaN when the truth is withheld
  bool ball_exit = false;
  std::vector<double> all_residuals;  // per equation, before the update
};

enum class StopReason { budget, a_priori, frozen };
std::string to_string(StopReason r);

struct IterationTrace {
  std::vector<StepRecord> records;
  StopReason stop_reason = StopReason::budget;
  long k_stop = 0;
  GridFunction final_u;
  std::vector<double> terminal_residuals;  // per equation, at final_u
  double terminal_err = 0.0;               // NaN when truth withheld
  double sigma_used = 0.0;
  double lambda_cap_used = 0.0;
  double delta_total = 0.0;
};

// One iteration u -> u - omega_k G_i^*(F_i(u) - y_i^d)
//                     - lambda_k M_i^T(M_i u - y_i^d).
// Pure given its arguments; uses cfg.sigma verbatim for the ball flag
// (run_sdbli resolves the default radius before stepping).
std::pair<GridFunction, StepRecord> sdbli_step(const GridFunction& u, long k,
                                               int i_k,
                                               const ProblemHandles& handles,
                                               const SolverConfig& cfg);

// Full gated run from u0: samples one equation per step, stops at the
// budget, at the a-priori count for noisy data, or frozen once a periodic
// check finds every gate closed and the lambda weight negligible
// (strict mode freezes on closed gates alone).
IterationTrace run_sdbli(const GridFunction& u0, const ProblemHandles& handles,
                         const SolverConfig& cfg);

// Plot-ready CSV: header k,i_k,residual,omega_k,lambda_k,err_to_truth,
// ball_exit; the error column is empty when the truth was withheld.
std::string trace_to_csv(const IterationTrace& trace);

// Sidecar with the config echo, constants echo, admissibility report,
// stop reason, and seeds.
nlohmann::json trace_sidecar(const IterationTrace& trace,
                             const ProblemHandles& handles,
                             const SolverConfig& cfg);

}  // namespace sdbli
