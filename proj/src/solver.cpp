#include "sdbli/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdbli/kernels.hpp"

namespace sdbli {

namespace {
constexpr double kLambdaFloor = 1e-15;  // weights below this count as zero
}

void validate(const SolverConfig& cfg) {
  if (!(cfg.omega_bar > 0.0)) throw ConfigError("omega_bar must be positive");
  if (!(cfg.tau >= 1.0)) throw ConfigError("tau must be at least 1");
  if (cfg.c_lambda < 0.0) throw ConfigError("c_lambda must be non-negative");
  if (!(cfg.lambda_max > 0.0)) throw ConfigError("lambda_max must be positive");
  if (!(cfg.theta > 0.0 && cfg.theta < 2.0))
    throw ConfigError("theta must lie in (0, 2)");
  if (!(cfg.K0 > 0.0)) throw ConfigError("K0 must be positive");
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (cfg.freeze_check_period < 0)
    throw ConfigError("freeze_check_period must be non-negative");
  const double lo = resolved_omega_min(cfg);
  const double hi = resolved_omega_max(cfg);
  if (!(lo > 0.0) || lo > cfg.omega_bar || cfg.omega_bar > hi)
    throw ConfigError("need 0 < omega_min <= omega_bar <= omega_max");
  if (cfg.sigma < 0.0) throw ConfigError("sigma must be non-negative");
}

double resolved_omega_min(const SolverConfig& cfg) {
  return cfg.omega_min > 0.0 ? cfg.omega_min : cfg.omega_bar;
}

double resolved_omega_max(const SolverConfig& cfg) {
  return cfg.omega_max > 0.0 ? cfg.omega_max : cfg.omega_bar;
}

nlohmann::json to_json(const SolverConfig& cfg) {
  return nlohmann::json{
      {"omega_bar", cfg.omega_bar},
      {"omega_min", cfg.omega_min},
      {"omega_max", cfg.omega_max},
      {"tau", cfg.tau},
      {"c_lambda", cfg.c_lambda},
      {"lambda_max", cfg.lambda_max},
      {"lambda_mode", cfg.lambda_mode == LambdaMode::fast ? "fast" : "strict"},
      {"sigma", cfg.sigma},
      {"theta", cfg.theta},
      {"K0", cfg.K0},
      {"seed", cfg.seed},
      {"max_iters", cfg.max_iters},
      {"freeze_check_period", cfg.freeze_check_period}};
}

SolverConfig solver_config_from_json(const nlohmann::json& j) {
  SolverConfig cfg;
  cfg.omega_bar = j.at("omega_bar").get<double>();
  cfg.omega_min = j.value("omega_min", 0.0);
  cfg.omega_max = j.value("omega_max", 0.0);
  cfg.tau = j.at("tau").get<double>();
  cfg.c_lambda = j.at("c_lambda").get<double>();
  cfg.lambda_max = j.at("lambda_max").get<double>();
  const std::string mode = j.value("lambda_mode", "fast");
  if (mode == "fast")
    cfg.lambda_mode = LambdaMode::fast;
  else if (mode == "strict")
    cfg.lambda_mode = LambdaMode::strict;
  else
    throw ConfigError("lambda_mode must be 'fast' or 'strict'");
  cfg.sigma = j.value("sigma", 0.0);
  cfg.theta = j.at("theta").get<double>();
  cfg.K0 = j.at("K0").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.max_iters = j.at("max_iters").get<long>();
  cfg.freeze_check_period = j.value("freeze_check_period", 0);
  return cfg;
}

int sample_index(Rng& rng, int P) {
  if (P < 1) throw ConfigError("sample_index needs P >= 1");
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(P)));
}

double step_size(double residual, double delta_i, const SolverConfig& cfg) {
  return residual > cfg.tau * delta_i ? cfg.omega_bar : 0.0;
}

double lambda_schedule(const PerEquationResiduals& residuals, int i_k,
                       const SolverConfig& cfg, double lambda_cap) {
  if (i_k < 0 || static_cast<std::size_t>(i_k) >= residuals.norms.size())
    throw ContractError("lambda_schedule: equation index out of range");
  if (cfg.c_lambda == 0.0) return 0.0;
  double budget;
  if (cfg.lambda_mode == LambdaMode::strict) {
    double min_r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < residuals.norms.size(); ++i) {
      if (!residuals.known[i])
        throw ContractError(
            "strict lambda schedule requires every equation residual");
      min_r = std::min(min_r, residuals.norms[i]);
    }
    budget = cfg.c_lambda * min_r * min_r;
  } else {
    if (!residuals.known[i_k])
      throw ContractError("lambda schedule: sampled residual not computed");
    const double r = residuals.norms[i_k];
    budget = cfg.c_lambda * r * r;
  }
  return std::min(lambda_cap, budget);
}

std::optional<long> a_priori_stop(double delta_total, const SolverConfig& cfg) {
  if (delta_total <= 0.0) return std::nullopt;
  const double k = std::ceil(cfg.K0 * std::pow(delta_total, -cfg.theta));
  if (!(k > 0.0)) return 1;
  if (k >= 9e18) return std::numeric_limits<long>::max();
  return static_cast<long>(k);
}

AdmissibilityReport check_admissibility(const EstimatedConstants& consts,
                                        const SolverConfig& cfg) {
  validate(cfg);
  const double omega_lo = resolved_omega_min(cfg);
  const double omega_hi = resolved_omega_max(cfg);
  const double sigma = cfg.sigma > 0.0 ? cfg.sigma : consts.sigma;

  AdmissibilityReport r;
  r.sigma = sigma;
  r.drift = omega_lo * (1.0 - consts.L_F * consts.L_F * omega_hi - consts.mu_hat);
  r.data_term = 2.0 * sigma * consts.L_M * consts.C_M_delta * cfg.c_lambda;
  r.noise_term = (1.0 + consts.mu_hat) * omega_hi / cfg.tau;
  r.gate_condition =
      consts.mu_valid && r.drift >= r.data_term + r.noise_term;
  r.summability_condition = consts.mu_valid && r.drift > r.data_term;
  r.c_tilde_f = 2.0 * (r.drift - r.data_term);
  return r;
}

nlohmann::json to_json(const AdmissibilityReport& r) {
  return nlohmann::json{{"drift", r.drift},
                        {"data_term", r.data_term},
                        {"noise_term", r.noise_term},
                        {"gate_condition", r.gate_condition},
                        {"summability_condition", r.summability_condition},
                        {"c_tilde_f", r.c_tilde_f},
                        {"sigma", r.sigma}};
}

void validate(const ProblemHandles& handles) {
  if (!handles.part) throw ContractError("problem handles: missing partition");
  if (!handles.noisy) throw ContractError("problem handles: missing observations");
  if (!handles.ops) throw ContractError("problem handles: missing operators");
  if (static_cast<int>(handles.ops->size()) != handles.part->P)
    throw ShapeError("operator count does not match partition");
  if (static_cast<int>(handles.noisy->deltas.size()) != handles.part->P)
    throw ShapeError("noise level count does not match partition");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::budget: return "budget";
    case StopReason::a_priori: return "a_priori";
    case StopReason::frozen: return "frozen";
  }
  return "unknown";
}

namespace {

std::vector<double> residual_norms(const StateSolution& st,
                                   const ProblemHandles& handles) {
  const auto& part = *handles.part;
  const auto& noisy = *handles.noisy;
  std::vector<double> out(part.P);
  const double h2 = part.spec.h() * part.spec.h();
  for (int i = 0; i < part.P; ++i) {
    const auto& ids = part.parts[i];
    const auto& obs = noisy.y_parts[i];
    double s = 0.0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const double d = st.y.values[ids[j]] - obs[j];
      s += d * d;
    }
    out[i] = std::sqrt(h2 * s);
  }
  return out;
}

double effective_lambda_cap(const SolverConfig& cfg,
                            const EstimatedConstants* consts, double sigma) {
  double cap = cfg.lambda_max;
  if (consts && sigma > 0.0 && consts->L_M > 0.0 && consts->C_M_delta > 0.0)
    cap = std::min(cap, sigma / (consts->L_M * consts->C_M_delta));
  return cap;
}

double err_to_truth_or_nan(const GridFunction& u, const ProblemHandles& handles) {
  if (!handles.exact) return std::numeric_limits<double>::quiet_NaN();
  return norm(sub(u, handles.exact->u_true));
}

// The update at u given its solved state; shared by the public one-step
// API and the run loop (which feeds warm states and reuses `st`).
GridFunction apply_update(const GridFunction& u, const StateSolution& st,
                          long k, int i_k, const ProblemHandles& handles,
                          const SolverConfig& cfg, double sigma,
                          double lambda_cap,
                          const std::vector<double>& all_res,
                          StepRecord& rec) {
  const auto& part = *handles.part;
  const auto& noisy = *handles.noisy;

  rec.k = k;
  rec.i = i_k;
  rec.all_residuals = all_res;
  rec.residual = all_res[i_k];
  rec.err_to_truth = err_to_truth_or_nan(u, handles);
  rec.ball_exit = sigma > 0.0 && !std::isnan(rec.err_to_truth) &&
                  rec.err_to_truth > sigma;

  rec.omega = step_size(rec.residual, noisy.deltas[i_k], cfg);
  rec.lambda = lambda_schedule(PerEquationResiduals::all(all_res), i_k, cfg,
                               lambda_cap);

  GridFunction u_next = u;
  const bool use_omega = rec.omega != 0.0;
  const bool use_lambda = rec.lambda >= kLambdaFloor;
  if (!use_omega && !use_lambda) return u_next;

  GridFunction g = zeros(part.spec);
  if (use_omega) {
    const auto& ids = part.parts[i_k];
    const auto& obs = noisy.y_parts[i_k];
    std::vector<double> diff(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j)
      diff[j] = st.y.values[ids[j]] - obs[j];
    g = apply_G_i_adjoint(st, part, i_k, diff);
  }

  GridFunction m = zeros(part.spec);
  if (use_lambda) {
    const auto& op = (*handles.ops)[i_k];
    auto mb = apply_M(op, u);
    const auto& obs = noisy.y_parts[i_k];
    for (std::size_t j = 0; j < mb.size(); ++j) mb[j] -= obs[j];
    m = apply_M_adjoint(op, mb, part.spec);
  }

  kernels::active().update2(u_next.data(), rec.omega, g.data(),
                            use_lambda ? rec.lambda : 0.0, m.data(),
                            u_next.size());
  return u_next;
}

}  // namespace

std::pair<GridFunction, StepRecord> sdbli_step(const GridFunction& u, long k,
                                               int i_k,
                                               const ProblemHandles& handles,
                                               const SolverConfig& cfg) {
  validate(handles);
  validate(cfg);
  if (i_k < 0 || i_k >= handles.part->P)
    throw ContractError("sdbli_step: equation index out of range");
  const StateSolution st = solve_forward(u, handles.newton);
  const auto all_res = residual_norms(st, handles);
  const double cap = effective_lambda_cap(cfg, handles.consts, cfg.sigma);
  StepRecord rec;
  GridFunction u_next = apply_update(u, st, k, i_k, handles, cfg, cfg.sigma,
                                     cap, all_res, rec);
  return {std::move(u_next), std::move(rec)};
}

IterationTrace run_sdbli(const GridFunction& u0, const ProblemHandles& handles,
                         const SolverConfig& cfg) {
  validate(handles);
  validate(cfg);
  const auto& part = *handles.part;
  if (!(u0.spec == part.spec)) throw ShapeError("start iterate grid mismatch");

  double sigma = cfg.sigma;
  if (sigma <= 0.0 && handles.exact)
    sigma = 2.0 * norm(sub(u0, handles.exact->u_true));
  const double lambda_cap = effective_lambda_cap(cfg, handles.consts, sigma);

  const double delta_total = handles.noisy->delta_total;
  long budget = cfg.max_iters;
  StopReason tail_reason = StopReason::budget;
  if (const auto k_delta = a_priori_stop(delta_total, cfg)) {
    if (*k_delta <= cfg.max_iters) {
      budget = *k_delta;
      tail_reason = StopReason::a_priori;
    }
  }

  const int period =
      cfg.freeze_check_period > 0 ? cfg.freeze_check_period : 2 * part.P;

  IterationTrace trace;
  trace.sigma_used = sigma;
  trace.lambda_cap_used = lambda_cap;
  trace.delta_total = delta_total;
  trace.records.reserve(static_cast<std::size_t>(std::min<long>(budget, 1 << 20)));

  Rng rng(cfg.seed);
  GridFunction u = u0;
  StateSolution prev_state;
  bool have_state = false;
  StopReason reason = tail_reason;
  long k = 0;

  for (; k < budget; ++k) {
    StateSolution st =
        solve_forward(u, handles.newton, have_state ? &prev_state : nullptr);
    const auto all_res = residual_norms(st, handles);

    if (k > 0 && period > 0 && k % period == 0) {
      bool gates_closed = true;
      double max_res = 0.0;
      for (int i = 0; i < part.P; ++i) {
        if (all_res[i] > cfg.tau * handles.noisy->deltas[i]) {
          gates_closed = false;
          break;
        }
        max_res = std::max(max_res, all_res[i]);
      }
      if (gates_closed) {
        const double lambda_possible =
            std::min(lambda_cap, cfg.c_lambda * max_res * max_res);
        if (cfg.lambda_mode == LambdaMode::strict ||
            lambda_possible < kLambdaFloor) {
          reason = StopReason::frozen;
          prev_state = std::move(st);
          have_state = true;
          break;
        }
      }
    }

    const int i_k = sample_index(rng, part.P);
    StepRecord rec;
    u = apply_update(u, st, k, i_k, handles, cfg, sigma, lambda_cap, all_res,
                     rec);
    trace.records.push_back(std::move(rec));
    prev_state = std::move(st);
    have_state = true;
  }

  trace.stop_reason = reason;
  trace.k_stop = static_cast<long>(trace.records.size());
  const StateSolution terminal =
      solve_forward(u, handles.newton, have_state ? &prev_state : nullptr);
  trace.terminal_residuals = residual_norms(terminal, handles);
  trace.terminal_err = err_to_truth_or_nan(u, handles);
  trace.final_u = std::move(u);
  return trace;
}

std::string trace_to_csv(const IterationTrace& trace) {
  std::string out = "k,i_k,residual,omega_k,lambda_k,err_to_truth,ball_exit\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.k);
    out += ',';
    out += std::to_string(r.i);
    out += ',';
    out += format_double(r.residual);
    out += ',';
    out += format_double(r.omega);
    out += ',';
    out += format_double(r.lambda);
    out += ',';
    if (!std::isnan(r.err_to_truth)) out += format_double(r.err_to_truth);
    out += ',';
    out += r.ball_exit ? '1' : '0';
    out += '\n';
  }
  return out;
}

nlohmann::json trace_sidecar(const IterationTrace& trace,
                             const ProblemHandles& handles,
                             const SolverConfig& cfg) {
  nlohmann::json j{{"stop_reason", to_string(trace.stop_reason)},
                   {"k_stop", trace.k_stop},
                   {"sigma", trace.sigma_used},
                   {"lambda_cap", trace.lambda_cap_used},
                   {"delta_total", trace.delta_total},
                   {"terminal_residuals", trace.terminal_residuals},
                   {"kernels", kernels::active_name()},
                   {"config", to_json(cfg)}};
  if (!std::isnan(trace.terminal_err)) j["terminal_err"] = trace.terminal_err;
  if (handles.consts) {
    j["constants"] = to_json(*handles.consts);
    SolverConfig echo = cfg;
    if (echo.sigma <= 0.0) echo.sigma = trace.sigma_used;
    j["admissibility"] = to_json(check_admissibility(*handles.consts, echo));
  }
  return j;
}

}  // namespace sdbli
