// Command-line driver: generate problem data, run single solves or
// Monte Carlo studies, and self-check the module invariants.
//
// Exit codes: 0 success, 1 failed checks or invariant violations,
// 2 configuration errors, 3 missing input files, 4 solver non-convergence.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdbli/diagnostics.hpp"
#include "sdbli/errors.hpp"
#include "sdbli/experiment.hpp"
#include "sdbli/kernels.hpp"
#include "sdbli/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  bool start_at_truth = false;
  bool have_seed = false;
  std::uint64_t seed = 0;
};

sdbli::ExperimentConfig load_effective_config(const CommonArgs& args) {
  sdbli::ExperimentConfig cfg = sdbli::load_config(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.have_seed) cfg.solver.seed = args.seed;
  return cfg;
}

sdbli::Problem materialize(const sdbli::ExperimentConfig& cfg,
                           const CommonArgs& args) {
  if (!args.data_dir.empty()) return sdbli::load_problem(cfg, args.data_dir);
  return sdbli::build_problem(cfg);
}

fs::path out_file(const sdbli::ExperimentConfig& cfg, const std::string& suffix) {
  fs::path dir(cfg.out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  return dir / (cfg.prefix + suffix);
}

int cmd_generate(const CommonArgs& args) {
  const sdbli::ExperimentConfig cfg = load_effective_config(args);
  const sdbli::Problem problem = sdbli::build_problem(cfg);
  const auto written = sdbli::write_problem_files(problem, cfg);
  for (const auto& path : written) std::cout << path.string() << "\n";
  return 0;
}

int cmd_solve(const CommonArgs& args) {
  const sdbli::ExperimentConfig cfg = load_effective_config(args);
  const sdbli::Problem problem = materialize(cfg, args);
  const sdbli::ProblemHandles handles = problem.handles(cfg.newton);
  const sdbli::GridFunction u0 =
      sdbli::start_point(cfg, problem, args.start_at_truth);

  const sdbli::IterationTrace trace = sdbli::run_sdbli(u0, handles, cfg.solver);

  sdbli::write_text_file(out_file(cfg, "_trace.csv"), sdbli::trace_to_csv(trace));
  sdbli::write_text_file(out_file(cfg, "_trace.json"),
                         sdbli::trace_sidecar(trace, handles, cfg.solver).dump(2) +
                             "\n");

  std::cout << "stop_reason=" << sdbli::to_string(trace.stop_reason)
            << " k_stop=" << trace.k_stop
            << " terminal_err=" << sdbli::format_double(trace.terminal_err)
            << " kernels=" << sdbli::kernels::active_name() << "\n";
  return 0;
}

int cmd_mc(const CommonArgs& args) {
  const sdbli::ExperimentConfig cfg = load_effective_config(args);
  const sdbli::Problem problem = materialize(cfg, args);
  const sdbli::ProblemHandles handles = problem.handles(cfg.newton);
  const sdbli::GridFunction u0 =
      sdbli::start_point(cfg, problem, args.start_at_truth);

  const sdbli::McSummary mc =
      sdbli::monte_carlo(u0, handles, cfg.solver, cfg.mc_R, cfg.record_every);
  const sdbli::MonotonicityReport mono =
      sdbli::check_monotonicity(mc, cfg.mono_slack);
  const sdbli::SummabilityReport summ = sdbli::check_summability(
      mc, problem.consts, cfg.solver, u0, problem.exact.u_true);

  sdbli::write_text_file(out_file(cfg, "_mc.csv"), sdbli::mc_to_csv(mc));

  json report;
  report["R"] = mc.R;
  report["k_target"] = mc.k_target;
  report["frozen_reps"] = mc.frozen_reps;
  report["initial_mean_sq_err"] = mc.initial_mean_sq_err();
  report["terminal_mean_sq_err"] = mc.terminal_mean_sq_err();
  report["terminal_stderr"] = mc.terminal_stderr();
  report["monotonicity"] = sdbli::to_json(mono);
  report["summability"] = sdbli::to_json(summ);
  report["kernels"] = sdbli::kernels::active_name();

  // The summability bound is an exact-data statement; with noise the
  // residual floor makes the series grow past it by design.
  const bool exact_data = problem.noisy.delta_total == 0.0;
  bool pass = mono.pass && (!exact_data || !summ.applicable || summ.holds);

  if (!cfg.sweep_deltas.empty()) {
    const sdbli::NoiseSweepReport sweep = sdbli::noise_sweep(
        u0, problem.part, problem.exact, problem.ops, cfg.newton, cfg.sampling,
        cfg.constant_samples, cfg.constants_seed, cfg.solver, cfg.sweep_deltas,
        cfg.mc_R, cfg.noise_seed);
    sdbli::write_text_file(out_file(cfg, "_sweep.csv"), sdbli::sweep_to_csv(sweep));
    sdbli::write_text_file(out_file(cfg, "_sweep.json"),
                           sdbli::to_json(sweep).dump(2) + "\n");
    report["sweep_non_increasing"] = sweep.non_increasing;
    pass = pass && sweep.non_increasing;
  }

  report["pass"] = pass;
  sdbli::write_text_file(out_file(cfg, "_mc.json"), report.dump(2) + "\n");

  std::cout << "R=" << mc.R << " k_target=" << mc.k_target << " terminal_mean_sq_err="
            << sdbli::format_double(mc.terminal_mean_sq_err())
            << " pass=" << (pass ? "true" : "false") << "\n";
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Built-in invariant checks on synthetic instances.

struct SuiteResult {
  std::string name;
  bool pass = true;
  double max_err = 0.0;
  double tol = 0.0;
};

void account(SuiteResult& suite, double err) {
  if (err > suite.max_err) suite.max_err = err;
  if (!(err <= suite.tol)) suite.pass = false;
}

sdbli::GridFunction random_field(sdbli::GridSpec spec, sdbli::Rng& rng,
                                 double scale = 1.0) {
  sdbli::GridFunction u = sdbli::zeros(spec);
  for (auto& v : u.values) v = scale * rng.normal();
  return u;
}

SuiteResult check_partition_reassembly() {
  SuiteResult suite{"partition_reassembly", true, 0.0, 0.0};
  sdbli::Rng rng(0xC0FFEE01);
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    struct Case {
      const char* scheme;
      int P;
    };
    const std::vector<Case> cases = {{"stripes", 1}, {"stripes", 2}, {"stripes", n},
                                     {"blocks", 1}, {"blocks", 4}};
    for (const auto& c : cases) {
      const auto part = sdbli::make_partition(spec, c.P, c.scheme);
      const sdbli::GridFunction u = random_field(spec, rng);
      sdbli::GridFunction sum = sdbli::zeros(spec);
      for (int i = 0; i < part.P; ++i) {
        const auto block = sdbli::restrict_to(part, i, u);
        sdbli::axpy_inplace(1.0, sdbli::extend_from(part, i, block), sum);
      }
      for (std::size_t j = 0; j < u.size(); ++j) {
        account(suite, std::fabs(sum.values[j] - u.values[j]));
      }
    }
  }
  return suite;
}

SuiteResult check_laplacian_symmetry() {
  SuiteResult suite{"laplacian_symmetry", true, 0.0, 1e-12};
  sdbli::Rng rng(0xC0FFEE02);
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    for (int rep = 0; rep < 4; ++rep) {
      const sdbli::GridFunction a = random_field(spec, rng);
      const sdbli::GridFunction b = random_field(spec, rng);
      const double lhs = sdbli::inner(sdbli::apply_laplacian(a), b);
      const double rhs = sdbli::inner(a, sdbli::apply_laplacian(b));
      const double scale = std::max(1.0, std::max(std::fabs(lhs), std::fabs(rhs)));
      account(suite, std::fabs(lhs - rhs) / scale);
    }
  }
  return suite;
}

SuiteResult check_forward_oracle() {
  SuiteResult suite{"forward_oracle", true, 0.0, 1e-8};
  sdbli::Rng rng(0xC0FFEE03);
  const sdbli::NewtonConfig newton;
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    for (int rep = 0; rep < 3; ++rep) {
      const sdbli::GridFunction u = random_field(spec, rng, 5.0);
      const sdbli::StateSolution sol = sdbli::solve_forward(u, newton);
      const sdbli::GridFunction ref = sdbli::fixed_point_oracle(u);
      account(suite, sdbli::norm(sdbli::sub(sol.y, ref)));
    }
  }
  return suite;
}

SuiteResult check_subderivative_adjoint(bool break_adjoint) {
  SuiteResult suite{"subderivative_adjoint", true, 0.0, 1e-10};
  sdbli::Rng rng(0xC0FFEE04);
  const sdbli::NewtonConfig newton;
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    for (int rep = 0; rep < 4; ++rep) {
      const sdbli::GridFunction u = random_field(spec, rng, 5.0);
      const sdbli::StateSolution sol = sdbli::solve_forward(u, newton);
      const sdbli::GridFunction h = random_field(spec, rng);
      const sdbli::GridFunction w = random_field(spec, rng);
      double lhs = sdbli::inner(sdbli::apply_subderivative(sol, h), w);
      const double rhs = sdbli::inner(h, sdbli::apply_subderivative_adjoint(sol, w));
      if (break_adjoint) lhs = -lhs;
      const double scale =
          std::max(1.0, sdbli::norm(h) * sdbli::norm(w));
      account(suite, std::fabs(lhs - rhs) / scale);
    }
  }
  return suite;
}

SuiteResult check_data_operator_adjoint() {
  SuiteResult suite{"data_operator_adjoint", true, 0.0, 1e-10};
  sdbli::Rng rng(0xC0FFEE05);
  const sdbli::NewtonConfig newton;
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    const auto part = sdbli::make_partition(spec, 2, "stripes");
    const auto training = sdbli::generate_training(part, 6, "random_fourier",
                                                   0xC0FFEE06, newton);
    const auto ops = sdbli::build_data_driven(part, training);
    const double h2 = spec.h() * spec.h();
    for (int i = 0; i < part.P; ++i) {
      const sdbli::GridFunction u = random_field(spec, rng);
      std::vector<double> w(part.part_size(i));
      for (auto& v : w) v = rng.normal();
      const auto mu = sdbli::apply_M(ops[i], u);
      double lhs = 0.0;
      for (std::size_t r = 0; r < w.size(); ++r) lhs += mu[r] * w[r];
      lhs *= h2;
      const double rhs = sdbli::inner(u, sdbli::apply_M_adjoint(ops[i], w, spec));
      const double scale = std::max(1.0, std::fabs(lhs));
      account(suite, std::fabs(lhs - rhs) / scale);
    }
  }
  return suite;
}

SuiteResult check_noise_calibration() {
  SuiteResult suite{"noise_calibration", true, 0.0, 1e-12};
  const sdbli::NewtonConfig newton;
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    const auto part = sdbli::make_partition(spec, 2, "stripes");
    const auto u_true = sdbli::synthesize_truth(spec, "gaussian_bumps", 0xC0FFEE07);
    const auto exact = sdbli::make_exact_data(u_true, part, newton);
    const std::vector<double> deltas = {0.05, 0.001};
    const auto noisy = sdbli::add_noise(exact, part, deltas, 0xC0FFEE08);
    for (int i = 0; i < part.P; ++i) {
      std::vector<double> diff(noisy.y_parts[i]);
      for (std::size_t r = 0; r < diff.size(); ++r) diff[r] -= exact.y_parts[i][r];
      const double got = sdbli::block_norm(spec, diff);
      account(suite, std::fabs(got - deltas[i]) / deltas[i]);
    }
  }
  return suite;
}

SuiteResult check_serialization_roundtrip() {
  SuiteResult suite{"serialization_roundtrip", true, 0.0, 0.0};
  sdbli::Rng rng(0xC0FFEE09);
  for (int n : {3, 8}) {
    const sdbli::GridSpec spec = sdbli::make_grid(n);
    const sdbli::GridFunction u = random_field(spec, rng, 3.0);
    const sdbli::GridFunction via_csv = sdbli::from_csv(sdbli::to_csv(u));
    const sdbli::GridFunction via_json =
        sdbli::grid_function_from_json(sdbli::to_json(u));
    for (std::size_t j = 0; j < u.size(); ++j) {
      account(suite, u.values[j] == via_csv.values[j] ? 0.0 : 1.0);
      account(suite, u.values[j] == via_json.values[j] ? 0.0 : 1.0);
    }
  }
  return suite;
}

int cmd_check(bool break_adjoint, const std::string& out_dir) {
  std::vector<SuiteResult> suites;
  suites.push_back(check_partition_reassembly());
  suites.push_back(check_laplacian_symmetry());
  suites.push_back(check_forward_oracle());
  suites.push_back(check_subderivative_adjoint(break_adjoint));
  suites.push_back(check_data_operator_adjoint());
  suites.push_back(check_noise_calibration());
  suites.push_back(check_serialization_roundtrip());

  json report;
  report["kernels"] = sdbli::kernels::active_name();
  report["break_adjoint"] = break_adjoint;
  bool all_pass = true;
  std::vector<std::string> failed;
  for (const auto& s : suites) {
    report["suites"].push_back({{"name", s.name},
                                {"pass", s.pass},
                                {"max_err", s.max_err},
                                {"tol", s.tol}});
    if (!s.pass) {
      all_pass = false;
      failed.push_back(s.name);
    }
  }
  report["pass"] = all_pass;
  report["failed"] = failed;

  std::cout << report.dump(2) << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    sdbli::write_text_file(fs::path(out_dir) / "checks.json", report.dump(2) + "\n");
  }
  if (!all_pass) {
    for (const auto& name : failed) std::cerr << "check failed: " << name << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic data-blended Bouligand-Landweber iteration driver"};
  app.require_subcommand(1);

  CommonArgs gen_args, solve_args, mc_args;
  bool break_adjoint = false;
  std::string check_out;

  auto add_common = [](CLI::App* sub, CommonArgs& args, bool with_data) {
    sub->add_option("--config", args.config_path, "experiment config JSON")
        ->required();
    sub->add_option("--out", args.out_dir, "output directory override");
    if (with_data) {
      sub->add_option("--data", args.data_dir,
                      "directory with generated problem files");
      sub->add_flag("--start-at-truth", args.start_at_truth,
                    "start the iteration at the exact source");
      auto* seed_opt = sub->add_option("--seed", args.seed, "solver seed override");
      seed_opt->each([&args](const std::string&) { args.have_seed = true; });
    }
  };

  add_common(app.add_subcommand("generate", "synthesize and write problem data"),
             gen_args, false);
  add_common(app.add_subcommand("solve", "run one gated iteration trace"),
             solve_args, true);
  add_common(app.add_subcommand("mc", "replication study with invariant checks"),
             mc_args, true);
  auto* check = app.add_subcommand("check", "run built-in module invariant checks");
  check->add_flag("--break-adjoint", break_adjoint,
                  "deliberately break the adjoint identity (harness test)");
  check->add_option("--out", check_out, "also write checks.json here");
  std::string check_config;
  check->add_option("--config", check_config,
                    "optional config to validate before checking");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("generate")) return cmd_generate(gen_args);
    if (app.got_subcommand("solve")) return cmd_solve(solve_args);
    if (app.got_subcommand("mc")) return cmd_mc(mc_args);
    if (app.got_subcommand("check")) {
      if (!check_config.empty()) sdbli::load_config(check_config);
      return cmd_check(break_adjoint, check_out);
    }
  } catch (const sdbli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sdbli::MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const sdbli::SolveError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
