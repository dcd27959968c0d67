#include "sdbli/experiment.hpp"

#include <fstream>
#include <sstream>

#include "sdbli/errors.hpp"
#include "sdbli/rng.hpp"

namespace sdbli {

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["grid"] = {{"n", cfg.n}};
  j["system"] = {{"P", cfg.P}, {"scheme", cfg.scheme}};
  j["truth"] = {{"kind", cfg.truth_kind}, {"seed", cfg.truth_seed}};
  j["noise"] = {{"delta_total", cfg.delta_total},
                {"deltas", cfg.deltas},
                {"seed", cfg.noise_seed}};
  j["training"] = {{"N", cfg.training_N},
                   {"kind", cfg.training_kind},
                   {"seed", cfg.training_seed},
                   {"trunc_tol", cfg.trunc_tol},
                   {"include_truth", cfg.include_truth}};
  j["constants"] = {{"samples", cfg.constant_samples},
                    {"seed", cfg.constants_seed},
                    {"sampling_kind", cfg.sampling.kind},
                    {"radius", cfg.sampling.radius},
                    {"fundamental_probe", cfg.sampling.fundamental_probe}};
  j["newton"] = {{"tol", cfg.newton.tol},
                 {"max_iters", cfg.newton.max_iters},
                 {"direct_threshold", cfg.newton.direct_threshold},
                 {"cg_tol", cfg.newton.cg_tol},
                 {"cg_max_iters", cfg.newton.cg_max_iters}};
  j["solver"] = to_json(cfg.solver);
  j["diagnostics"] = {{"R", cfg.mc_R},
                      {"slack", cfg.mono_slack},
                      {"record_period", cfg.record_every},
                      {"sweep_deltas", cfg.sweep_deltas}};
  j["output"] = {{"directory", cfg.out_dir}, {"prefix", cfg.prefix}};
  j["start"] = cfg.start;
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("grid")) cfg.n = get_or(j.at("grid"), "n", cfg.n);
    if (j.contains("system")) {
      const auto& s = j.at("system");
      cfg.P = get_or(s, "P", cfg.P);
      cfg.scheme = get_or<std::string>(s, "scheme", cfg.scheme);
    }
    if (j.contains("truth")) {
      const auto& t = j.at("truth");
      cfg.truth_kind = get_or<std::string>(t, "kind", cfg.truth_kind);
      cfg.truth_seed = get_or<std::uint64_t>(t, "seed", cfg.truth_seed);
    }
    if (j.contains("noise")) {
      const auto& nj = j.at("noise");
      cfg.delta_total = get_or(nj, "delta_total", cfg.delta_total);
      cfg.deltas = get_or<std::vector<double>>(nj, "deltas", cfg.deltas);
      cfg.noise_seed = get_or<std::uint64_t>(nj, "seed", cfg.noise_seed);
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      cfg.training_N = get_or(t, "N", cfg.training_N);
      cfg.training_kind = get_or<std::string>(t, "kind", cfg.training_kind);
      cfg.training_seed = get_or<std::uint64_t>(t, "seed", cfg.training_seed);
      cfg.trunc_tol = get_or(t, "trunc_tol", cfg.trunc_tol);
      cfg.include_truth = get_or(t, "include_truth", cfg.include_truth);
    }
    if (j.contains("constants")) {
      const auto& c = j.at("constants");
      cfg.constant_samples = get_or(c, "samples", cfg.constant_samples);
      cfg.constants_seed = get_or<std::uint64_t>(c, "seed", cfg.constants_seed);
      cfg.sampling.kind = get_or<std::string>(c, "sampling_kind", cfg.sampling.kind);
      cfg.sampling.radius = get_or(c, "radius", cfg.sampling.radius);
      cfg.sampling.fundamental_probe =
          get_or(c, "fundamental_probe", cfg.sampling.fundamental_probe);
    }
    if (j.contains("newton")) {
      const auto& nj = j.at("newton");
      cfg.newton.tol = get_or(nj, "tol", cfg.newton.tol);
      cfg.newton.max_iters = get_or(nj, "max_iters", cfg.newton.max_iters);
      cfg.newton.direct_threshold =
          get_or(nj, "direct_threshold", cfg.newton.direct_threshold);
      cfg.newton.cg_tol = get_or(nj, "cg_tol", cfg.newton.cg_tol);
      cfg.newton.cg_max_iters = get_or(nj, "cg_max_iters", cfg.newton.cg_max_iters);
    }
    if (j.contains("solver")) cfg.solver = solver_config_from_json(j.at("solver"));
    if (j.contains("diagnostics")) {
      const auto& d = j.at("diagnostics");
      cfg.mc_R = get_or(d, "R", cfg.mc_R);
      cfg.mono_slack = get_or(d, "slack", cfg.mono_slack);
      cfg.record_every = get_or(d, "record_period", cfg.record_every);
      cfg.sweep_deltas = get_or<std::vector<double>>(d, "sweep_deltas", cfg.sweep_deltas);
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      cfg.out_dir = get_or<std::string>(o, "directory", cfg.out_dir);
      cfg.prefix = get_or<std::string>(o, "prefix", cfg.prefix);
    }
    cfg.start = get_or<std::string>(j, "start", cfg.start);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  if (cfg.start != "zero" && cfg.start != "truth") {
    throw ConfigError("start must be \"zero\" or \"truth\", got \"" + cfg.start + "\"");
  }
  if (cfg.record_every < 1) throw ConfigError("diagnostics.record_every must be >= 1");
  if (cfg.mc_R < 1) throw ConfigError("diagnostics.R must be >= 1");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

ProblemHandles Problem::handles(const NewtonConfig& newton) const {
  ProblemHandles h;
  h.part = &part;
  h.exact = &exact;
  h.noisy = &noisy;
  h.ops = &ops;
  h.consts = &consts;
  h.newton = newton;
  return h;
}

Problem build_problem(const ExperimentConfig& cfg) {
  Problem p;
  p.spec = make_grid(cfg.n);
  p.part = make_partition(p.spec, cfg.P, cfg.scheme);

  GridFunction u_true = synthesize_truth(p.spec, cfg.truth_kind, cfg.truth_seed);
  p.exact = make_exact_data(u_true, p.part, cfg.newton);

  std::vector<double> deltas = cfg.deltas;
  const bool split_here = deltas.empty();
  if (split_here) {
    deltas = equal_split(cfg.delta_total, cfg.P);
  } else if (static_cast<int>(deltas.size()) != cfg.P) {
    throw ConfigError("noise.deltas has " + std::to_string(deltas.size()) +
                      " entries for P=" + std::to_string(cfg.P));
  }
  p.noisy = add_noise(p.exact, p.part, deltas, cfg.noise_seed);
  // When the split came from a scalar level, keep that level verbatim so
  // the a-priori stop count matches hand computation.
  if (split_here) p.noisy.delta_total = cfg.delta_total;

  const std::string tkind = cfg.training_kind.empty() ? cfg.truth_kind : cfg.training_kind;
  p.training = generate_training(p.part, cfg.training_N, tkind, cfg.training_seed,
                                 cfg.newton);
  if (cfg.include_truth) {
    p.training.inputs.push_back(p.exact.u_true);
    for (int i = 0; i < cfg.P; ++i) {
      p.training.outputs[i].push_back(p.exact.y_parts[i]);
    }
    p.training.N += 1;
  }
  p.ops = build_data_driven(p.part, p.training, cfg.trunc_tol);

  // The sampling ball for constant estimation always covers the zero start,
  // so truth-started runs stay inside the region the constants describe.
  double sigma_c = cfg.solver.sigma;
  if (sigma_c <= 0.0) sigma_c = 2.0 * norm(p.exact.u_true);
  p.consts = estimate_constants(p.part, p.exact, p.noisy, p.ops, cfg.newton,
                                cfg.sampling, sigma_c, cfg.constant_samples,
                                cfg.constants_seed);
  return p;
}

GridFunction start_point(const ExperimentConfig& cfg, const Problem& problem,
                         bool start_at_truth) {
  if (start_at_truth || cfg.start == "truth") return problem.exact.u_true;
  return zeros(problem.spec);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out << content;
  if (!out) throw Error("short write to file: " + path.string());
}

std::vector<std::filesystem::path> write_problem_files(const Problem& problem,
                                                       const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::path dir(cfg.out_dir);
  if (!dir.empty()) fs::create_directories(dir);

  const auto file = [&](const std::string& suffix) {
    return dir / (cfg.prefix + suffix);
  };

  std::vector<fs::path> written;
  const fs::path u_true_path = file("_u_true.csv");
  write_text_file(u_true_path, to_csv(problem.exact.u_true));
  written.push_back(u_true_path);

  const fs::path exact_path = file("_exact.json");
  write_text_file(exact_path,
                  exact_data_to_json(problem.exact, problem.part).dump(2) + "\n");
  written.push_back(exact_path);

  const fs::path noisy_path = file("_noisy.json");
  write_text_file(noisy_path, noisy_data_to_json(problem.noisy).dump(2) + "\n");
  written.push_back(noisy_path);

  const fs::path training_path = file("_training.json");
  write_text_file(training_path, training_to_json(problem.training).dump(2) + "\n");
  written.push_back(training_path);

  nlohmann::json manifest;
  manifest["config"] = to_json(cfg);
  manifest["files"] = {{"u_true", u_true_path.filename().string()},
                       {"exact", exact_path.filename().string()},
                       {"noisy", noisy_path.filename().string()},
                       {"training", training_path.filename().string()}};
  manifest["seeds"] = {{"truth", cfg.truth_seed},
                       {"noise", cfg.noise_seed},
                       {"training", cfg.training_seed},
                       {"constants", cfg.constants_seed},
                       {"solver", cfg.solver.seed}};
  const fs::path manifest_path = file("_manifest.json");
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  written.push_back(manifest_path);
  return written;
}

Problem load_problem(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / (cfg.prefix + "_manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + manifest_path.string() + " is not valid JSON: " +
                      e.what());
  }
  if (!manifest.contains("files")) {
    throw ConfigError("manifest " + manifest_path.string() + " has no files table");
  }
  const auto& files = manifest.at("files");
  const auto path_of = [&](const char* key) {
    if (!files.contains(key)) {
      throw ConfigError(std::string("manifest files table is missing \"") + key + "\"");
    }
    return dir / files.at(key).get<std::string>();
  };

  Problem p;
  p.spec = make_grid(cfg.n);
  p.part = make_partition(p.spec, cfg.P, cfg.scheme);

  GridFunction u_true = from_csv(read_text_file(path_of("u_true")));
  if (!(u_true.spec == p.spec)) {
    throw ShapeError("stored truth field does not match the configured grid");
  }

  nlohmann::json exact_j, noisy_j, training_j;
  try {
    exact_j = nlohmann::json::parse(read_text_file(path_of("exact")));
    noisy_j = nlohmann::json::parse(read_text_file(path_of("noisy")));
    training_j = nlohmann::json::parse(read_text_file(path_of("training")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("stored data file is not valid JSON: ") + e.what());
  }
  p.exact = exact_data_from_json(exact_j, p.part);
  p.exact.u_true = u_true;
  p.noisy = noisy_data_from_json(noisy_j, p.part);
  p.training = training_from_json(training_j);
  if (!p.training.inputs.empty() && !(p.training.inputs.front().spec == p.spec)) {
    throw ShapeError("stored training set does not match the configured grid");
  }

  p.ops = build_data_driven(p.part, p.training, cfg.trunc_tol);

  double sigma_c = cfg.solver.sigma;
  if (sigma_c <= 0.0) sigma_c = 2.0 * norm(p.exact.u_true);
  p.consts = estimate_constants(p.part, p.exact, p.noisy, p.ops, cfg.newton,
                                cfg.sampling, sigma_c, cfg.constant_samples,
                                cfg.constants_seed);
  return p;
}

}  // namespace sdbli
