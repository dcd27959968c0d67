#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdbli/diagnostics.hpp"
#include "sdbli/solver.hpp"

namespace sdbli {

// Declarative description of a full experiment; serializes losslessly to
// and from JSON so a run is reproducible from its config file alone.
struct ExperimentConfig {
  int n = 8;
  int P = 1;
  std::string scheme = "stripes";

  std::string truth_kind = "gaussian_bumps";
  std::uint64_t truth_seed = 1;

  std::vector<double> deltas;  // per part; empty -> equal split of delta_total
  double delta_total = 0.0;
  std::uint64_t noise_seed = 2;

  int training_N = 10;
  std::string training_kind;  // empty -> truth_kind
  std::uint64_t training_seed = 3;
  double trunc_tol = 1e-12;
  bool include_truth = false;  // append (u_true, y_parts) to the training set

  SamplingSpec sampling;
  int constant_samples = 16;
  std::uint64_t constants_seed = 4;

  NewtonConfig newton;
  SolverConfig solver;

  int mc_R = 8;
  double mono_slack = 1e-3;
  int record_every = 1;
  std::vector<double> sweep_deltas;  // optional noise sweep, largest first

  std::string out_dir = ".";
  std::string prefix = "exp";
  std::string start = "zero";  // or "truth"
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully materialized problem instance: data, learned operators, constants.
struct Problem {
  GridSpec spec;
  ObservationPartition part;
  ExactData exact;
  NoisyData noisy;
  TrainingSet training;
  std::vector<DataDrivenOperator> ops;
  EstimatedConstants consts;

  // Pointers into this object; keep it alive while they are in use.
  ProblemHandles handles(const NewtonConfig& newton) const;
};

// Deterministic generate pipeline: truth, exact data, noise, training,
// operators, constants.
Problem build_problem(const ExperimentConfig& cfg);

GridFunction start_point(const ExperimentConfig& cfg, const Problem& problem,
                         bool start_at_truth);

// Writes <prefix>_u_true.csv, _exact.json, _noisy.json, _training.json and
// _manifest.json into cfg.out_dir; returns the five paths (manifest last).
std::vector<std::filesystem::path> write_problem_files(const Problem& problem,
                                                       const ExperimentConfig& cfg);

// Reads the files named by the manifest in `dir` and rebuilds operators
// and constants.  Missing files raise MissingInputError; payloads that
// disagree with cfg's grid or partition raise ShapeError.
Problem load_problem(const ExperimentConfig& cfg,
                     const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace sdbli
