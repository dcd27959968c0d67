#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdbli/system.hpp"

namespace sdbli {

// Paired sources and per-part observations used to fit the learned
// observation operators.
struct TrainingSet {
  int N = 0;
  std::uint64_t seed = 0;
  std::string kind;
  std::vector<GridFunction> inputs;                     // N sources
  std::vector<std::vector<std::vector<double>>> outputs;  // [part][l] block
};

TrainingSet generate_training(const ObservationPartition& part, int N,
                              const std::string& kind, std::uint64_t seed,
                              const NewtonConfig& cfg);

// Learned linear stand-in for the part-i observation map, fitted as the
// minimum-norm least-squares solution of  M * inputs = outputs  through a
// truncated SVD of the input matrix.  Stores the dense row-major matrix,
// the input singular values, and the retained rank for provenance.
struct DataDrivenOperator {
  int part = 0;
  std::size_t rows = 0;  // block size of part i
  std::size_t cols = 0;  // n^2
  std::vector<double> M;                 // row-major rows x cols
  std::vector<double> singular_values;   // of the input matrix
  int rank_used = 0;
  double trunc_tol = 0.0;
  double op_norm = 0.0;  // largest singular value of M itself
};

// Fit one operator per part.  Singular values sigma_j of the input matrix
// with sigma_j <= trunc_tol * sigma_max are dropped from the
// pseudoinverse.  Degenerate training data (empty, or shape-inconsistent)
// raises TrainingError.
std::vector<DataDrivenOperator> build_data_driven(
    const ObservationPartition& part, const TrainingSet& training,
    double trunc_tol = 1e-12);

// M_i u: compact block on part i.
std::vector<double> apply_M(const DataDrivenOperator& op,
                            const GridFunction& u);

// M_i^T w: with the same h^2 weight on both spaces, the weighted adjoint
// reduces to the plain transpose.
GridFunction apply_M_adjoint(const DataDrivenOperator& op,
                             const std::vector<double>& w_block,
                             GridSpec spec);

nlohmann::json operator_to_json(const DataDrivenOperator& op);
DataDrivenOperator operator_from_json(const nlohmann::json& j);

nlohmann::json training_to_json(const TrainingSet& t);
TrainingSet training_from_json(const nlohmann::json& j);

}  // namespace sdbli
