#include "sdbli/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "sdbli/kernels.hpp"
#include "sdbli/rng.hpp"

namespace sdbli {

TrainingSet generate_training(const ObservationPartition& part, int N,
                              const std::string& kind, std::uint64_t seed,
                              const NewtonConfig& cfg) {
  if (N < 1) throw TrainingError("training set needs N >= 1");
  TrainingSet t;
  t.N = N;
  t.seed = seed;
  t.kind = kind;
  t.inputs.reserve(N);
  t.outputs.assign(part.P, {});
  for (auto& per_part : t.outputs) per_part.reserve(N);

  for (int l = 0; l < N; ++l) {
    GridFunction u = synthesize_truth(part.spec, kind, derive_seed(seed, l));
    const GridFunction y = solve_forward(u, cfg).y;
    for (int i = 0; i < part.P; ++i)
      t.outputs[i].push_back(restrict_to(part, i, y));
    t.inputs.push_back(std::move(u));
  }
  return t;
}

std::vector<DataDrivenOperator> build_data_driven(
    const ObservationPartition& part, const TrainingSet& training,
    double trunc_tol) {
  const int N = training.N;
  if (N < 1 || training.inputs.empty())
    throw TrainingError("cannot fit operators from an empty training set");
  if (static_cast<int>(training.inputs.size()) != N ||
      static_cast<int>(training.outputs.size()) != part.P)
    throw TrainingError("training set shape is inconsistent");
  if (trunc_tol < 0.0) throw ConfigError("trunc_tol must be non-negative");

  const auto cols = part.spec.size();
  Eigen::MatrixXd V(cols, N);
  for (int l = 0; l < N; ++l) {
    const auto& u = training.inputs[l];
    if (!(u.spec == part.spec))
      throw TrainingError("training input " + std::to_string(l) +
                          " lives on the wrong grid");
    V.col(l) = Eigen::Map<const Eigen::VectorXd>(u.data(), cols);
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (!(smax > 0.0))
    throw TrainingError("training inputs are all null; operators undefined");
  int rank = 0;
  while (rank < sv.size() && sv(rank) > trunc_tol * smax) ++rank;
  if (rank == 0)
    throw TrainingError("truncation removed every singular value");

  const Eigen::MatrixXd Ur = svd.matrixU().leftCols(rank);   // cols x r
  const Eigen::MatrixXd Wr = svd.matrixV().leftCols(rank);   // N x r
  const Eigen::VectorXd inv_s = sv.head(rank).cwiseInverse();

  std::vector<DataDrivenOperator> ops;
  ops.reserve(part.P);
  for (int i = 0; i < part.P; ++i) {
    const auto m = part.part_size(i);
    if (training.outputs[i].size() != static_cast<std::size_t>(N))
      throw TrainingError("training outputs for part " + std::to_string(i) +
                          " are incomplete");
    Eigen::MatrixXd Y(m, N);
    for (int l = 0; l < N; ++l) {
      const auto& block = training.outputs[i][l];
      if (block.size() != m)
        throw TrainingError("training output block has the wrong size");
      Y.col(l) = Eigen::Map<const Eigen::VectorXd>(block.data(), m);
    }

    // M = Y * pinv(V) = (Y W_r S_r^-1) U_r^T.  The left factor C also
    // carries M's singular values, because U_r^T has orthonormal rows:
    // M M^T = C C^T.
    const Eigen::MatrixXd C = (Y * Wr) * inv_s.asDiagonal();
    const Eigen::MatrixXd M = C * Ur.transpose();

    DataDrivenOperator op;
    op.part = i;
    op.rows = m;
    op.cols = cols;
    op.rank_used = rank;
    op.trunc_tol = trunc_tol;
    op.singular_values.assign(sv.data(), sv.data() + sv.size());
    op.M.resize(m * cols);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>(op.M.data(), m, cols) = M;
    op.op_norm =
        Eigen::JacobiSVD<Eigen::MatrixXd>(C).singularValues().maxCoeff();
    ops.push_back(std::move(op));
  }
  return ops;
}

std::vector<double> apply_M(const DataDrivenOperator& op,
                            const GridFunction& u) {
  if (u.size() != op.cols)
    throw ShapeError("operator expects " + std::to_string(op.cols) +
                     " source values, got " + std::to_string(u.size()));
  std::vector<double> out(op.rows);
  kernels::active().matvec(op.M.data(), op.rows, op.cols, u.data(), out.data());
  return out;
}

GridFunction apply_M_adjoint(const DataDrivenOperator& op,
                             const std::vector<double>& w_block,
                             GridSpec spec) {
  if (w_block.size() != op.rows)
    throw ShapeError("adjoint operand has the wrong block size");
  if (spec.size() != op.cols)
    throw ShapeError("adjoint output grid does not match the operator");
  GridFunction out = zeros(spec);
  kernels::active().matvec_t(op.M.data(), op.rows, op.cols, w_block.data(),
                             out.data());
  return out;
}

nlohmann::json operator_to_json(const DataDrivenOperator& op) {
  return nlohmann::json{{"part", op.part},
                        {"rows", op.rows},
                        {"cols", op.cols},
                        {"matrix", op.M},
                        {"singular_values", op.singular_values},
                        {"rank_used", op.rank_used},
                        {"trunc_tol", op.trunc_tol},
                        {"op_norm", op.op_norm}};
}

DataDrivenOperator operator_from_json(const nlohmann::json& j) {
  DataDrivenOperator op;
  op.part = j.at("part").get<int>();
  op.rows = j.at("rows").get<std::size_t>();
  op.cols = j.at("cols").get<std::size_t>();
  op.M = j.at("matrix").get<std::vector<double>>();
  op.singular_values = j.at("singular_values").get<std::vector<double>>();
  op.rank_used = j.at("rank_used").get<int>();
  op.trunc_tol = j.at("trunc_tol").get<double>();
  op.op_norm = j.at("op_norm").get<double>();
  if (op.M.size() != op.rows * op.cols)
    throw ShapeError("operator matrix payload has the wrong size");
  return op;
}

nlohmann::json training_to_json(const TrainingSet& t) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& u : t.inputs) inputs.push_back(to_json(u));
  return nlohmann::json{{"N", t.N},
                        {"seed", t.seed},
                        {"kind", t.kind},
                        {"inputs", inputs},
                        {"outputs", t.outputs}};
}

TrainingSet training_from_json(const nlohmann::json& j) {
  TrainingSet t;
  t.N = j.at("N").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.kind = j.at("kind").get<std::string>();
  for (const auto& e : j.at("inputs")) t.inputs.push_back(grid_function_from_json(e));
  t.outputs =
      j.at("outputs").get<std::vector<std::vector<std::vector<double>>>>();
  if (static_cast<int>(t.inputs.size()) != t.N)
    throw TrainingError("training payload is inconsistent");
  return t;
}

}  // namespace sdbli
