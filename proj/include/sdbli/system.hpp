#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdbli/forward.hpp"
#include "sdbli/grid.hpp"

namespace sdbli {

struct DataDrivenOperator;  // surrogate.hpp

// Disjoint, exhaustive split of the grid nodes into P observation regions.
// "stripes": contiguous row bands.  "blocks": sqrt(P) x sqrt(P) tiles
// (P must then be a perfect square).  Node order inside a part is
// ascending row-major index, so compact block vectors have a canonical
// layout.
struct ObservationPartition {
  GridSpec spec;
  int P = 0;
  std::string scheme;
  std::vector<std::vector<int>> parts;  // parts[i] = sorted node indices

  std::size_t part_size(int i) const { return parts.at(i).size(); }
};

ObservationPartition make_partition(GridSpec spec, int P,
                                    const std::string& scheme);

// Full-grid 0/1 mask of part i.
std::vector<std::uint8_t> part_mask(const ObservationPartition& part, int i);

// Restriction R_i: gather the masked nodes into a compact block.
std::vector<double> restrict_to(const ObservationPartition& part, int i,
                                const GridFunction& u);

// Zero extension R_i^*: scatter a compact block back onto the grid.  With
// the same h^2 weight on grid and block, this is the exact adjoint of
// restrict_to.
GridFunction extend_from(const ObservationPartition& part, int i,
                         const std::vector<double>& block);

// Ground truth source, exact states, and exact per-part observations.
struct ExactData {
  GridFunction u_true;
  GridFunction y_full;
  std::vector<std::vector<double>> y_parts;  // compact, per part
};

ExactData make_exact_data(const GridFunction& u_true,
                          const ObservationPartition& part,
                          const NewtonConfig& cfg);

// Noisy observations with per-part noise levels calibrated so that
// |y_i^delta - y_i| equals delta_i in the weighted norm (noise vectors are
// drawn per part and rescaled; delta_i = 0 copies the exact block
// verbatim).
struct NoisyData {
  std::vector<std::vector<double>> y_parts;
  std::vector<double> deltas;
  double delta_total = 0.0;
  std::uint64_t seed = 0;
};

NoisyData add_noise(const ExactData& exact, const ObservationPartition& part,
                    const std::vector<double>& deltas, std::uint64_t seed);

// Equal-energy split: delta_i = delta_total / sqrt(P).
std::vector<double> equal_split(double delta_total, int P);

// Smooth synthetic sources, rescaled to a fixed norm of 10 so that the
// standard noise levels 1e-1..1e-3 span roughly 30% down to 0.2% of the
// observation scale.
GridFunction synthesize_truth(GridSpec spec, const std::string& kind,
                              std::uint64_t seed);

// Forward map through part i: restrict(solve_forward(u).y, i).
std::vector<double> apply_F_i(const GridFunction& u,
                              const ObservationPartition& part, int i,
                              const NewtonConfig& cfg);

// Adjoint of the masked subderivative: G_i(u)^* w = G(u)(R_i^* w), using
// the symmetric linearized solve at `base`.
GridFunction apply_G_i_adjoint(const StateSolution& base,
                               const ObservationPartition& part, int i,
                               const std::vector<double>& w_block);

// Empirical problem constants.  All are best-effort maxima/minima over a
// finite, seeded sample and are monotone under sample inclusion: adding
// samples never lowers L_F, mu_hat, or C_M_delta (C_N_hat never rises).
struct EstimatedConstants {
  double L_F = 0.0;       // sup |G(u) h| / |h|
  double L_M = 0.0;       // max_i operator norm of M_i
  double mu_hat = 0.0;    // tangential-cone ratio estimate
  double C_M_delta = 0.0; // max_i sup |M_i u - y_i^delta| over the ball
  double C_N_hat = 0.0;   // min_i |M_i u_true - y_i|
  double sigma = 0.0;     // ball radius the sample covered
  int n_samples = 0;
  std::uint64_t seed = 0;
  bool mu_valid = false;  // mu_hat < 1
};

// How sample points and directions are drawn for estimate_constants.
struct SamplingSpec {
  std::string kind = "random_fourier";  // perturbation field family
  double radius = 0.0;                  // ball radius; 0 -> sigma argument
  // Include the fundamental Laplacian eigenmode among the probe
  // directions; random smooth fields under-resolve the top of the spectrum
  // and would understate L_F without it.
  bool fundamental_probe = true;
};

EstimatedConstants estimate_constants(
    const ObservationPartition& part, const ExactData& exact,
    const NoisyData& noisy, const std::vector<DataDrivenOperator>& ops,
    const NewtonConfig& newton, const SamplingSpec& sampling, double sigma,
    int n_samples, std::uint64_t seed);

nlohmann::json to_json(const EstimatedConstants& c);
EstimatedConstants constants_from_json(const nlohmann::json& j);

nlohmann::json exact_data_to_json(const ExactData& d,
                                  const ObservationPartition& part);
ExactData exact_data_from_json(const nlohmann::json& j,
                               const ObservationPartition& part);

nlohmann::json noisy_data_to_json(const NoisyData& d);
NoisyData noisy_data_from_json(const nlohmann::json& j,
                               const ObservationPartition& part);

}  // namespace sdbli
