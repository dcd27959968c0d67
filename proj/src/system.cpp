#include "sdbli/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdbli/kernels.hpp"
#include "sdbli/rng.hpp"
#include "sdbli/surrogate.hpp"

namespace sdbli {

ObservationPartition make_partition(GridSpec spec, int P,
                                    const std::string& scheme) {
  if (P < 1) throw ConfigError("partition needs P >= 1, got " + std::to_string(P));
  ObservationPartition part;
  part.spec = spec;
  part.P = P;
  part.scheme = scheme;
  part.parts.assign(P, {});
  const int n = spec.n;

  if (scheme == "stripes") {
    if (P > n)
      throw ConfigError("stripes partition needs P <= n (" + std::to_string(P) +
                        " > " + std::to_string(n) + ")");
    for (int i = 0; i < P; ++i) {
      const int r0 = static_cast<int>(static_cast<long>(i) * n / P);
      const int r1 = static_cast<int>(static_cast<long>(i + 1) * n / P);
      for (int r = r0; r < r1; ++r)
        for (int c = 0; c < n; ++c) part.parts[i].push_back(r * n + c);
    }
  } else if (scheme == "blocks") {
    const int q = static_cast<int>(std::llround(std::sqrt(static_cast<double>(P))));
    if (q * q != P)
      throw ConfigError("blocks partition needs a square P, got " +
                        std::to_string(P));
    if (q > n)
      throw ConfigError("blocks partition needs sqrt(P) <= n");
    for (int bi = 0; bi < q; ++bi) {
      const int r0 = static_cast<int>(static_cast<long>(bi) * n / q);
      const int r1 = static_cast<int>(static_cast<long>(bi + 1) * n / q);
      for (int bj = 0; bj < q; ++bj) {
        const int c0 = static_cast<int>(static_cast<long>(bj) * n / q);
        const int c1 = static_cast<int>(static_cast<long>(bj + 1) * n / q);
        auto& dst = part.parts[bi * q + bj];
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) dst.push_back(r * n + c);
      }
    }
  } else {
    throw ConfigError("unknown partition scheme '" + scheme + "'");
  }
  return part;
}

std::vector<std::uint8_t> part_mask(const ObservationPartition& part, int i) {
  std::vector<std::uint8_t> mask(part.spec.size(), 0);
  for (int idx : part.parts.at(i)) mask[idx] = 1;
  return mask;
}

std::vector<double> restrict_to(const ObservationPartition& part, int i,
                                const GridFunction& u) {
  if (!(u.spec == part.spec)) throw ShapeError("restriction grid mismatch");
  const auto& ids = part.parts.at(i);
  std::vector<double> block(ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) block[j] = u.values[ids[j]];
  return block;
}

GridFunction extend_from(const ObservationPartition& part, int i,
                         const std::vector<double>& block) {
  const auto& ids = part.parts.at(i);
  if (block.size() != ids.size())
    throw ShapeError("block size does not match part " + std::to_string(i));
  GridFunction out = zeros(part.spec);
  for (std::size_t j = 0; j < ids.size(); ++j) out.values[ids[j]] = block[j];
  return out;
}

ExactData make_exact_data(const GridFunction& u_true,
                          const ObservationPartition& part,
                          const NewtonConfig& cfg) {
  if (!(u_true.spec == part.spec)) throw ShapeError("truth grid mismatch");
  ExactData d;
  d.u_true = u_true;
  d.y_full = solve_forward(u_true, cfg).y;
  d.y_parts.reserve(part.P);
  for (int i = 0; i < part.P; ++i)
    d.y_parts.push_back(restrict_to(part, i, d.y_full));
  return d;
}

std::vector<double> equal_split(double delta_total, int P) {
  if (delta_total < 0.0) throw ConfigError("negative noise level");
  return std::vector<double>(P, delta_total / std::sqrt(static_cast<double>(P)));
}

NoisyData add_noise(const ExactData& exact, const ObservationPartition& part,
                    const std::vector<double>& deltas, std::uint64_t seed) {
  if (static_cast<int>(deltas.size()) != part.P)
    throw ShapeError("need one noise level per part");
  NoisyData out;
  out.deltas = deltas;
  out.seed = seed;
  out.y_parts.resize(part.P);
  double total_sq = 0.0;
  Rng root(seed);
  for (int i = 0; i < part.P; ++i) {
    if (deltas[i] < 0.0) throw ConfigError("negative noise level");
    total_sq += deltas[i] * deltas[i];
    const auto& clean = exact.y_parts.at(i);
    if (deltas[i] == 0.0) {
      out.y_parts[i] = clean;
      continue;
    }
    Rng rng = root.derive(i);
    std::vector<double> e(clean.size());
    double nrm = 0.0;
    do {
      for (auto& v : e) v = rng.normal();
      nrm = block_norm(part.spec, e);
    } while (nrm == 0.0);
    const double scale = deltas[i] / nrm;
    out.y_parts[i].resize(clean.size());
    for (std::size_t j = 0; j < clean.size(); ++j)
      out.y_parts[i][j] = clean[j] + scale * e[j];
  }
  out.delta_total = std::sqrt(total_sq);
  return out;
}

namespace {

GridFunction raw_field(GridSpec spec, const std::string& kind, Rng& rng) {
  GridFunction u = zeros(spec);
  if (kind == "gaussian_bumps") {
    const int nb = 3 + static_cast<int>(rng.below(3));
    for (int b = 0; b < nb; ++b) {
      const double cx = rng.uniform(0.15, 0.85);
      const double cy = rng.uniform(0.15, 0.85);
      const double w = rng.uniform(0.05, 0.25);
      const double amp = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
      const double inv2w2 = 1.0 / (2.0 * w * w);
      for (int i = 0; i < spec.n; ++i) {
        const double y = node_y(spec, i);
        for (int j = 0; j < spec.n; ++j) {
          const double x = node_x(spec, j);
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          u.values[static_cast<std::size_t>(i) * spec.n + j] +=
              amp * std::exp(-d2 * inv2w2);
        }
      }
    }
  } else if (kind == "random_fourier") {
    constexpr int kmax = 5;
    double coef[kmax][kmax];
    for (int a = 0; a < kmax; ++a)
      for (int b = 0; b < kmax; ++b)
        coef[a][b] = rng.normal() / ((a + 1) * (a + 1) + (b + 1) * (b + 1));
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < spec.n; ++i) {
      const double y = node_y(spec, i);
      for (int j = 0; j < spec.n; ++j) {
        const double x = node_x(spec, j);
        double s = 0.0;
        for (int a = 0; a < kmax; ++a)
          for (int b = 0; b < kmax; ++b)
            s += coef[a][b] * std::sin((a + 1) * pi * x) * std::sin((b + 1) * pi * y);
        u.values[static_cast<std::size_t>(i) * spec.n + j] = s;
      }
    }
  } else {
    throw ConfigError("unknown source kind '" + kind + "'");
  }
  return u;
}

GridFunction unit_field(GridSpec spec, const std::string& kind, Rng& rng) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    GridFunction u = raw_field(spec, kind, rng);
    const double nrm = norm(u);
    if (nrm > 1e-14) {
      kernels::active().scal(1.0 / nrm, u.data(), u.size());
      return u;
    }
  }
  throw SolveError("field generator produced only null fields", 0.0, 16);
}

}  // namespace

GridFunction synthesize_truth(GridSpec spec, const std::string& kind,
                              std::uint64_t seed) {
  Rng rng(seed);
  GridFunction u = unit_field(spec, kind, rng);
  kernels::active().scal(10.0, u.data(), u.size());
  return u;
}

std::vector<double> apply_F_i(const GridFunction& u,
                              const ObservationPartition& part, int i,
                              const NewtonConfig& cfg) {
  return restrict_to(part, i, solve_forward(u, cfg).y);
}

GridFunction apply_G_i_adjoint(const StateSolution& base,
                               const ObservationPartition& part, int i,
                               const std::vector<double>& w_block) {
  return apply_subderivative_adjoint(base, extend_from(part, i, w_block));
}

namespace {

double block_norm_diff(GridSpec spec, const std::vector<double>& a,
                       const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return spec.h() * spec.h() * s;  // squared
}

// Fundamental Dirichlet eigenmode sin(pi x) sin(pi y), unit norm.
GridFunction fundamental_mode(GridSpec spec) {
  constexpr double pi = 3.14159265358979323846;
  GridFunction u = zeros(spec);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j)
      u.values[static_cast<std::size_t>(i) * spec.n + j] =
          std::sin(pi * node_x(spec, j)) * std::sin(pi * node_y(spec, i));
  const double nrm = norm(u);
  kernels::active().scal(1.0 / nrm, u.data(), u.size());
  return u;
}

// Low-discrepancy radius fraction for sample t; depends on t only so a
// longer sample run extends a shorter one without disturbing it.
double radius_fraction(int t) {
  constexpr double golden = 0.6180339887498949;
  const double f = std::fmod((t + 1) * golden, 1.0);
  return 0.1 + 0.9 * f;
}

}  // namespace

EstimatedConstants estimate_constants(
    const ObservationPartition& part, const ExactData& exact,
    const NoisyData& noisy, const std::vector<DataDrivenOperator>& ops,
    const NewtonConfig& newton, const SamplingSpec& sampling, double sigma,
    int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("estimate_constants needs n_samples >= 1");
  if (static_cast<int>(ops.size()) != part.P)
    throw ShapeError("need one learned operator per part");
  const double radius = sampling.radius > 0.0 ? sampling.radius : sigma;
  if (radius <= 0.0)
    throw ConfigError("constants estimation needs a positive ball radius");

  EstimatedConstants c;
  c.sigma = radius;
  c.n_samples = n_samples;
  c.seed = seed;

  for (const auto& op : ops) c.L_M = std::max(c.L_M, op.op_norm);

  c.C_N_hat = std::numeric_limits<double>::infinity();
  for (int i = 0; i < part.P; ++i) {
    const auto b = apply_M(ops[i], exact.u_true);
    c.C_N_hat = std::min(
        c.C_N_hat, std::sqrt(block_norm_diff(part.spec, b, exact.y_parts[i])));
  }

  auto c_m_candidate = [&](const GridFunction& u) {
    for (int i = 0; i < part.P; ++i) {
      const auto b = apply_M(ops[i], u);
      c.C_M_delta = std::max(
          c.C_M_delta, std::sqrt(block_norm_diff(part.spec, b, noisy.y_parts[i])));
    }
  };

  const StateSolution truth_state = solve_forward(exact.u_true, newton);

  // Baseline probes at the center of the ball.
  c_m_candidate(exact.u_true);
  if (sampling.fundamental_probe) {
    const GridFunction h0 = fundamental_mode(part.spec);
    c.L_F = std::max(c.L_F, norm(apply_subderivative(truth_state, h0)));
  }

  const Rng root(seed);
  for (int t = 0; t < n_samples; ++t) {
    Rng rng = root.derive(t);

    GridFunction p = unit_field(part.spec, sampling.kind, rng);
    kernels::active().scal(radius * radius_fraction(2 * t), p.data(), p.size());
    GridFunction u = add(exact.u_true, p);

    GridFunction q = unit_field(part.spec, sampling.kind, rng);
    kernels::active().scal(radius * radius_fraction(2 * t + 1), q.data(), q.size());
    GridFunction u2 = add(exact.u_true, q);

    GridFunction h = unit_field(part.spec, sampling.kind, rng);

    const StateSolution su = solve_forward(u, newton);
    const StateSolution su2 = solve_forward(u2, newton);

    c.L_F = std::max(c.L_F, norm(apply_subderivative(su, h)));
    c_m_candidate(u);
    c_m_candidate(u2);

    // Tangential-cone ratio per part; tiny denominators are skipped.
    const GridFunction fdiff = sub(su.y, su2.y);
    const GridFunction gstep = apply_subderivative(su, sub(u, u2));
    const GridFunction mismatch = sub(fdiff, gstep);
    for (int i = 0; i < part.P; ++i) {
      double num = 0.0, den = 0.0;
      const double h2 = part.spec.h() * part.spec.h();
      for (int idx : part.parts[i]) {
        num += mismatch.values[idx] * mismatch.values[idx];
        den += fdiff.values[idx] * fdiff.values[idx];
      }
      num = std::sqrt(h2 * num);
      den = std::sqrt(h2 * den);
      if (den < 1e-12) continue;
      c.mu_hat = std::max(c.mu_hat, num / den);
    }
  }

  c.mu_valid = c.mu_hat < 1.0;
  return c;
}

nlohmann::json to_json(const EstimatedConstants& c) {
  return nlohmann::json{
      {"L_F", c.L_F},           {"L_M", c.L_M},
      {"mu_hat", c.mu_hat},     {"C_M_delta", c.C_M_delta},
      {"C_N_hat", c.C_N_hat},   {"sigma", c.sigma},
      {"n_samples", c.n_samples}, {"seed", c.seed},
      {"mu_valid", c.mu_valid}};
}

EstimatedConstants constants_from_json(const nlohmann::json& j) {
  EstimatedConstants c;
  c.L_F = j.at("L_F").get<double>();
  c.L_M = j.at("L_M").get<double>();
  c.mu_hat = j.at("mu_hat").get<double>();
  c.C_M_delta = j.at("C_M_delta").get<double>();
  c.C_N_hat = j.at("C_N_hat").get<double>();
  c.sigma = j.at("sigma").get<double>();
  c.n_samples = j.at("n_samples").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.mu_valid = j.at("mu_valid").get<bool>();
  return c;
}

nlohmann::json exact_data_to_json(const ExactData& d,
                                  const ObservationPartition& part) {
  return nlohmann::json{{"P", part.P},
                        {"scheme", part.scheme},
                        {"u_true", to_json(d.u_true)},
                        {"y_full", to_json(d.y_full)},
                        {"y_parts", d.y_parts}};
}

ExactData exact_data_from_json(const nlohmann::json& j,
                               const ObservationPartition& part) {
  if (j.at("P").get<int>() != part.P ||
      j.at("scheme").get<std::string>() != part.scheme)
    throw ShapeError("exact data was generated for a different partition");
  ExactData d;
  d.u_true = grid_function_from_json(j.at("u_true"));
  d.y_full = grid_function_from_json(j.at("y_full"));
  d.y_parts = j.at("y_parts").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(d.y_parts.size()) != part.P)
    throw ShapeError("exact data part count mismatch");
  for (int i = 0; i < part.P; ++i)
    if (d.y_parts[i].size() != part.part_size(i))
      throw ShapeError("exact data block size mismatch in part " +
                       std::to_string(i));
  return d;
}

nlohmann::json noisy_data_to_json(const NoisyData& d) {
  return nlohmann::json{{"y_parts", d.y_parts},
                        {"deltas", d.deltas},
                        {"delta_total", d.delta_total},
                        {"seed", d.seed}};
}

NoisyData noisy_data_from_json(const nlohmann::json& j,
                               const ObservationPartition& part) {
  NoisyData d;
  d.y_parts = j.at("y_parts").get<std::vector<std::vector<double>>>();
  d.deltas = j.at("deltas").get<std::vector<double>>();
  d.delta_total = j.at("delta_total").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  if (static_cast<int>(d.y_parts.size()) != part.P ||
      static_cast<int>(d.deltas.size()) != part.P)
    throw ShapeError("noisy data part count mismatch");
  for (int i = 0; i < part.P; ++i)
    if (d.y_parts[i].size() != part.part_size(i))
      throw ShapeError("noisy data block size mismatch in part " +
                       std::to_string(i));
  return d;
}

}  // namespace sdbli
