#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdbli/errors.hpp"

namespace sdbli {

// Uniform n-by-n interior grid of the unit square with homogeneous
// Dirichlet boundary; mesh width h = 1/(n+1).
struct GridSpec {
  int n = 0;

  double h() const { return 1.0 / (n + 1); }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }
  bool operator==(const GridSpec&) const = default;
};

GridSpec make_grid(int n);

// Nodal values in row-major order; index (i, j) -> i*n + j, with i the row
// (y direction) and j the column (x direction).
struct GridFunction {
  GridSpec spec;
  std::vector<double> values;

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  std::size_t size() const { return values.size(); }
};

GridFunction zeros(GridSpec spec);
GridFunction constant(GridSpec spec, double value);

// Grid coordinates of node (i, j): x = (j+1)h, y = (i+1)h.
inline double node_x(GridSpec spec, int j) { return (j + 1) * spec.h(); }
inline double node_y(GridSpec spec, int i) { return (i + 1) * spec.h(); }

// L2(h) inner product: h^2 * sum_j a_j b_j.  Throws ShapeError on
// mismatched grids.
double inner(const GridFunction& a, const GridFunction& b);
double norm(const GridFunction& a);

// Weighted norm of a raw coefficient block living on the same mesh.
double block_norm(GridSpec spec, const std::vector<double>& block);

GridFunction add(const GridFunction& a, const GridFunction& b);
GridFunction sub(const GridFunction& a, const GridFunction& b);
GridFunction scaled(const GridFunction& a, double alpha);
void axpy_inplace(double alpha, const GridFunction& x, GridFunction& y);

// Discrete negative Laplacian: 5-point stencil with the Dirichlet halo
// taken as zero, scaled by 1/h^2.
GridFunction apply_laplacian(const GridFunction& u);

// Flat CSV, one value per line, printed with 17 significant digits so the
// decimal text parses back to the identical IEEE double.
std::string to_csv(const GridFunction& u);
// Side length is inferred from the line count, which must be a perfect
// square of a positive integer.
GridFunction from_csv(const std::string& text);

// JSON envelope {"n": ..., "values": [...]}.
nlohmann::json to_json(const GridFunction& u);
GridFunction grid_function_from_json(const nlohmann::json& j);

// 17-significant-digit decimal rendering used by every CSV writer.
std::string format_double(double v);

}  // namespace sdbli
