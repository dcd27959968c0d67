#include "sdbli/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "sdbli/kernels.hpp"

namespace sdbli {

GridSpec make_grid(int n) {
  if (n < 1) throw ConfigError("grid side must be at least 1, got " + std::to_string(n));
  return GridSpec{n};
}

GridFunction zeros(GridSpec spec) {
  return GridFunction{spec, std::vector<double>(spec.size(), 0.0)};
}

GridFunction constant(GridSpec spec, double value) {
  return GridFunction{spec, std::vector<double>(spec.size(), value)};
}

static void require_same_grid(const GridFunction& a, const GridFunction& b) {
  if (!(a.spec == b.spec))
    throw ShapeError("grid mismatch: n=" + std::to_string(a.spec.n) + " vs n=" +
                     std::to_string(b.spec.n));
}

double inner(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a, b);
  const double h = a.spec.h();
  return h * h * kernels::active().dot(a.data(), b.data(), a.size());
}

double norm(const GridFunction& a) { return std::sqrt(inner(a, a)); }

double block_norm(GridSpec spec, const std::vector<double>& block) {
  const double h = spec.h();
  return std::sqrt(h * h *
                   kernels::active().dot(block.data(), block.data(), block.size()));
}

GridFunction add(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a, b);
  GridFunction out = a;
  kernels::active().axpy(1.0, b.data(), out.data(), out.size());
  return out;
}

GridFunction sub(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a, b);
  GridFunction out = zeros(a.spec);
  kernels::active().sub(a.data(), b.data(), out.data(), out.size());
  return out;
}

GridFunction scaled(const GridFunction& a, double alpha) {
  GridFunction out = a;
  kernels::active().scal(alpha, out.data(), out.size());
  return out;
}

void axpy_inplace(double alpha, const GridFunction& x, GridFunction& y) {
  require_same_grid(x, y);
  kernels::active().axpy(alpha, x.data(), y.data(), y.size());
}

GridFunction apply_laplacian(const GridFunction& u) {
  GridFunction out = zeros(u.spec);
  const double h = u.spec.h();
  kernels::active().laplacian5(u.data(), out.data(), u.spec.n, 1.0 / (h * h));
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string to_csv(const GridFunction& u) {
  std::string out;
  out.reserve(u.size() * 24);
  for (double v : u.values) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

GridFunction from_csv(const std::string& text) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s) throw ShapeError("unparseable CSV value: '" + line + "'");
    values.push_back(v);
  }
  const auto count = values.size();
  const int n = static_cast<int>(std::llround(std::sqrt(static_cast<double>(count))));
  if (n < 1 || static_cast<std::size_t>(n) * n != count)
    throw ShapeError("CSV holds " + std::to_string(count) +
                     " values, not a perfect square");
  return GridFunction{GridSpec{n}, std::move(values)};
}

nlohmann::json to_json(const GridFunction& u) {
  return nlohmann::json{{"n", u.spec.n}, {"values", u.values}};
}

GridFunction grid_function_from_json(const nlohmann::json& j) {
  if (!j.contains("n") || !j.contains("values"))
    throw ShapeError("grid function JSON must have fields 'n' and 'values'");
  const int n = j.at("n").get<int>();
  auto values = j.at("values").get<std::vector<double>>();
  if (n < 1 || values.size() != static_cast<std::size_t>(n) * n)
    throw ShapeError("grid function JSON: " + std::to_string(values.size()) +
                     " values for n=" + std::to_string(n));
  return GridFunction{GridSpec{n}, std::move(values)};
}

}  // namespace sdbli
