#include "eprlock/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eprlock/errors.hpp"

namespace eprlock::optimize {

ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tolerance) {
  if (!(lo < hi)) throw InvalidInput("golden_section: empty interval");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int iterations = 0;
  while (b - a > tolerance && iterations < 500) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++iterations;
  }
  // The ends are candidates too: the minimum may sit on the boundary.
  ScalarMinimum best{fc <= fd ? c : d, std::min(fc, fd), iterations};
  for (double edge : {lo, hi}) {
    const double fe = f(edge);
    if (fe < best.value) best = {edge, fe, iterations};
  }
  return best;
}

SimplexMinimum nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                           const SimplexOptions& options) {
  const std::size_t dim = start.size();
  if (dim == 0) throw InvalidInput("nelder_mead: empty parameter vector");

  std::vector<std::vector<double>> simplex(dim + 1, start);
  for (std::size_t j = 0; j < dim; ++j) simplex[j + 1][j] += options.initial_step;
  std::vector<double> values(dim + 1);
  for (std::size_t j = 0; j <= dim; ++j) values[j] = f(simplex[j]);

  std::vector<std::size_t> order(dim + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
    std::vector<std::vector<double>> s(dim + 1);
    std::vector<double> v(dim + 1);
    for (std::size_t j = 0; j <= dim; ++j) {
      s[j] = simplex[order[j]];
      v[j] = values[order[j]];
    }
    simplex = std::move(s);
    values = std::move(v);
  };

  auto blend = [&](const std::vector<double>& from, const std::vector<double>& to, double t) {
    std::vector<double> out(dim);
    for (std::size_t k = 0; k < dim; ++k) out[k] = from[k] + t * (to[k] - from[k]);
    return out;
  };

  SimplexMinimum result;
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    sort_simplex();
    double diameter = 0.0;
    for (std::size_t j = 1; j <= dim; ++j) {
      for (std::size_t k = 0; k < dim; ++k) diameter = std::max(diameter, std::abs(simplex[j][k] - simplex[0][k]));
    }
    const double spread = values[dim] - values[0];
    if (spread <= options.f_tolerance * (1.0 + std::abs(values[0])) && diameter <= options.x_tolerance) {
      result.converged = true;
      break;
    }
    // Flat objective with a collapsed-but-not-tiny simplex still counts as done
    // once the spread is exactly zero.
    if (spread == 0.0 && diameter <= 1e3 * options.x_tolerance) {
      result.converged = true;
      break;
    }

    std::vector<double> centroid(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[j][k] / static_cast<double>(dim);
    }
    const std::vector<double>& worst = simplex[dim];

    const std::vector<double> reflected = blend(centroid, worst, -1.0);
    const double f_reflected = f(reflected);
    if (f_reflected < values[0]) {
      const std::vector<double> expanded = blend(centroid, worst, -2.0);
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        simplex[dim] = expanded;
        values[dim] = f_expanded;
      } else {
        simplex[dim] = reflected;
        values[dim] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[dim - 1]) {
      simplex[dim] = reflected;
      values[dim] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[dim];
    const std::vector<double> contracted = outside ? blend(centroid, reflected, 0.5) : blend(centroid, worst, 0.5);
    const double f_contracted = f(contracted);
    if (f_contracted < (outside ? f_reflected : values[dim])) {
      simplex[dim] = contracted;
      values[dim] = f_contracted;
      continue;
    }
    for (std::size_t j = 1; j <= dim; ++j) {
      simplex[j] = blend(simplex[0], simplex[j], 0.5);
      values[j] = f(simplex[j]);
    }
  }
  sort_simplex();
  result.x = simplex[0];
  result.value = values[0];
  result.iterations = iteration;
  return result;
}

}  // namespace eprlock::optimize
