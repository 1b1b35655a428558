#pragma once

// Derivative-free minimizers used by the spectra and estimation modules.

#include <cstddef>
#include <functional>
#include <vector>

namespace eprlock::optimize {

struct ScalarMinimum {
  double x = 0;
  double value = 0;
  int iterations = 0;
};

/// Golden-section search on [lo, hi]; stops when the bracket is narrower than
/// `tolerance` (absolute, in x). Assumes f is unimodal on the interval.
ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi,
                             double tolerance = 1e-8);

struct SimplexOptions {
  double initial_step = 0.5;
  double f_tolerance = 1e-15;  // spread of simplex values, relative to 1 + |f_best|
  double x_tolerance = 1e-10;  // simplex diameter
  int max_iterations = 5000;
};

struct SimplexMinimum {
  std::vector<double> x;
  double value = 0;
  int iterations = 0;
  bool converged = false;
};

/// Nelder-Mead simplex (standard reflection/expansion/contraction/shrink
/// coefficients 1, 2, 1/2, 1/2).
SimplexMinimum nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> start, const SimplexOptions& options = {});

}  // namespace eprlock::optimize
