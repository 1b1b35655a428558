#include "eprlock/timeseries.hpp"

#include <algorithm>
#include <cmath>

#include "eprlock/errors.hpp"
#include "eprlock/kernels.hpp"

namespace eprlock {

void validate(const TimeSeries& series) {
  if (!(series.sample_rate > 0) || !std::isfinite(series.sample_rate)) {
    throw InvalidInput("time series sample_rate must be > 0");
  }
  if (series.samples.empty()) throw InvalidInput("time series must be non-empty");
}

double mean(const TimeSeries& series) {
  validate(series);
  return kernels::active().sum(series.samples.data(), series.size()) / static_cast<double>(series.size());
}

double variance(const TimeSeries& series) {
  const double m = mean(series);
  const double n = static_cast<double>(series.size());
  const double mean_square = kernels::active().sum_squares(series.samples.data(), series.size()) / n;
  return std::max(0.0, mean_square - m * m);
}

double rms(const TimeSeries& series) {
  validate(series);
  return std::sqrt(kernels::active().sum_squares(series.samples.data(), series.size()) /
                   static_cast<double>(series.size()));
}

}  // namespace eprlock
