#pragma once

#include <complex>
#include <string>
#include <vector>

namespace eprlock {

/// Uniformly sampled real record.
struct TimeSeries {
  double sample_rate = 1.0;  // Hz
  std::vector<double> samples;
  std::string label;  // unit

  std::size_t size() const { return samples.size(); }
  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Uniformly sampled complex baseband record.
struct ComplexSeries {
  double sample_rate = 1.0;
  std::vector<std::complex<double>> samples;
};

/// Throws InvalidInput unless sample_rate > 0 and the record is non-empty.
void validate(const TimeSeries& series);

double mean(const TimeSeries& series);
double variance(const TimeSeries& series);  // population variance
double rms(const TimeSeries& series);

}  // namespace eprlock
