#include "eprlock/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

#include "eprlock/errors.hpp"
#include "eprlock/fft.hpp"
#include "eprlock/kernels.hpp"
#include "eprlock/optimize.hpp"
#include "parallel.hpp"

namespace eprlock::estimation {

namespace {

constexpr std::size_t kMaxDefaultSegment = std::size_t{1} << 16;

std::vector<double> make_window(Window window, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (window == Window::hann) {
    // Periodic Hann: the spectral-analysis form.
    for (std::size_t k = 0; k < length; ++k) {
      w[k] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(length));
    }
  }
  return w;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct Params {
  double eta;
  double sigma;
};

class Objective {
 public:
  Objective(const SqueezingDataset& data, double omega_norm, const FitOptions& options)
      : data_(data), omega_norm_(omega_norm), options_(options) {}

  Params natural(const std::vector<double>& z) const {
    return {logistic(z[0]), options_.sigma_upper_bound * logistic(z[1])};
  }

  std::vector<double> transformed(Params p) const {
    return {logit(p.eta), logit(p.sigma / options_.sigma_upper_bound)};
  }

  // Weighted residuals, minus branch then plus branch per point.
  std::vector<double> residuals(Params p, const std::vector<std::size_t>& rows) const {
    std::vector<double> r;
    r.reserve(2 * rows.size());
    const double sigma = std::abs(p.sigma);
    for (std::size_t row : rows) {
      const SqueezingPoint& pt = data_.points[row];
      const double weight = pt.uncertainty > 0 ? 1.0 / pt.uncertainty : 1.0;
      for (auto [sign, measured] : {std::pair{spectra::Sign::minus, pt.var_minus}, std::pair{spectra::Sign::plus, pt.var_plus}}) {
        const double model = degraded_variance(pt.epsilon, p.eta, sigma, omega_norm_, sign, options_.mode);
        r.push_back(weight * (std::log(model) - std::log(measured)));
      }
    }
    return r;
  }

  double cost(Params p, const std::vector<std::size_t>& rows) const {
    double total = 0;
    for (double r : residuals(p, rows)) total += r * r;
    return std::isfinite(total) ? total : std::numeric_limits<double>::max();
  }

 private:
  const SqueezingDataset& data_;
  double omega_norm_;
  const FitOptions& options_;
};

optimize::SimplexMinimum minimize_from(const Objective& objective, const std::vector<std::size_t>& rows,
                                       std::vector<double> start) {
  optimize::SimplexOptions opts;
  opts.initial_step = 0.5;
  opts.f_tolerance = 1e-15;
  opts.x_tolerance = 1e-9;
  opts.max_iterations = 4000;
  return optimize::nelder_mead([&](const std::vector<double>& z) { return objective.cost(objective.natural(z), rows); },
                               std::move(start), opts);
}

// Derivative with central differences, one-sided near a bound.
template <typename F>
std::vector<double> derivative(F&& f, double x, double h, double lower, double upper) {
  if (x - h < lower) {
    auto a = f(x + h), b = f(x);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = (a[k] - b[k]) / h;
    return a;
  }
  if (x + h > upper) {
    auto a = f(x), b = f(x - h);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = (a[k] - b[k]) / h;
    return a;
  }
  auto a = f(x + h), b = f(x - h);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = (a[k] - b[k]) / (2 * h);
  return a;
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double m = 0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace

std::string_view to_string(Window window) { return window == Window::hann ? "hann" : "rectangular"; }

Window window_from_string(std::string_view name) {
  if (name == "hann") return Window::hann;
  if (name == "rectangular") return Window::rectangular;
  throw InvalidInput("unknown window '" + std::string(name) + "'");
}

std::size_t default_segment_length(std::size_t series_length) {
  return std::max<std::size_t>(2, std::min(series_length / 8, kMaxDefaultSegment));
}

PsdEstimate welch_psd(const TimeSeries& series, std::size_t segment_length, double overlap_fraction, Window window) {
  validate(series);
  const std::size_t n = series.size();
  const std::size_t length = segment_length == 0 ? default_segment_length(n) : segment_length;
  if (length < 2) throw InvalidInput("welch_psd: segment_length must be >= 2");
  if (length > n) throw InvalidInput("welch_psd: series shorter than one segment");
  if (!(overlap_fraction >= 0 && overlap_fraction <= 0.9)) throw InvalidInput("welch_psd: overlap must lie in [0, 0.9]");

  const auto& k = kernels::active();
  const std::vector<double> w = make_window(window, length);
  const double window_power = k.sum_squares(w.data(), length);
  const auto overlap = static_cast<std::size_t>(std::llround(overlap_fraction * static_cast<double>(length)));
  const std::size_t step = std::max<std::size_t>(1, length - std::min(overlap, length - 1));

  RealFft fft(length);
  std::vector<double> acc(fft.bins(), 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + length <= n; start += step) {
    auto buffer = fft.real();
    std::copy_n(series.samples.begin() + static_cast<std::ptrdiff_t>(start), length, buffer.begin());
    const double segment_mean = k.sum(buffer.data(), length) / static_cast<double>(length);
    k.center_and_window(buffer.data(), w.data(), segment_mean, length);
    fft.forward();
    k.accumulate_power(fft.spectrum().data(), acc.data(), fft.bins());
    ++segments;
  }

  PsdEstimate psd;
  psd.segment_length = length;
  psd.overlap_fraction = overlap_fraction;
  psd.window = window;
  psd.segments = segments;
  psd.frequencies.resize(acc.size());
  psd.densities.resize(acc.size());
  const double norm = 1.0 / (static_cast<double>(segments) * series.sample_rate * window_power);
  for (std::size_t b = 0; b < acc.size(); ++b) {
    psd.frequencies[b] = static_cast<double>(b) * series.sample_rate / static_cast<double>(length);
    const bool unpaired = b == 0 || (length % 2 == 0 && b == acc.size() - 1);
    psd.densities[b] = acc[b] * norm * (unpaired ? 1.0 : 2.0);
  }
  return psd;
}

double band_power(const PsdEstimate& psd, double f_lo, double f_hi) {
  if (!(f_lo < f_hi)) throw InvalidInput("band_power: f_lo must be < f_hi");
  double total = 0;
  std::size_t used = 0;
  for (std::size_t b = 0; b < psd.frequencies.size(); ++b) {
    if (psd.frequencies[b] < f_lo || psd.frequencies[b] > f_hi) continue;
    if (used > 0) {
      total += 0.5 * (psd.densities[b] + psd.densities[b - 1]) * (psd.frequencies[b] - psd.frequencies[b - 1]);
    }
    ++used;
  }
  if (used < 2) throw InvalidInput("band_power: band contains fewer than two frequency bins");
  return total;
}

double integrate_psd(const PsdEstimate& psd, double f_lo, double f_hi) {
  return std::sqrt(band_power(psd, f_lo, f_hi));
}

TimeSeries apply_calibration(const TimeSeries& series, double beta) {
  if (!(beta > 0) || !std::isfinite(beta)) throw InvalidInput("apply_calibration: beta must be > 0");
  TimeSeries out{series.sample_rate, series.samples, "rad"};
  for (double& x : out.samples) x *= beta;
  return out;
}

void validate(const SqueezingDataset& data) {
  if (data.points.size() < 4) throw InvalidInput("squeezing dataset needs at least 4 points");
  std::set<double> distinct;
  for (const auto& p : data.points) {
    if (!(p.epsilon >= 0 && p.epsilon < 1)) throw InvalidInput("dataset epsilon outside [0, 1)");
    if (!(p.var_minus > 0) || !(p.var_plus > 0)) throw InvalidInput("dataset variances must be > 0");
    if (!(p.uncertainty >= 0) || !std::isfinite(p.uncertainty)) throw InvalidInput("dataset uncertainty must be >= 0");
    distinct.insert(p.epsilon);
  }
  if (distinct.size() < 2) throw InvalidInput("dataset must span at least two pump values");
}

double degraded_variance(double epsilon, double eta, double sigma, double omega_norm, spectra::Sign sign,
                         spectra::PhaseNoiseMode mode) {
  const double ideal = spectra::two_mode_variance(epsilon, eta, omega_norm, sign);
  const double orthogonal = spectra::two_mode_variance(epsilon, eta, omega_norm, spectra::opposite(sign));
  return spectra::phase_noise_variance(ideal, orthogonal, sigma, mode);
}

FitResult fit_phase_noise_model(const SqueezingDataset& data, double omega_norm, const FitOptions& options) {
  validate(data);
  if (!(options.sigma_upper_bound > 0)) throw InvalidInput("fit: sigma_upper_bound must be > 0");
  const Objective objective(data, omega_norm, options);
  std::vector<std::size_t> all_rows(data.points.size());
  for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = r;

  // 3 x 3 grid of starting points.
  constexpr std::array kEtaStarts{0.6, 0.8, 0.95};
  constexpr std::array kSigmaStarts{0.002, 0.02, 0.1};
  std::vector<optimize::SimplexMinimum> starts(kEtaStarts.size() * kSigmaStarts.size());
  detail::parallel_for(starts.size(), [&](std::size_t s) {
    const Params p0{kEtaStarts[s / kSigmaStarts.size()],
                    std::min(kSigmaStarts[s % kSigmaStarts.size()], 0.5 * options.sigma_upper_bound)};
    starts[s] = minimize_from(objective, all_rows, objective.transformed(p0));
  });

  FitResult result;
  std::size_t best = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    if (starts[s].converged) ++result.starts_converged;
    if (starts[s].value < starts[best].value) best = s;
  }
  const Params hat = objective.natural(starts[best].x);
  result.eta_hat = hat.eta;
  result.sigma_hat = hat.sigma;
  result.converged = starts[best].converged;
  result.residual_norm = std::sqrt(starts[best].value);
  result.at_boundary = hat.sigma < 1e-4 || hat.eta > 1 - 1e-6 || hat.eta < 1e-6;

  // Jacobian of the weighted residuals in natural parameters.
  const auto d_eta = derivative([&](double e) { return objective.residuals({e, hat.sigma}, all_rows); }, hat.eta,
                                1e-6, 0.0, 1.0);
  const auto d_sigma = derivative([&](double s) { return objective.residuals({hat.eta, s}, all_rows); },
                                  hat.sigma, 1e-6, 0.0, options.sigma_upper_bound);
  double jtj_ee = 0, jtj_es = 0, jtj_ss = 0;
  for (std::size_t k = 0; k < d_eta.size(); ++k) {
    jtj_ee += d_eta[k] * d_eta[k];
    jtj_es += d_eta[k] * d_sigma[k];
    jtj_ss += d_sigma[k] * d_sigma[k];
  }
  const bool supplied = std::all_of(data.points.begin(), data.points.end(), [](const auto& p) { return p.uncertainty > 0; });
  const double dof = static_cast<double>(d_eta.size()) - 2.0;
  const double scale = supplied || dof <= 0 ? 1.0 : starts[best].value / dof;
  const double det = jtj_ee * jtj_ss - jtj_es * jtj_es;
  if (det > 0 && std::isfinite(det)) {
    result.eta_err = std::sqrt(scale * jtj_ss / det);
    result.sigma_err = std::sqrt(scale * jtj_ee / det);
  } else {
    result.eta_err = jtj_ee > 0 ? std::sqrt(scale / jtj_ee) : std::numeric_limits<double>::infinity();
    result.sigma_err = std::numeric_limits<double>::infinity();
  }

  if (options.bootstrap_resamples > 1) {
    const auto resamples = static_cast<std::size_t>(options.bootstrap_resamples);
    std::vector<double> etas(resamples), sigmas(resamples);
    const std::vector<double> from = starts[best].x;
    detail::parallel_for(resamples, [&](std::size_t b) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.bootstrap_seed),
                        static_cast<std::uint32_t>(options.bootstrap_seed >> 32), static_cast<std::uint32_t>(b)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> pick(0, data.points.size() - 1);
      std::vector<std::size_t> rows(data.points.size());
      for (auto& r : rows) r = pick(rng);
      const Params p = objective.natural(minimize_from(objective, rows, from).x);
      etas[b] = p.eta;
      sigmas[b] = p.sigma;
    });
    result.eta_err_bootstrap = sample_std(etas);
    result.sigma_err_bootstrap = sample_std(sigmas);
  }
  return result;
}

}  // namespace eprlock::estimation
