#pragma once

// Output SNR of the three-level quantizer: small-signal theory, the optimal
// threshold, and a periodogram-based empirical counterpart.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/numeric.hpp"
#include "sramp/quantizer.hpp"
#include "sramp/rng.hpp"
#include "sramp/signal_synth.hpp"

namespace sramp {

namespace detail {

struct MuTerms {
  double S;   // f+ + f-
  double D;   // time-averaged output variance
  double dS;  // dS/dgamma
  double dD;  // dD/dgamma
};

inline MuTerms mu_terms(double gamma) {
  const auto t = threshold_stats(gamma);
  const double mean = t.sf_plus - t.F_minus;
  const double power = t.sf_plus + t.F_minus;
  MuTerms r;
  r.S = t.f_plus + t.f_minus;
  r.D = power - mean * mean;
  // d/dgamma of f(-gamma + m) is -f'(-gamma + m).
  r.dS = t.fp_plus - t.fp_minus;
  r.dD = -(t.f_plus + t.f_minus) + 2.0 * mean * (t.f_plus - t.f_minus);
  return r;
}

inline constexpr double kDegenerateVariance = 1e-300;

}  // namespace detail

/// mu = A^2 (f+ + f-)^2 / (2 <var y>). Empty when the output variance
/// vanishes (thresholds so wide that y is almost surely constant).
inline std::optional<double> theoretical_mu(double gamma, double amplitude) {
  if (!(gamma > 0.0)) throw InvalidArgument("theoretical_mu: gamma must be positive");
  const auto t = detail::mu_terms(gamma);
  if (!(t.D > detail::kDegenerateVariance) || !std::isfinite(t.D)) return std::nullopt;
  return amplitude * amplitude * t.S * t.S / (2.0 * t.D);
}

/// Analytic d mu / d gamma.
inline std::optional<double> theoretical_mu_slope(double gamma, double amplitude) {
  if (!(gamma > 0.0)) throw InvalidArgument("theoretical_mu_slope: gamma must be positive");
  const auto t = detail::mu_terms(gamma);
  if (!(t.D > detail::kDegenerateVariance) || !std::isfinite(t.D)) return std::nullopt;
  return 0.5 * amplitude * amplitude * (2.0 * t.S * t.dS * t.D - t.S * t.S * t.dD) / (t.D * t.D);
}

/// Both sides of the stationarity condition d mu / d gamma = 0, written as
///   (f+ + f-) / (2 (f'+ + f'-)) = (F+ + 3F- - (F+ + F-)^2) / (f+ - 3f- - 2(F+ + F-)(f+ - f-))
/// where f'+ and f'- are derivatives with respect to gamma.
struct StationaritySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline StationaritySides stationarity_sides(double gamma) {
  const auto t = threshold_stats(gamma);
  const double dfp_dgamma = t.fp_plus;
  const double dfm_dgamma = -t.fp_minus;
  const double Fsum = t.F_plus + t.F_minus;
  StationaritySides s;
  s.lhs = (t.f_plus + t.f_minus) / (2.0 * (dfp_dgamma + dfm_dgamma));
  s.rhs = (t.F_plus + 3.0 * t.F_minus - Fsum * Fsum) /
          (t.f_plus - 3.0 * t.f_minus - 2.0 * Fsum * (t.f_plus - t.f_minus));
  return s;
}

/// Threshold maximizing mu, by bisection on the analytic slope. Independent of
/// the amplitude since mu is proportional to A^2.
inline double optimal_threshold(double lo = 0.2, double hi = 3.0, double tol = 1e-15) {
  auto slope = [](double g) {
    const auto s = theoretical_mu_slope(g, 1.0);
    if (!s) throw NumericFailure("optimal_threshold: degenerate output variance");
    return *s;
  };
  return numeric::bisect(slope, lo, hi, tol).root;
}

struct SnrCurve {
  std::vector<double> gammas;
  std::vector<double> mu_values;
};

inline std::vector<double> gamma_grid(double lo, double hi, double step) {
  if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0))
    throw InvalidArgument("gamma grid needs 0 < lo <= hi and step > 0");
  std::vector<double> g;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  g.reserve(count);
  for (std::size_t i = 0; i < count; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

inline SnrCurve theoretical_curve(std::span<const double> gammas, double amplitude) {
  SnrCurve c;
  c.gammas.assign(gammas.begin(), gammas.end());
  c.mu_values.reserve(gammas.size());
  for (double g : gammas) {
    const auto mu = theoretical_mu(g, amplitude);
    if (!mu) throw NumericFailure("theoretical_curve: mu undefined at gamma = " + std::to_string(g));
    c.mu_values.push_back(*mu);
  }
  return c;
}

/// Gamma of the first maximum of the curve.
inline double curve_argmax(const SnrCurve& c) {
  if (c.gammas.empty() || c.gammas.size() != c.mu_values.size())
    throw InvalidArgument("curve_argmax: empty or ragged curve");
  const auto it = std::max_element(c.mu_values.begin(), c.mu_values.end());
  return c.gammas[static_cast<std::size_t>(it - c.mu_values.begin())];
}

inline void write_curve_csv(std::ostream& os, const SnrCurve& c) {
  os << "gamma,mu\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < c.gammas.size(); ++i) os << c.gammas[i] << ',' << c.mu_values[i] << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Empirical SNR

/// One-sided DFT bins (1..N/2) within one bin of each harmonic h f0 <= 1/2.
inline std::vector<std::size_t> harmonic_bins(std::size_t n, double f0) {
  if (!(f0 > 0.0 && f0 < 0.5)) throw InvalidArgument("f0 must lie in (0, 0.5)");
  std::vector<std::size_t> bins;
  const std::size_t half = n / 2;
  for (std::size_t h = 1;; ++h) {
    const double fh = static_cast<double>(h) * f0;
    if (fh > 0.5 + 1e-12) break;
    const auto centre = static_cast<long long>(std::llround(fh * static_cast<double>(n)));
    for (long long k = centre - 1; k <= centre + 1; ++k)
      if (k >= 1 && static_cast<std::size_t>(k) <= half) bins.push_back(static_cast<std::size_t>(k));
  }
  std::sort(bins.begin(), bins.end());
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
  return bins;
}

namespace detail {

/// Weight of one-sided bin k in the two-sided periodogram sum.
inline double bin_multiplicity(std::size_t k, std::size_t n) noexcept {
  return (n % 2 == 0 && k == n / 2) ? 1.0 : 2.0;
}

/// cos/sin of 2 pi j / N for j in [0, N).
struct Twiddles {
  std::vector<double> c, s;
  explicit Twiddles(std::size_t n) : c(n), s(n) {
    for (std::size_t j = 0; j < n; ++j) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
      c[j] = std::cos(th);
      s[j] = std::sin(th);
    }
  }
};

template <class T>
std::complex<double> dft_bin(std::span<const T> y, std::size_t k, const Twiddles& tw) {
  const std::size_t n = y.size();
  double re = 0.0, im = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<double>(y[i]);
    re += v * tw.c[j];
    im -= v * tw.s[j];
    j += k;
    if (j >= n) j -= n;
  }
  return {re, im};
}

}  // namespace detail

/// Power in the harmonic bins of f0 divided by the power in every other
/// nonzero-frequency bin of the rectangular-window periodogram. Total power
/// comes from Parseval, so only the harmonic bins are transformed.
template <class T>
double empirical_snr(std::span<const T> y, double f0) {
  if (!(f0 > 0.0 && f0 < 0.5)) throw InvalidArgument("empirical_snr: f0 must lie in (0, 0.5)");
  const std::size_t n = y.size();
  if (static_cast<double>(n) < 2.0 / f0) throw InvalidArgument("empirical_snr: series shorter than 2/f0");
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& v : y) {
    const auto d = static_cast<double>(v);
    sum += d;
    sum_sq += d * d;
  }
  const double total = static_cast<double>(n) * sum_sq - sum * sum;
  const detail::Twiddles tw(n);
  double harmonic = 0.0;
  for (std::size_t k : harmonic_bins(n, f0))
    harmonic += detail::bin_multiplicity(k, n) * std::norm(detail::dft_bin(y, k, tw));
  const double rest = total - harmonic;
  if (!(rest > 0.0)) return harmonic > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return harmonic / rest;
}

inline double empirical_snr(const std::vector<double>& y, double f0) {
  return empirical_snr(std::span<const double>(y), f0);
}
inline double empirical_snr(const std::vector<std::int8_t>& y, double f0) {
  return empirical_snr(std::span<const std::int8_t>(y), f0);
}

// ---------------------------------------------------------------------------
// Monte Carlo threshold sweep

/// Empirical SNR of quantize(x, gamma) for every gamma at once. Sorting the
/// samples turns each quantized DFT bin into a difference of prefix sums, so
/// the cost is O(N log N + N * bins) independent of the number of gammas.
inline std::vector<double> empirical_snr_over_thresholds(std::span<const double> x, double sigma,
                                                         double f0, std::span<const double> gammas) {
  const std::size_t n = x.size();
  if (!(f0 > 0.0 && f0 < 0.5)) throw InvalidArgument("f0 must lie in (0, 0.5)");
  if (static_cast<double>(n) < 2.0 / f0) throw InvalidArgument("series shorter than 2/f0");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = x[order[i]];

  struct Cut {
    std::size_t below;    // samples strictly below the lower threshold
    std::size_t through;  // samples at or below the upper threshold
  };
  std::vector<Cut> cuts;
  cuts.reserve(gammas.size());
  for (double g : gammas) {
    const double lo = sigma * (-g + kRayleighMean);
    const double hi = sigma * (g + kRayleighMean);
    const auto b = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), lo) - sorted.begin());
    const auto t = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), hi) - sorted.begin());
    cuts.push_back({b, t});
  }

  std::vector<double> harmonic(gammas.size(), 0.0);
  const detail::Twiddles tw(n);
  std::vector<std::complex<double>> prefix(n + 1);
  for (std::size_t k : harmonic_bins(n, f0)) {
    prefix[0] = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>((static_cast<unsigned long long>(k) * order[i]) % n);
      prefix[i + 1] = prefix[i] + std::complex<double>(tw.c[j], -tw.s[j]);
    }
    const double w = detail::bin_multiplicity(k, n);
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      const auto X = (prefix[n] - prefix[cuts[g].through]) - prefix[cuts[g].below];
      harmonic[g] += w * std::norm(X);
    }
  }

  std::vector<double> out(gammas.size());
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    const auto n_minus = static_cast<double>(cuts[g].below);
    const auto n_plus = static_cast<double>(n - cuts[g].through);
    const double sum = n_plus - n_minus;
    const double total = static_cast<double>(n) * (n_plus + n_minus) - sum * sum;
    const double rest = total - harmonic[g];
    out[g] = rest > 0.0 ? harmonic[g] / rest : (harmonic[g] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return out;
}

struct SweepConfig {
  double amplitude = 0.1;
  double sigma = 1.0;
  std::size_t n_trials = 100;
  std::size_t n_samples = 100000;
  std::vector<double> gammas;
  double f0 = 0.1;
  std::uint64_t seed = 0;
};

struct SweepResult {
  SnrCurve mean_curve;
  std::vector<double> argmaxes;  ///< per trial, in trial order

  double mean_argmax() const {
    if (argmaxes.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(argmaxes.begin(), argmaxes.end(), 0.0) / static_cast<double>(argmaxes.size());
  }
};

/// Trial t synthesizes a series with seed derive_seed(seed, t) and a phase
/// drawn uniformly from that trial's stream.
inline SweepResult threshold_sweep(const SweepConfig& cfg) {
  if (cfg.gammas.empty()) throw InvalidArgument("threshold_sweep: no gammas");
  if (!std::is_sorted(cfg.gammas.begin(), cfg.gammas.end()))
    throw InvalidArgument("threshold_sweep: gammas must be ascending");
  if (cfg.gammas.front() <= 0.0) throw InvalidArgument("threshold_sweep: gammas must be positive");
  if (cfg.n_trials == 0 || cfg.n_samples == 0) throw InvalidArgument("threshold_sweep: need trials and samples");
  if (!(cfg.amplitude > 0.0)) throw InvalidArgument("threshold_sweep: amplitude must be positive");

  std::vector<std::vector<double>> per_trial(cfg.n_trials);
  numeric::parallel_for(cfg.n_trials, [&](std::size_t t) {
    const std::uint64_t s = derive_seed(cfg.seed, t);
    Rng phase_rng(mix64(s));
    SignalSpec spec;
    spec.amplitude = cfg.amplitude;
    spec.f0 = cfg.f0;
    spec.sigma = cfg.sigma;
    spec.n_samples = cfg.n_samples;
    spec.seed = s;
    spec.phase = 2.0 * std::numbers::pi * phase_rng.uniform_open();
    if (spec.phase >= 2.0 * std::numbers::pi) spec.phase = 0.0;
    const auto ts = synthesize(spec);
    per_trial[t] = empirical_snr_over_thresholds(ts.samples, cfg.sigma, cfg.f0, cfg.gammas);
  });

  SweepResult r;
  r.mean_curve.gammas = cfg.gammas;
  r.mean_curve.mu_values.assign(cfg.gammas.size(), 0.0);
  for (const auto& curve : per_trial) {
    for (std::size_t g = 0; g < curve.size(); ++g) r.mean_curve.mu_values[g] += curve[g];
    const auto it = std::max_element(curve.begin(), curve.end());
    r.argmaxes.push_back(cfg.gammas[static_cast<std::size_t>(it - curve.begin())]);
  }
  for (auto& v : r.mean_curve.mu_values) v /= static_cast<double>(cfg.n_trials);
  return r;
}

}  // namespace sramp
