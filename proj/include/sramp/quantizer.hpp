#pragma once

// Three-level quantizer with thresholds placed symmetrically about the noise
// mean: +1 above sigma (gamma + m), -1 below sigma (-gamma + m), 0 otherwise.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/noise_model.hpp"
#include "sramp/signal_synth.hpp"

namespace sramp {

struct QuantizerConfig {
  double gamma = 1.0;             ///< normalized threshold, units of sigma
  double sigma = 1.0;             ///< noise standard deviation
  double m = kRayleighMean;       ///< mean of the normalized noise

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("m must be positive");
  }

  double upper_threshold() const noexcept { return sigma * (gamma + m); }
  double lower_threshold() const noexcept { return sigma * (-gamma + m); }
};

struct QuantizedCounts {
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  std::size_t n_zero = 0;

  std::size_t total() const noexcept { return n_plus + n_minus + n_zero; }
  bool operator==(const QuantizedCounts&) const = default;
};

struct QuantizedSeries {
  std::vector<std::int8_t> levels;
  QuantizedCounts counts;
};

/// Samples exactly on a threshold map to 0.
inline std::int8_t quantize_sample(double x, double lower, double upper) noexcept {
  if (x > upper) return 1;
  if (x < lower) return -1;
  return 0;
}

inline QuantizedSeries quantize(std::span<const double> x, const QuantizerConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw InvalidArgument("quantize: empty series");
  const double lo = cfg.lower_threshold();
  const double hi = cfg.upper_threshold();
  QuantizedSeries out;
  out.levels.resize(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const auto y = quantize_sample(x[n], lo, hi);
    out.levels[n] = y;
    if (y > 0)
      ++out.counts.n_plus;
    else if (y < 0)
      ++out.counts.n_minus;
    else
      ++out.counts.n_zero;
  }
  return out;
}

inline QuantizedSeries quantize(const TimeSeries& ts, const QuantizerConfig& cfg) {
  return quantize(std::span<const double>(ts.samples), cfg);
}

/// Tallies an existing ternary sequence. Values other than -1/0/+1 are rejected.
inline QuantizedCounts count_levels(std::span<const std::int8_t> levels) {
  QuantizedCounts c;
  for (auto y : levels) {
    switch (y) {
      case 1: ++c.n_plus; break;
      case -1: ++c.n_minus; break;
      case 0: ++c.n_zero; break;
      default: throw InvalidArgument("ternary sequence holds a value outside {-1, 0, 1}");
    }
  }
  return c;
}

/// Unit-variance Rayleigh F, f and f' (derivative in the argument) at the
/// two normalized threshold arguments gamma + m and -gamma + m.
struct ThresholdStats {
  double F_plus = 0.0, F_minus = 0.0;
  double f_plus = 0.0, f_minus = 0.0;
  double fp_plus = 0.0, fp_minus = 0.0;
  /// 1 - F_plus without cancellation.
  double sf_plus = 1.0;
};

inline ThresholdStats threshold_stats(double gamma, double m = kRayleighMean) {
  const double up = gamma + m;
  const double lo = -gamma + m;
  ThresholdStats t;
  t.F_plus = cdf_unit(up);
  t.sf_plus = sf_unit(up);
  t.F_minus = cdf_unit(lo);
  t.f_plus = pdf_unit(up);
  t.f_minus = pdf_unit(lo);
  t.fp_plus = pdf_unit_derivative(up);
  t.fp_minus = pdf_unit_derivative(lo);
  return t;
}

inline ThresholdStats threshold_stats(const QuantizerConfig& cfg) {
  return threshold_stats(cfg.gamma, cfg.m);
}

/// P(y = +1) and P(y = -1) when the normalized signal value is `s`.
struct LevelProbabilities {
  double plus = 0.0;
  double minus = 0.0;
  double zero() const noexcept { return 1.0 - plus - minus; }
};

inline LevelProbabilities level_probabilities(double gamma, double m, double s) noexcept {
  return {sf_unit(gamma + m - s), cdf_unit(-gamma + m - s)};
}

enum class MeanModel { exact, linearized };

/// E[y_n] for a sinusoid of normalized amplitude A at sample n. The
/// linearized model keeps only the first-order term in A.
inline double expected_output_mean(const QuantizerConfig& cfg, double amplitude, double f0,
                                   std::size_t n, MeanModel model = MeanModel::exact) {
  const double c = std::cos(carrier_phase(f0, n));
  if (model == MeanModel::linearized) {
    const auto t = threshold_stats(cfg);
    return t.sf_plus - t.F_minus + amplitude * c * (t.f_plus + t.f_minus);
  }
  const auto p = level_probabilities(cfg.gamma, cfg.m, amplitude * c);
  return p.plus - p.minus;
}

/// Time-averaged output variance in the small-signal limit:
/// (1 - F+ + F-) - (1 - F+ - F-)^2.
inline double time_avg_output_variance(const QuantizerConfig& cfg) {
  const auto t = threshold_stats(cfg);
  const double power = t.sf_plus + t.F_minus;
  const double mean = t.sf_plus - t.F_minus;
  return power - mean * mean;
}

}  // namespace sramp
