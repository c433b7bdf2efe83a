#pragma once

// Rayleigh noise model. The unit-variance form (scale 1/a, mean m) is the
// canonical one; physical scales only appear at the boundary.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/rng.hpp"

namespace sramp {

/// a = sqrt(2 - pi/2): the unit-variance Rayleigh has scale 1/a.
inline const double kRayleighA = std::sqrt(2.0 - std::numbers::pi / 2.0);
/// a^2, used throughout the pdf/cdf expressions.
inline const double kRayleighA2 = 2.0 - std::numbers::pi / 2.0;
/// m = sqrt(pi / (4 - pi)): mean of the unit-variance Rayleigh.
inline const double kRayleighMean = std::sqrt(std::numbers::pi / (4.0 - std::numbers::pi));

struct RayleighParams {
  double s = 1.0 / kRayleighA;  ///< scale of the raw (physical) noise
  double a = kRayleighA;
  double m = kRayleighMean;

  static RayleighParams with_scale(double scale) {
    if (!(scale > 0.0)) throw InvalidArgument("Rayleigh scale must be positive");
    return RayleighParams{scale, kRayleighA, kRayleighMean};
  }
};

/// Density of the unit-variance Rayleigh: a^2 w exp(-a^2 w^2 / 2), zero for w <= 0.
inline double pdf_unit(double w) noexcept {
  if (!(w > 0.0)) return 0.0;
  return kRayleighA2 * w * std::exp(-0.5 * kRayleighA2 * w * w);
}

/// Distribution function 1 - exp(-a^2 w^2 / 2), zero for w <= 0.
inline double cdf_unit(double w) noexcept {
  if (!(w > 0.0)) return 0.0;
  return -std::expm1(-0.5 * kRayleighA2 * w * w);
}

/// Survival function 1 - cdf_unit(w), computed without cancellation.
inline double sf_unit(double w) noexcept {
  if (!(w > 0.0)) return 1.0;
  return std::exp(-0.5 * kRayleighA2 * w * w);
}

/// d/dw pdf_unit(w) = a^2 exp(-a^2 w^2 / 2) (1 - a^2 w^2), zero for w <= 0.
inline double pdf_unit_derivative(double w) noexcept {
  if (!(w > 0.0)) return 0.0;
  const double aw2 = kRayleighA2 * w * w;
  return kRayleighA2 * std::exp(-0.5 * aw2) * (1.0 - aw2);
}

/// Draws one Rayleigh variate of the given scale by inversion.
inline double draw_rayleigh(Rng& rng, double scale) noexcept {
  return scale * std::sqrt(-2.0 * std::log(rng.uniform_open()));
}

/// n i.i.d. Rayleigh draws of the given scale, deterministic in `seed`.
inline std::vector<double> sample(std::size_t n, double scale, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("sample: n must be at least 1");
  if (!(scale > 0.0)) throw InvalidArgument("sample: scale must be positive");
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = draw_rayleigh(rng, scale);
  return out;
}

/// Maximum-likelihood Rayleigh scale, sqrt(sum r^2 / 2N).
inline double fit_scale(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("fit_scale: need at least 2 samples");
  double sum_sq = 0.0;
  for (double r : samples) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("fit_scale: samples must be finite and non-negative");
    sum_sq += r * r;
  }
  const double s = std::sqrt(sum_sq / (2.0 * static_cast<double>(samples.size())));
  if (!(s > 0.0)) throw InvalidArgument("fit_scale: all samples are zero");
  return s;
}

}  // namespace sramp
