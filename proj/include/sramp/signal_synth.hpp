#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/noise_model.hpp"
#include "sramp/numeric.hpp"
#include "sramp/rng.hpp"

namespace sramp {

/// Parameters of a sinusoid in scaled unit-variance Rayleigh noise:
///   x_n = sigma * (A cos(2 pi f0 n + phi) + w_n),  n = 0..N-1.
struct SignalSpec {
  double amplitude = 0.0;  ///< A, relative to the noise standard deviation
  double f0 = 0.1;         ///< cycles per sample, in (0, 0.5)
  double phase = 0.0;      ///< phi in [0, 2 pi)
  double sigma = 1.0;      ///< noise standard deviation, physical units
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
      throw InvalidArgument("amplitude must be finite and non-negative");
    if (!(f0 > 0.0 && f0 < 0.5)) throw InvalidArgument("f0 must lie in (0, 0.5) cycles/sample");
    if (!(phase >= 0.0 && phase < 2.0 * std::numbers::pi))
      throw InvalidArgument("phase must lie in [0, 2 pi)");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
    if (n_samples == 0) throw InvalidArgument("n_samples must be at least 1");
  }
};

/// Uniformly sampled intensity record.
struct TimeSeries {
  std::vector<double> samples;
  std::optional<double> sample_rate_hz;

  std::size_t size() const noexcept { return samples.size(); }
  bool operator==(const TimeSeries&) const = default;
};

/// 2 pi f0 n reduced to [0, 2 pi) before scaling, so long records keep full
/// phase precision.
inline double carrier_phase(double f0, std::size_t n) noexcept {
  const double cycles = f0 * static_cast<double>(n);
  return 2.0 * std::numbers::pi * (cycles - std::floor(cycles));
}

inline TimeSeries synthesize(const SignalSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const double scale = 1.0 / kRayleighA;
  TimeSeries ts;
  ts.samples.resize(spec.n_samples);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    const double w = draw_rayleigh(rng, scale);
    const double s = spec.amplitude * std::cos(carrier_phase(spec.f0, n) + spec.phase);
    ts.samples[n] = spec.sigma * (s + w);
  }
  return ts;
}

/// Input SNR is the sinusoid power A^2/2 over the unit noise variance.
inline double snr_db_to_amplitude(double snr_db) {
  return std::sqrt(2.0 * std::pow(10.0, snr_db / 10.0));
}

inline double amplitude_to_snr_db(double amplitude) {
  return 10.0 * std::log10(0.5 * amplitude * amplitude);
}

/// A 1-D scan target: true normalized amplitude at each detector position.
struct Phantom {
  std::vector<double> positions;   ///< strictly increasing
  std::vector<double> amplitudes;  ///< A(x), same length as positions
  std::string turbidity_label;     ///< metadata only

  void validate() const {
    if (positions.empty()) throw InvalidArgument("phantom has no positions");
    if (positions.size() != amplitudes.size())
      throw InvalidArgument("phantom amplitude profile must cover every position");
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (!std::isfinite(positions[i])) throw InvalidArgument("phantom position is not finite");
      if (i > 0 && !(positions[i] > positions[i - 1]))
        throw InvalidArgument("phantom positions must be strictly increasing");
      if (!(amplitudes[i] >= 0.0) || !std::isfinite(amplitudes[i]))
        throw InvalidArgument("phantom amplitudes must be finite and non-negative");
    }
  }
};

/// Piecewise rod profile: background outside, plateau inside, a raised-cosine
/// bump at the centre and a notch at each rod edge.
struct RodParams {
  double background = 0.02;
  double plateau = 0.06;
  double bump_peak = 0.10;
  double edge_notch = 0.005;
  std::size_t n_positions = 41;
  std::size_t rod_half_width = 8;   ///< in positions; edges sit at centre +- this
  std::size_t bump_half_width = 4;  ///< in positions
  double spacing = 1.0;

  /// Same shape with every level multiplied so that bump_peak == peak.
  RodParams scaled_to_peak(double peak) const {
    const double k = peak / bump_peak;
    RodParams p = *this;
    p.background *= k;
    p.plateau *= k;
    p.bump_peak = peak;
    p.edge_notch *= k;
    return p;
  }

  /// Positions of the two edge notches.
  std::pair<double, double> edges() const {
    const auto c = static_cast<double>(n_positions / 2);
    const auto h = static_cast<double>(rod_half_width);
    return {(c - h) * spacing, (c + h) * spacing};
  }
};

inline Phantom rod_phantom(const RodParams& p, std::string label = {}) {
  if (p.n_positions < 7) throw InvalidArgument("rod phantom needs at least 7 positions");
  if (p.rod_half_width == 0 || 2 * p.rod_half_width >= p.n_positions)
    throw InvalidArgument("rod must fit inside the scan");
  Phantom ph;
  ph.turbidity_label = std::move(label);
  const auto centre = static_cast<long>(p.n_positions / 2);
  const auto half = static_cast<long>(p.rod_half_width);
  const auto bump = static_cast<double>(p.bump_half_width);
  for (std::size_t i = 0; i < p.n_positions; ++i) {
    const long d = std::labs(static_cast<long>(i) - centre);
    double level = p.background;
    if (d == half) {
      level = p.edge_notch;
    } else if (d < half) {
      level = p.plateau;
      if (static_cast<double>(d) < bump)
        level += (p.bump_peak - p.plateau) * 0.5 *
                 (1.0 + std::cos(std::numbers::pi * static_cast<double>(d) / bump));
    }
    ph.positions.push_back(static_cast<double>(i) * p.spacing);
    ph.amplitudes.push_back(level);
  }
  return ph;
}

/// High-turbidity stand-in (weak residual sinusoid, A_peak = 0.1).
inline Phantom high_turbidity_phantom() { return rod_phantom(RodParams{}, "L/l* = 5.05"); }

/// Low-turbidity stand-in (A_peak = 0.3).
inline Phantom low_turbidity_phantom() {
  return rod_phantom(RodParams{}.scaled_to_peak(0.3), "L/l* = 2.14");
}

inline Phantom flat_phantom(std::size_t n_positions = 41, double level = 0.0) {
  Phantom ph;
  ph.turbidity_label = "flat";
  for (std::size_t i = 0; i < n_positions; ++i) {
    ph.positions.push_back(static_cast<double>(i));
    ph.amplitudes.push_back(level);
  }
  return ph;
}

/// One series per phantom position. Position i uses seed
/// derive_seed(tmpl.seed, i); tmpl.amplitude is ignored.
inline std::vector<TimeSeries> phantom_scan(const Phantom& phantom, const SignalSpec& tmpl) {
  phantom.validate();
  SignalSpec probe = tmpl;
  probe.amplitude = 0.0;
  probe.validate();
  std::vector<TimeSeries> out(phantom.positions.size());
  numeric::parallel_for(out.size(), [&](std::size_t i) {
    SignalSpec s = tmpl;
    s.amplitude = phantom.amplitudes[i];
    s.seed = derive_seed(tmpl.seed, i);
    out[i] = synthesize(s);
  });
  return out;
}

}  // namespace sramp
