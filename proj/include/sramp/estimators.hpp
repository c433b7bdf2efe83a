#pragma once

// Amplitude estimators for a weak sinusoid in Rayleigh noise.
//
// Two families:
//  * coherent estimators on the sigma-normalized series (lock-in quadratures
//    and the Rayleigh maximum-likelihood fit), which need the exact frequency;
//  * estimators on the three-level quantizer output (crossover probability,
//    quantized-data likelihood, expected output power). The count-based ones
//    only see (N+, N-, N0) and are blind to the frequency.
//
// All estimators work in normalized units (noise standard deviation 1) and
// report the physical amplitude as A * sigma.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/noise_model.hpp"
#include "sramp/numeric.hpp"
#include "sramp/quantizer.hpp"
#include "sramp/signal_synth.hpp"
#include "sramp/sr_theory.hpp"

namespace sramp {

enum class Method {
  lockin,
  mle_linear,
  crossover_numeric,
  crossover_closed,
  qmle_iterative,
  qmle_closed,
  power,
};

inline constexpr std::array<Method, 7> kAllMethods = {
    Method::lockin,         Method::mle_linear,  Method::crossover_numeric, Method::crossover_closed,
    Method::qmle_iterative, Method::qmle_closed, Method::power,
};

inline std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::lockin: return "lockin";
    case Method::mle_linear: return "mle_linear";
    case Method::crossover_numeric: return "crossover_numeric";
    case Method::crossover_closed: return "crossover_closed";
    case Method::qmle_iterative: return "qmle_iterative";
    case Method::qmle_closed: return "qmle_closed";
    case Method::power: return "power";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) noexcept {
  for (auto m : kAllMethods)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

/// True for estimators that only use the quantizer counts.
constexpr bool is_count_based(Method m) noexcept {
  return m == Method::crossover_numeric || m == Method::crossover_closed || m == Method::qmle_closed ||
         m == Method::power;
}

struct AmplitudeEstimate {
  Method method = Method::lockin;
  double amplitude_physical = 0.0;
  double amplitude_normalized = 0.0;
  double sigma_used = 1.0;
  bool converged = true;
  std::size_t iterations = 0;
  bool clamped = false;  ///< a negative radicand or below-null statistic was mapped to A = 0

  bool operator==(const AmplitudeEstimate&) const = default;
};

namespace detail {

inline AmplitudeEstimate make_estimate(Method m, double a_norm, double sigma) {
  AmplitudeEstimate e;
  e.method = m;
  e.amplitude_normalized = a_norm;
  e.sigma_used = sigma;
  e.amplitude_physical = a_norm * sigma;
  return e;
}

inline void require_counts(const QuantizedCounts& c) {
  if (c.total() == 0) throw InvalidArgument("quantized counts are empty");
}

inline void require_f0(double f0) {
  if (!(f0 > 0.0 && f0 < 0.5)) throw InvalidArgument("f0 must lie in (0, 0.5) cycles/sample");
}

/// Upper end of every 1-D amplitude bracket.
inline double amplitude_bracket(const QuantizerConfig& cfg) { return cfg.gamma + cfg.m; }

inline constexpr double kAmplitudeTol = 1e-9;

}  // namespace detail

// ---------------------------------------------------------------------------
// Noise level

/// Sample standard deviation (N - 1 denominator). Sums run over a sorted copy
/// so the result does not depend on sample order.
inline double estimate_sigma(std::span<const double> x) {
  if (x.size() < 2) throw InvalidArgument("estimate_sigma: need at least 2 samples");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) throw InvalidArgument("estimate_sigma: constant or non-finite series");
  return sd;
}

inline double estimate_sigma(const TimeSeries& ts) { return estimate_sigma(std::span<const double>(ts.samples)); }

/// Removes the sinusoid's share A^2/2 from the sample variance.
inline double signal_corrected_sigma(double sample_sd, double amplitude) {
  return sample_sd / std::sqrt(1.0 + 0.5 * amplitude * amplitude);
}

// ---------------------------------------------------------------------------
// Coherent estimators

/// Cosine and sine carriers cos(2 pi f0 n), sin(2 pi f0 n).
struct Carrier {
  std::vector<double> c, s;
  Carrier(std::size_t n, double f0) : c(n), s(n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double th = carrier_phase(f0, i);
      c[i] = std::cos(th);
      s[i] = std::sin(th);
    }
  }
};

struct Quadratures {
  double cosine = 0.0;  ///< (2/N) sum x_n cos(2 pi f0 n)
  double sine = 0.0;    ///< (2/N) sum x_n sin(2 pi f0 n)
  double amplitude() const noexcept { return std::hypot(cosine, sine); }
};

inline Quadratures lockin_quadratures(std::span<const double> xn, const Carrier& carrier) {
  double qc = 0.0, qs = 0.0;
  for (std::size_t i = 0; i < xn.size(); ++i) {
    qc += xn[i] * carrier.c[i];
    qs += xn[i] * carrier.s[i];
  }
  const double k = 2.0 / static_cast<double>(xn.size());
  return {k * qc, k * qs};
}

namespace detail {

inline void require_coherent_input(std::size_t n, double f0) {
  require_f0(f0);
  if (static_cast<double>(n) < 2.0 / f0) throw InvalidArgument("series shorter than 2/f0");
}

}  // namespace detail

/// Lock-in amplitude of an already normalized series.
inline AmplitudeEstimate lockin_normalized(std::span<const double> xn, double f0, double sigma) {
  detail::require_coherent_input(xn.size(), f0);
  const Carrier carrier(xn.size(), f0);
  auto e = detail::make_estimate(Method::lockin, lockin_quadratures(xn, carrier).amplitude(), sigma);
  e.iterations = 1;
  return e;
}

struct MleOptions {
  double tol = 1e-8;              ///< on the fixed-point step max|T(alpha) - alpha|
  std::size_t max_iterations = 1000;
  double min_residual = 1e-12;    ///< abort threshold for x_n - alpha . u_n
};

namespace detail {

// The Rayleigh likelihood fixed point
//   alpha_c = (2/N) sum (x_n - (1/a^2) / r_n) cos_n,   r_n = x_n - alpha_c cos_n - alpha_s sin_n
// (and likewise for alpha_s) is the stationarity condition of the strictly
// concave potential
//   psi(alpha) = (1/a^2) sum log r_n + sum x_n (alpha . u_n) - (N/4) |alpha|^2
// on the region where every r_n > 0. Plain substitution diverges because the
// 1/r_n terms make the map expansive, so psi is maximized by Newton's method
// with a feasibility-preserving backtracking line search instead.
struct MlePotential {
  std::span<const double> x;
  const Carrier& u;
  double inv_a2 = 1.0 / kRayleighA2;

  double min_residual(double ac, double as) const {
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) mn = std::min(mn, x[i] - ac * u.c[i] - as * u.s[i]);
    return mn;
  }

  /// psi, or -inf outside the feasible region.
  double value(double ac, double as) const {
    double log_sum = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - ac * u.c[i] - as * u.s[i];
      if (!(r > 0.0)) return -std::numeric_limits<double>::infinity();
      log_sum += std::log(r);
      lin += x[i] * (ac * u.c[i] + as * u.s[i]);
    }
    const auto n = static_cast<double>(x.size());
    return inv_a2 * log_sum + lin - 0.25 * n * (ac * ac + as * as);
  }

  struct Local {
    double gc, gs;            // gradient
    double hcc, hcs, hss;     // Hessian (negative definite)
    double min_r;
  };

  Local local(double ac, double as) const {
    double sxc = 0, sxs = 0, sc = 0, ss = 0, scc = 0, scs = 0, sss = 0;
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double c = u.c[i], s = u.s[i];
      const double r = x[i] - ac * c - as * s;
      mn = std::min(mn, r);
      const double ir = 1.0 / r;
      const double ir2 = ir * ir;
      sxc += x[i] * c;
      sxs += x[i] * s;
      sc += c * ir;
      ss += s * ir;
      scc += c * c * ir2;
      scs += c * s * ir2;
      sss += s * s * ir2;
    }
    const auto half_n = 0.5 * static_cast<double>(x.size());
    return {sxc - inv_a2 * sc - half_n * ac, sxs - inv_a2 * ss - half_n * as,
            -inv_a2 * scc - half_n,          -inv_a2 * scs,
            -inv_a2 * sss - half_n,          mn};
  }
};

struct Point2 {
  double c, s;
};

/// Maximizes min_n (x_n - alpha . u_n) over a box around `start`. Only
/// constraints that can be active inside the box are kept.
inline std::pair<Point2, double> maximin_residual(std::span<const double> x, const Carrier& u, Point2 start,
                                                  double half_width) {
  double g0 = std::numeric_limits<double>::infinity();
  std::vector<double> r0(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    r0[i] = x[i] - start.c * u.c[i] - start.s * u.s[i];
    g0 = std::min(g0, r0[i]);
  }
  const double keep_below = g0 + 2.0 * std::numbers::sqrt2 * half_width;
  std::vector<std::array<double, 3>> active;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (r0[i] <= keep_below) active.push_back({x[i], u.c[i], u.s[i]});

  auto g = [&](double ac, double as) {
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& a : active) mn = std::min(mn, a[0] - ac * a[1] - as * a[2]);
    return mn;
  };
  double best_s = start.s;
  auto outer = numeric::golden_section_max(
      [&](double ac) {
        auto in = numeric::golden_section_max([&](double as) { return g(ac, as); }, start.s - half_width,
                                              start.s + half_width, 1e-12);
        return in.value;
      },
      start.c - half_width, start.c + half_width, 1e-12);
  auto inner = numeric::golden_section_max([&](double as) { return g(outer.x, as); }, start.s - half_width,
                                           start.s + half_width, 1e-12);
  best_s = inner.x;
  return {{outer.x, best_s}, inner.value};
}

}  // namespace detail

struct MleLinearResult {
  double alpha_c = 0.0, alpha_s = 0.0;  ///< cosine and sine amplitudes
  bool converged = false;
  std::size_t iterations = 0;
  double amplitude() const noexcept { return std::hypot(alpha_c, alpha_s); }
};

/// Rayleigh maximum-likelihood quadratures of a normalized series, started
/// from the lock-in values. If no parameter value makes every residual
/// positive (the likelihood is zero everywhere), the lock-in starting point is
/// returned with converged = false.
inline MleLinearResult mle_linear_quadratures(std::span<const double> xn, double f0, const MleOptions& opt = {}) {
  detail::require_coherent_input(xn.size(), f0);
  const Carrier carrier(xn.size(), f0);
  const auto init = lockin_quadratures(xn, carrier);
  const detail::MlePotential pot{xn, carrier};

  MleLinearResult result{init.cosine, init.sine, false, 0};
  detail::Point2 alpha{init.cosine, init.sine};
  if (!(pot.min_residual(alpha.c, alpha.s) > opt.min_residual)) {
    const double n = static_cast<double>(xn.size());
    const double half_width = std::max(0.05, 8.0 * std::sqrt(2.0 / n));
    const auto [p, g] = detail::maximin_residual(xn, carrier, alpha, half_width);
    if (!(g > opt.min_residual)) return result;
    alpha = p;
  }

  const double step_scale = 2.0 / static_cast<double>(xn.size());
  double psi = pot.value(alpha.c, alpha.s);
  const double psi_resolution = 8.0 * std::numeric_limits<double>::epsilon() *
                                std::sqrt(static_cast<double>(xn.size())) * (std::abs(psi) + 1.0);
  for (std::size_t it = 0; it <= opt.max_iterations; ++it) {
    const auto loc = pot.local(alpha.c, alpha.s);
    if (!(loc.min_r > opt.min_residual)) break;
    result.alpha_c = alpha.c;
    result.alpha_s = alpha.s;
    result.iterations = it;
    if (step_scale * std::max(std::abs(loc.gc), std::abs(loc.gs)) < opt.tol) {
      result.converged = true;
      break;
    }
    if (it == opt.max_iterations) break;
    // Newton direction d = -H^{-1} g.
    const double det = loc.hcc * loc.hss - loc.hcs * loc.hcs;
    const double dc = -(loc.hss * loc.gc - loc.hcs * loc.gs) / det;
    const double ds = -(-loc.hcs * loc.gc + loc.hcc * loc.gs) / det;
    const double slope = loc.gc * dc + loc.gs * ds;
    // Near the optimum the predicted gain drops below the resolution of psi
    // (a sum of N rounded terms) while the gradient is still above tolerance
    // (the Hessian grows with the smallest residuals). Judge the full step by
    // the gradient there instead.
    if (slope < psi_resolution) {
      const double nc = alpha.c + dc, ns = alpha.s + ds;
      if (pot.min_residual(nc, ns) > opt.min_residual) {
        const auto next = pot.local(nc, ns);
        if (std::hypot(next.gc, next.gs) < std::hypot(loc.gc, loc.gs)) {
          alpha = {nc, ns};
          psi = pot.value(nc, ns);
          continue;
        }
      }
    }
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const double nc = alpha.c + t * dc, ns = alpha.s + t * ds;
      const double v = pot.value(nc, ns);
      if (v > psi && v >= psi + 1e-4 * t * slope) {
        alpha = {nc, ns};
        psi = v;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // No further ascent is representable; accept if already at the optimum.
      result.converged = step_scale * std::max(std::abs(loc.gc), std::abs(loc.gs)) < 1e3 * opt.tol;
      break;
    }
  }
  return result;
}

inline AmplitudeEstimate mle_linear_normalized(std::span<const double> xn, double f0, double sigma,
                                               const MleOptions& opt = {}) {
  const auto r = mle_linear_quadratures(xn, f0, opt);
  auto e = detail::make_estimate(Method::mle_linear, r.amplitude(), sigma);
  e.converged = r.converged;
  e.iterations = r.iterations;
  return e;
}

// ---------------------------------------------------------------------------
// Count-based estimators

/// Period average of P(y = -1) for amplitude A.
inline double mean_lower_crossing(const QuantizerConfig& cfg, double amplitude) {
  const double arg = -cfg.gamma + cfg.m;
  return numeric::period_average([&](double th) { return cdf_unit(arg - amplitude * std::cos(th)); });
}

/// Period average of P(y = 1) + P(y = -1), the expected output power.
inline double mean_output_power(const QuantizerConfig& cfg, double amplitude) {
  const double up = cfg.gamma + cfg.m;
  const double lo = -cfg.gamma + cfg.m;
  return numeric::period_average([&](double th) {
    const double s = amplitude * std::cos(th);
    return sf_unit(up - s) + cdf_unit(lo - s);
  });
}

namespace detail {

/// Solves model(A) = target on [0, gamma + m] given model(0) = null_value and
/// model increasing near 0.
template <class Model>
AmplitudeEstimate solve_period_average(Method method, const QuantizerConfig& cfg, double target,
                                       double null_value, Model&& model) {
  if (target <= null_value) {
    auto e = make_estimate(method, 0.0, cfg.sigma);
    e.clamped = target < null_value;
    return e;
  }
  const auto r = numeric::bisect([&](double a) { return model(a) - target; }, 0.0, amplitude_bracket(cfg),
                                 kAmplitudeTol);
  auto e = make_estimate(method, r.root, cfg.sigma);
  e.iterations = r.iterations;
  return e;
}

}  // namespace detail

/// Matches the observed lower-crossing fraction N-/N to its period average.
inline AmplitudeEstimate crossover_estimate_numeric(const QuantizedCounts& counts, const QuantizerConfig& cfg) {
  cfg.validate();
  detail::require_counts(counts);
  const double target = static_cast<double>(counts.n_minus) / static_cast<double>(counts.total());
  return detail::solve_period_average(Method::crossover_numeric, cfg, target, cdf_unit(-cfg.gamma + cfg.m),
                                      [&](double a) { return mean_lower_crossing(cfg, a); });
}

/// Small-signal inversion A = sqrt(4 (N-/N - F-) / f'-).
inline AmplitudeEstimate crossover_estimate_closed(const QuantizedCounts& counts, const QuantizerConfig& cfg) {
  cfg.validate();
  detail::require_counts(counts);
  const auto t = threshold_stats(cfg);
  if (!(t.fp_minus > 0.0))
    throw InvalidArgument("crossover_estimate_closed: f'(-gamma + m) must be positive at gamma = " +
                          std::to_string(cfg.gamma));
  const double frac = static_cast<double>(counts.n_minus) / static_cast<double>(counts.total());
  const double rad = 4.0 * (frac - t.F_minus) / t.fp_minus;
  auto e = detail::make_estimate(Method::crossover_closed, rad > 0.0 ? std::sqrt(rad) : 0.0, cfg.sigma);
  e.clamped = rad < 0.0;
  return e;
}

/// Matches the observed fraction of nonzero outputs to the expected power.
inline AmplitudeEstimate power_estimate(const QuantizedCounts& counts, const QuantizerConfig& cfg) {
  cfg.validate();
  detail::require_counts(counts);
  const double target =
      static_cast<double>(counts.n_plus + counts.n_minus) / static_cast<double>(counts.total());
  const auto t = threshold_stats(cfg);
  return detail::solve_period_average(Method::power, cfg, target, t.sf_plus + t.F_minus,
                                      [&](double a) { return mean_output_power(cfg, a); });
}

/// Coefficients of a x^2 + b x + c = 0 in x = A^2 obtained by clearing the
/// denominators of the small-signal score equation for the quantized counts.
struct QmleQuadratic {
  double a = 0.0, b = 0.0, c = 0.0;
};

inline QmleQuadratic qmle_quadratic(const QuantizedCounts& counts, const ThresholdStats& t) {
  const auto N = static_cast<double>(counts.total());
  const auto np = static_cast<double>(counts.n_plus);
  const auto nm = static_cast<double>(counts.n_minus);
  const double n0 = N - nm - np;
  const double dp = t.fp_plus, dm = t.fp_minus;
  const double Fp = t.F_plus, Fm = t.F_minus, sp = t.sf_plus;
  QmleQuadratic q;
  q.a = -N * dp * dm * (dp - dm) / 16.0;
  q.b = 0.25 * (-dp * dm * (Fp - Fm) * (np + nm) +
                (dp - dm) * (-np * dp * Fm + nm * dm * sp + n0 * (dm * sp - Fm * dp)));
  q.c = (Fp - Fm) * (-np * dp * Fm + nm * dm * sp) + Fm * n0 * (dp - dm) * sp;
  return q;
}

/// Left side of the small-signal score equation in x = A^2, divided by N.
inline double qmle_score(const QuantizedCounts& counts, const ThresholdStats& t, double x) {
  const auto N = static_cast<double>(counts.total());
  const double np = static_cast<double>(counts.n_plus) / N;
  const double nm = static_cast<double>(counts.n_minus) / N;
  const double n0 = static_cast<double>(counts.n_zero) / N;
  const double dp = t.fp_plus, dm = t.fp_minus;
  const double u = 0.25 * x;
  return -np * dp / (t.sf_plus - u * dp) + nm * dm / (t.F_minus + u * dm) +
         n0 * (dp - dm) / (t.F_plus - t.F_minus + u * (dp - dm));
}

/// Largest x = A^2 at which every probability in the small-signal model stays
/// positive, capped at (gamma + m)^2.
inline double qmle_domain_limit(const ThresholdStats& t, const QuantizerConfig& cfg) {
  double lim = detail::amplitude_bracket(cfg) * detail::amplitude_bracket(cfg);
  auto cap = [&](double base, double slope) {
    if (slope < 0.0) lim = std::min(lim, -base / slope);
  };
  cap(t.sf_plus, -0.25 * t.fp_plus);
  cap(t.F_minus, 0.25 * t.fp_minus);
  cap(t.F_plus - t.F_minus, 0.25 * (t.fp_plus - t.fp_minus));
  return lim;
}

/// Root of the small-signal score in x = A^2 by bisection; empty when the
/// score is not positive at x = 0 or keeps its sign over the domain.
inline std::optional<double> qmle_score_root(const QuantizedCounts& counts, const QuantizerConfig& cfg) {
  const auto t = threshold_stats(cfg);
  const double hi = qmle_domain_limit(t, cfg) * (1.0 - 1e-12);
  auto f = [&](double x) { return qmle_score(counts, t, x); };
  if (!(f(0.0) > 0.0) || !(f(hi) < 0.0)) return std::nullopt;
  return numeric::bisect(f, 0.0, hi, 1e-15).root;
}

/// Closed-form quantized-likelihood amplitude A = sqrt((-b - sqrt(b^2 - 4ac)) / 2a).
/// Falls back to a direct root of the score when the radicands go negative.
inline AmplitudeEstimate qmle_closed(const QuantizedCounts& counts, const QuantizerConfig& cfg) {
  cfg.validate();
  detail::require_counts(counts);
  const auto t = threshold_stats(cfg);
  const auto q = qmle_quadratic(counts, t);
  const double disc = q.b * q.b - 4.0 * q.a * q.c;
  double x = std::numeric_limits<double>::quiet_NaN();
  if (disc >= 0.0 && q.a != 0.0) {
    const double sd = std::sqrt(disc);
    // (-b - sqrt(disc)) / 2a rewritten as 2c / (-b + sqrt(disc)) when b < 0
    // to avoid cancellation; both are the same root.
    x = q.b < 0.0 ? 2.0 * q.c / (-q.b + sd) : (-q.b - sd) / (2.0 * q.a);
  }
  if (std::isfinite(x) && x >= 0.0) {
    auto e = detail::make_estimate(Method::qmle_closed, std::sqrt(x), cfg.sigma);
    e.iterations = 0;
    return e;
  }
  const auto root = qmle_score_root(counts, cfg);
  auto e = detail::make_estimate(Method::qmle_closed, root ? std::sqrt(*root) : 0.0, cfg.sigma);
  e.clamped = true;
  return e;
}

// ---------------------------------------------------------------------------
// Quantized-data likelihood over (A, phi)

struct QmleIterativeOptions {
  std::size_t phase_grid = 64;
  /// Sample phases 2 pi f0 n are pooled into this many equal bins; within a
  /// bin the carrier varies by at most A * pi / phase_bins.
  std::size_t phase_bins = 1024;
  double amplitude_tol = 1e-9;
  double phase_tol = 1e-7;
};

namespace detail {

struct PhaseBin {
  double cos_t, sin_t;
  double n_minus, n_zero, n_plus;
};

inline std::vector<PhaseBin> pool_by_phase(std::span<const std::int8_t> levels, double f0, std::size_t bins) {
  std::vector<std::array<double, 3>> tally(bins, {0.0, 0.0, 0.0});
  for (std::size_t n = 0; n < levels.size(); ++n) {
    const double cycles = f0 * static_cast<double>(n);
    auto b = static_cast<std::size_t>((cycles - std::floor(cycles)) * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    const int y = levels[n];
    if (y < -1 || y > 1) throw InvalidArgument("ternary sequence holds a value outside {-1, 0, 1}");
    tally[b][static_cast<std::size_t>(y + 1)] += 1.0;
  }
  std::vector<PhaseBin> out;
  for (std::size_t b = 0; b < bins; ++b) {
    const auto& t = tally[b];
    if (t[0] + t[1] + t[2] == 0.0) continue;
    const double th = 2.0 * std::numbers::pi * (static_cast<double>(b) + 0.5) / static_cast<double>(bins);
    out.push_back({std::cos(th), std::sin(th), t[0], t[1], t[2]});
  }
  return out;
}

inline double term(double count, double p) {
  if (count == 0.0) return 0.0;
  if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
  return count * std::log(p);
}

}  // namespace detail

/// Log-likelihood of a phase-pooled ternary record under amplitude A and phase phi.
inline double qmle_log_likelihood(std::span<const detail::PhaseBin> bins, const QuantizerConfig& cfg,
                                  double amplitude, double phase) {
  const double cp = std::cos(phase), sp = std::sin(phase);
  double ll = 0.0;
  for (const auto& b : bins) {
    const double s = amplitude * (b.cos_t * cp - b.sin_t * sp);
    const auto p = level_probabilities(cfg.gamma, cfg.m, s);
    ll += detail::term(b.n_plus, p.plus) + detail::term(b.n_minus, p.minus) + detail::term(b.n_zero, p.zero());
    if (ll == -std::numeric_limits<double>::infinity()) return ll;
  }
  return ll;
}

/// Maximizes the exact quantized-data likelihood over amplitude and phase:
/// golden-section on A for each point of a phase grid, then one golden-section
/// refinement of the phase around the best grid point.
inline AmplitudeEstimate qmle_iterative(std::span<const std::int8_t> levels, const QuantizerConfig& cfg,
                                        double f0, const QmleIterativeOptions& opt = {}) {
  cfg.validate();
  detail::require_f0(f0);
  if (levels.empty()) throw InvalidArgument("qmle_iterative: empty ternary sequence");
  if (opt.phase_grid == 0 || opt.phase_bins == 0) throw InvalidArgument("qmle_iterative: bad grid options");
  const auto bins = detail::pool_by_phase(levels, f0, opt.phase_bins);
  const double a_hi = detail::amplitude_bracket(cfg);
  std::size_t iterations = 0;

  auto best_amplitude = [&](double phase) {
    auto r = numeric::golden_section_max(
        [&](double a) { return qmle_log_likelihood(bins, cfg, a, phase); }, 0.0, a_hi, opt.amplitude_tol);
    iterations += r.iterations;
    return r;
  };

  double best_phase = 0.0;
  numeric::MaxResult best;
  const double step = 2.0 * std::numbers::pi / static_cast<double>(opt.phase_grid);
  for (std::size_t j = 0; j < opt.phase_grid; ++j) {
    const double ph = step * static_cast<double>(j);
    const auto r = best_amplitude(ph);
    if (r.value > best.value) {
      best = r;
      best_phase = ph;
    }
  }
  const auto refined = numeric::golden_section_max(
      [&](double ph) {
        const auto r = best_amplitude(ph);
        return r.value;
      },
      best_phase - step, best_phase + step, opt.phase_tol);
  iterations += refined.iterations;
  if (refined.value > best.value) {
    best = best_amplitude(refined.x);
    best_phase = refined.x;
  }

  // A = 0 is phase-free and sits on the bracket edge, so compare it directly.
  // Near A = 0 the likelihood is flat to rounding, so the null wins unless the
  // best interior value beats it by more than a few ulps.
  const double null_ll = qmle_log_likelihood(bins, cfg, 0.0, 0.0);
  double a_hat = best.x;
  double ll = best.value;
  const double resolution = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(null_ll);
  if (!(best.value > null_ll + resolution)) {
    a_hat = 0.0;
    ll = null_ll;
  }
  auto e = detail::make_estimate(Method::qmle_iterative, a_hat, cfg.sigma);
  e.iterations = iterations;
  e.converged = std::isfinite(ll);
  return e;
}

// ---------------------------------------------------------------------------
// Series-level entry point

struct EstimateOptions {
  double f0 = 0.1;                 ///< frequency handed to the estimator (cycles/sample)
  std::optional<double> gamma;     ///< default: optimal_threshold()
  std::optional<double> sigma;     ///< known noise level; estimated when empty
  std::size_t max_sigma_evaluations = 60;
  double sigma_rel_tol = 1e-9;
  MleOptions mle{};
  QmleIterativeOptions qmle{};
};

namespace detail {

inline AmplitudeEstimate estimate_at_sigma(std::span<const double> x, Method method, double sigma, double gamma,
                                           const EstimateOptions& opt) {
  switch (method) {
    case Method::lockin:
    case Method::mle_linear: {
      std::vector<double> xn(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] / sigma;
      return method == Method::lockin ? lockin_normalized(xn, opt.f0, sigma)
                                      : mle_linear_normalized(xn, opt.f0, sigma, opt.mle);
    }
    default: break;
  }
  const QuantizerConfig cfg{gamma, sigma, kRayleighMean};
  const auto q = quantize(x, cfg);
  switch (method) {
    case Method::crossover_numeric: return crossover_estimate_numeric(q.counts, cfg);
    case Method::crossover_closed: return crossover_estimate_closed(q.counts, cfg);
    case Method::qmle_closed: return qmle_closed(q.counts, cfg);
    case Method::power: return power_estimate(q.counts, cfg);
    case Method::qmle_iterative: return qmle_iterative(q.levels, cfg, opt.f0, opt.qmle);
    default: break;
  }
  throw InvalidArgument("unhandled estimator");
}

}  // namespace detail

/// Runs `method` on a raw series. Without a known sigma, the noise level is
/// the root of sigma = sd / sqrt(1 + A(sigma)^2 / 2), which removes the
/// sinusoid's variance share from the sample standard deviation sd.
///
/// Plain substitution on that equation oscillates for the threshold-based
/// methods: a small change in sigma moves the lower threshold enough to swing
/// A^2 by several times as much. For those methods A(sigma) grows with sigma,
/// so [sd / sqrt(1 + A(sd)^2 / 2), sd] brackets the root and regula falsi
/// (Illinois variant) finds it. The coherent methods, whose A(sigma) falls
/// with sigma, contract under substitution and settle in the bracketing loop.
inline AmplitudeEstimate estimate(std::span<const double> x, Method method, const EstimateOptions& opt = {}) {
  detail::require_f0(opt.f0);
  if (x.empty()) throw InvalidArgument("estimate: empty series");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) throw InvalidArgument("estimate: non-finite sample at index " + std::to_string(i));
  const double gamma = opt.gamma ? *opt.gamma : optimal_threshold();
  if (opt.sigma) {
    if (!(*opt.sigma > 0.0)) throw InvalidArgument("estimate: sigma must be positive");
    return detail::estimate_at_sigma(x, method, *opt.sigma, gamma, opt);
  }
  const double sd = estimate_sigma(x);
  const double tol = opt.sigma_rel_tol * sd;
  std::size_t budget = opt.max_sigma_evaluations;
  auto at = [&](double s) {
    if (budget > 0) --budget;
    return detail::estimate_at_sigma(x, method, s, gamma, opt);
  };
  auto residual = [&](double s, const AmplitudeEstimate& e) {
    return s - signal_corrected_sigma(sd, e.amplitude_normalized);
  };

  double hi = sd;
  auto e_hi = at(hi);
  double r_hi = residual(hi, e_hi);
  if (r_hi <= tol) return e_hi;

  double lo = signal_corrected_sigma(sd, e_hi.amplitude_normalized);
  auto e_lo = at(lo);
  double r_lo = residual(lo, e_lo);
  while (r_lo > 0.0) {
    if (r_lo <= tol || budget == 0) return e_lo;
    hi = lo;
    e_hi = e_lo;
    r_hi = r_lo;
    lo = signal_corrected_sigma(sd, e_lo.amplitude_normalized);
    e_lo = at(lo);
    r_lo = residual(lo, e_lo);
  }
  if (r_lo == 0.0) return e_lo;

  // r_lo < 0 < r_hi. Two updates on the same side fall back to a bisection
  // step, which bounds the work when A(sigma) is only known to solver
  // precision.
  int side = 0, repeats = 0;
  while (hi - lo > tol && budget > 0) {
    double mid = repeats >= 2 ? 0.5 * (lo + hi) : (lo * r_hi - hi * r_lo) / (r_hi - r_lo);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    const auto e = at(mid);
    const double r = residual(mid, e);
    if (r == 0.0) return e;
    const int now = r < 0.0 ? -1 : 1;
    repeats = now == side ? repeats + 1 : 1;
    if (now < 0) {
      lo = mid;
      e_lo = e;
      r_lo = r;
      if (side == -1) r_hi *= 0.5;
    } else {
      hi = mid;
      e_hi = e;
      r_hi = r;
      if (side == 1) r_lo *= 0.5;
    }
    side = now;
  }
  return -r_lo < r_hi ? e_lo : e_hi;
}

inline AmplitudeEstimate estimate(const TimeSeries& ts, Method method, const EstimateOptions& opt = {}) {
  return estimate(std::span<const double>(ts.samples), method, opt);
}

/// Lock-in amplitude from a raw series (sigma estimated unless given).
inline AmplitudeEstimate lockin_estimate(const TimeSeries& ts, double f0, std::optional<double> sigma = {}) {
  EstimateOptions o;
  o.f0 = f0;
  o.sigma = sigma;
  return estimate(ts, Method::lockin, o);
}

/// Rayleigh maximum-likelihood amplitude from a raw series.
inline AmplitudeEstimate mle_linear_estimate(const TimeSeries& ts, double f0, std::optional<double> sigma = {}) {
  EstimateOptions o;
  o.f0 = f0;
  o.sigma = sigma;
  return estimate(ts, Method::mle_linear, o);
}

}  // namespace sramp
