#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "sramp/sr_theory.hpp"

using namespace sramp;

TEST(TheoreticalMu, ZeroAmplitude) { EXPECT_EQ(*theoretical_mu(1.064, 0.0), 0.0); }

TEST(TheoreticalMu, QuadraticInAmplitude) {
  for (double g : {0.3, 1.0, 1.064, 2.5}) EXPECT_NEAR(*theoretical_mu(g, 0.2), 4.0 * *theoretical_mu(g, 0.1), 1e-15);
}

TEST(TheoreticalMu, MatchesClosedForm) {
  for (double g : {0.1, 0.5, 1.064, 1.9, 3.0, 4.5}) EXPECT_NEAR(*theoretical_mu(g, 0.1), oracle::mu(g, 0.1), 1e-15);
}

TEST(TheoreticalMu, DegenerateVarianceReportsUndefined) {
  EXPECT_FALSE(theoretical_mu(100.0, 0.1).has_value());
  EXPECT_FALSE(theoretical_mu_slope(100.0, 0.1).has_value());
  EXPECT_THROW(theoretical_mu(0.0, 0.1), InvalidArgument);
}

TEST(TheoreticalMu, GridArgmax) {
  const auto grid = gamma_grid(0.1, 3.0, 1e-4);
  const double best = curve_argmax(theoretical_curve(grid, 0.1));
  EXPECT_NEAR(best, 1.064, 0.005);
  // Independent grid search straight from the closed form.
  double ob = 0.1, ov = -1;
  for (double g : grid)
    if (oracle::mu(g, 0.1) > ov) {
      ov = oracle::mu(g, 0.1);
      ob = g;
    }
  EXPECT_NEAR(best, ob, 1e-12);
}

TEST(TheoreticalMu, SingleInteriorMaximum) {
  const auto grid = gamma_grid(1e-3, 5.0, 1e-3);
  int peaks = 0, troughs = 0;
  double prev_slope = *theoretical_mu(grid[1], 1.0) - *theoretical_mu(grid[0], 1.0);
  for (std::size_t i = 2; i < grid.size(); ++i) {
    const double s = *theoretical_mu(grid[i], 1.0) - *theoretical_mu(grid[i - 1], 1.0);
    if (prev_slope > 0 && s <= 0) ++peaks;
    if (prev_slope < 0 && s >= 0) ++troughs;
    prev_slope = s;
  }
  EXPECT_EQ(peaks, 1);
  EXPECT_EQ(troughs, 0);
}

TEST(TheoreticalMu, AnalyticSlopeMatchesFiniteDifferences) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const double g = u(gen);
    const double fd = (*theoretical_mu(g + h, 1.0) - *theoretical_mu(g - h, 1.0)) / (2 * h);
    const double an = *theoretical_mu_slope(g, 1.0);
    EXPECT_NEAR(an, fd, 1e-6 * std::abs(fd)) << "gamma = " << g;
  }
}

TEST(OptimalThreshold, Value) {
  const double g = optimal_threshold();
  EXPECT_NEAR(g, 1.064, 0.005);
  EXPECT_NEAR(g, curve_argmax(theoretical_curve(gamma_grid(0.1, 3.0, 1e-4), 1.0)), 1e-4);
}

TEST(OptimalThreshold, IndependentOfAmplitude) {
  const auto grid = gamma_grid(0.5, 2.0, 1e-4);
  const double ref = curve_argmax(theoretical_curve(grid, 0.1));
  for (double A : {1e-3, 0.05, 0.3, 2.0}) EXPECT_EQ(curve_argmax(theoretical_curve(grid, A)), ref);
}

TEST(OptimalThreshold, StationarityIdentityHolds) {
  const auto s = stationarity_sides(optimal_threshold());
  EXPECT_NEAR(s.lhs, s.rhs, 1e-8);
  // Away from the optimum the two sides disagree.
  const auto off = stationarity_sides(1.5);
  EXPECT_GT(std::abs(off.lhs - off.rhs), 1e-3);
}

TEST(OptimalThreshold, BracketWithoutRootFails) {
  try {
    optimal_threshold(1.5, 3.0);
    FAIL() << "expected a numeric failure";
  } catch (const NumericFailure& e) {
    EXPECT_NE(std::string(e.what()).find("1.5"), std::string::npos);
  }
}

TEST(GammaGrid, CoversRangeExactly) {
  const auto g = gamma_grid(0.5, 2.0, 0.01);
  EXPECT_EQ(g.size(), 151u);
  EXPECT_DOUBLE_EQ(g.front(), 0.5);
  EXPECT_NEAR(g.back(), 2.0, 1e-12);
  EXPECT_THROW(gamma_grid(0.0, 1.0, 0.1), InvalidArgument);
  EXPECT_THROW(gamma_grid(1.0, 0.5, 0.1), InvalidArgument);
}

TEST(CurveCsv, HeaderAndRows) {
  std::ostringstream os;
  write_curve_csv(os, theoretical_curve(gamma_grid(1.0, 1.2, 0.1), 0.1));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "gamma,mu");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(EmpiricalSnr, NoiselessCosineIsHuge) {
  std::vector<double> y(1000);
  for (std::size_t n = 0; n < y.size(); ++n) y[n] = std::cos(2.0 * std::numbers::pi * 0.1 * n);
  EXPECT_GE(empirical_snr(y, 0.1), 1e6);
}

TEST(EmpiricalSnr, NullInputIsOfOrderBinShare) {
  const std::size_t n = 1u << 15;
  double weight = 0.0;
  for (std::size_t k : harmonic_bins(n, 0.1)) weight += detail::bin_multiplicity(k, n);
  const double expected = weight / (static_cast<double>(n) - 1.0 - weight);
  double mean = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto q = quantize(sample(n, 1.0 / kRayleighA, 500 + s), QuantizerConfig{1.064, 1.0});
    mean += empirical_snr(q.levels, 0.1) / 20.0;
  }
  EXPECT_GT(mean, 0.7 * expected);
  EXPECT_LT(mean, 1.3 * expected);
}

TEST(EmpiricalSnr, HarmonicBins) {
  const auto b = harmonic_bins(1000, 0.1);
  // Harmonics at 100, 200, ..., 500 (Nyquist), each with one neighbour either side.
  EXPECT_EQ(b, (std::vector<std::size_t>{99, 100, 101, 199, 200, 201, 299, 300, 301, 399, 400, 401, 499, 500}));
}

TEST(EmpiricalSnr, RejectsBadArguments) {
  std::vector<double> y(100, 1.0);
  EXPECT_THROW(empirical_snr(y, 0.0), InvalidArgument);
  EXPECT_THROW(empirical_snr(y, 0.5), InvalidArgument);
  EXPECT_THROW(empirical_snr(std::vector<double>(5, 1.0), 0.1), InvalidArgument);
}

TEST(EmpiricalSnr, AgreesWithTheoryOnAverage) {
  const std::size_t n = 1u << 17;
  const double A = 0.1, g = 1.064;
  double mean = 0.0;
  const int trials = 10;
  for (int s = 0; s < trials; ++s) {
    SignalSpec spec;
    spec.amplitude = A;
    spec.n_samples = n;
    spec.seed = 900 + s;
    spec.phase = 0.5 * s;
    mean += empirical_snr(quantize(synthesize(spec), QuantizerConfig{g, 1.0}).levels, 0.1) / trials;
  }
  EXPECT_NEAR(mean, *theoretical_mu(g, A), 0.25 * *theoretical_mu(g, A));
}

TEST(EmpiricalSnr, ThresholdFastPathMatchesDirectRoute) {
  SignalSpec spec;
  spec.amplitude = 0.15;
  spec.n_samples = 4000;
  spec.seed = 12;
  spec.sigma = 1.7;
  const auto ts = synthesize(spec);
  const std::vector<double> gammas{0.3, 0.8, 1.064, 1.5, 2.2};
  const auto fast = empirical_snr_over_thresholds(ts.samples, spec.sigma, 0.1, gammas);
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const double direct = empirical_snr(quantize(ts, QuantizerConfig{gammas[i], spec.sigma}).levels, 0.1);
    EXPECT_NEAR(fast[i], direct, 1e-9 * direct) << "gamma = " << gammas[i];
  }
}

TEST(ThresholdSweep, SingleGamma) {
  SweepConfig c;
  c.n_trials = 3;
  c.n_samples = 2000;
  c.gammas = {1.2};
  const auto r = threshold_sweep(c);
  ASSERT_EQ(r.argmaxes.size(), 3u);
  for (double g : r.argmaxes) EXPECT_EQ(g, 1.2);
}

TEST(ThresholdSweep, InteriorMaximumAndDeterminism) {
  SweepConfig c;
  c.n_trials = 8;
  c.n_samples = 100000;
  c.amplitude = snr_db_to_amplitude(-23.0);
  c.gammas = gamma_grid(0.2, 2.6, 0.05);
  c.seed = 3;
  const auto r = threshold_sweep(c);
  const auto& mu = r.mean_curve.mu_values;
  const double peak = *std::max_element(mu.begin(), mu.end());
  EXPECT_LT(mu.front(), peak);
  EXPECT_LT(mu.back(), peak);
  // The curve is flat near its peak, so with 8 trials only ask that the
  // argmax lands where theory gives at least 90% of the best SNR.
  const double best = curve_argmax(r.mean_curve);
  EXPECT_GE(*theoretical_mu(best, 1.0) / *theoretical_mu(optimal_threshold(), 1.0), 0.9) << "argmax " << best;
  const auto again = threshold_sweep(c);
  EXPECT_EQ(again.argmaxes, r.argmaxes);
  EXPECT_EQ(again.mean_curve.mu_values, r.mean_curve.mu_values);
}

TEST(ThresholdSweep, RejectsBadConfig) {
  SweepConfig c;
  EXPECT_THROW(threshold_sweep(c), InvalidArgument);
  c.gammas = {1.0, 0.5};
  EXPECT_THROW(threshold_sweep(c), InvalidArgument);
}
