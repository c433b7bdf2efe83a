#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "sramp/scan_pipeline.hpp"

using namespace sramp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sramp_scan_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ScanDataset small_dataset(std::uint64_t seed, std::size_t n = 4000) {
  SignalSpec t;
  t.seed = seed;
  t.n_samples = n;
  return synthetic_dataset(low_turbidity_phantom(), t, "rod-low");
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ingestion

TEST(Ingest, RoundTripsWrittenDataset) {
  const auto dir = temp_dir("roundtrip");
  const auto d = small_dataset(4, 300);
  write_dataset(d, (dir / "scan.csv").string());
  const auto back = ingest((dir / "scan.csv").string());
  EXPECT_TRUE(back == d);
  EXPECT_EQ(back.provenance.kind, Provenance::Kind::ingested);
  EXPECT_EQ(back.f0, d.f0);
  EXPECT_FALSE(back.rate_hz.has_value());
}

TEST(Ingest, ManifestSuppliesPhysicalFrequency) {
  const auto dir = temp_dir("rate");
  write_text(dir / "s.csv", "sample_index,intensity\n0,1\n1,2\n2,1.5\n");
  write_text(dir / "s.csv.manifest", "f0=500\nrate_hz=5000\n");
  const auto d = ingest((dir / "s.csv").string());
  EXPECT_DOUBLE_EQ(d.normalized_f0(), 0.1);
  ASSERT_EQ(d.positions.size(), 1u);
  // Options override the sidecar.
  const auto o = ingest((dir / "s.csv").string(), {.f0 = 1000.0, .rate_hz = {}});
  EXPECT_DOUBLE_EQ(o.normalized_f0(), 0.2);
}

TEST(Ingest, Errors) {
  const auto dir = temp_dir("errors");
  EXPECT_THROW(ingest((dir / "absent.csv").string()), IoError);

  write_text(dir / "nan.csv", "position,sample_index,intensity\n0,0,1\n0,1,nan\n");
  try {
    ingest((dir / "nan.csv").string(), {.f0 = 0.1, .rate_hz = {}});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }

  write_text(dir / "empty.csv", "position,sample_index,intensity\n");
  EXPECT_THROW(ingest((dir / "empty.csv").string(), {.f0 = 0.1, .rate_hz = {}}), ParseError);

  write_text(dir / "count.csv", "position,sample_index,intensity\n0,0,1\n0,1,2\n1,0,1\n1,1,2\n");
  write_text(dir / "count.csv.manifest", "f0=0.1\npositions=3\n");
  EXPECT_THROW(ingest((dir / "count.csv").string()), ParseError);

  write_text(dir / "nof0.csv", "sample_index,intensity\n0,1\n1,2\n");
  EXPECT_THROW(ingest((dir / "nof0.csv").string()), ParseError);

  write_text(dir / "nyq.csv", "sample_index,intensity\n0,1\n1,2\n");
  EXPECT_THROW(ingest((dir / "nyq.csv").string(), {.f0 = 0.6, .rate_hz = {}}), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Detector

TEST(DetectObject, NoiselessRodIsFoundAtItsEdges) {
  const auto ph = high_turbidity_phantom();
  const auto det = detect_object(ph.positions, ph.amplitudes, {}, {}, std::span<const double>(ph.amplitudes));
  ASSERT_TRUE(det.object_detected);
  ASSERT_TRUE(det.edge_positions);
  const auto [lo, hi] = RodParams{}.edges();
  EXPECT_LE(std::abs(det.edge_positions->first - lo), RodParams{}.spacing);
  EXPECT_LE(std::abs(det.edge_positions->second - hi), RodParams{}.spacing);
  EXPECT_DOUBLE_EQ(det.edge_positions->first, 12.5);
  EXPECT_DOUBLE_EQ(det.edge_positions->second, 27.5);
  EXPECT_NEAR(*det.profile_correlation, 1.0, 1e-12);
}

TEST(DetectObject, AllEqualProfileIsNotDetected) {
  std::vector<double> pos(21), v(21, 0.3);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(i);
  const auto det = detect_object(pos, v);
  EXPECT_FALSE(det.object_detected);
  EXPECT_FALSE(det.edge_positions);
}

TEST(DetectObject, ShortRunsDoNotCount) {
  std::vector<double> pos(21), v(21, 1.0);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(i);
  v[3] = 1.01;
  v[17] = 0.99;
  v[10] = v[11] = 5.0;
  EXPECT_FALSE(detect_object(pos, v).object_detected);
  v[12] = 5.0;
  const auto det = detect_object(pos, v);
  ASSERT_TRUE(det.object_detected);
  EXPECT_DOUBLE_EQ(det.edge_positions->first, 9.5);
  EXPECT_DOUBLE_EQ(det.edge_positions->second, 12.5);
}

TEST(DetectObject, ScaleInvariant) {
  const auto d = small_dataset(21);
  const auto base = run_scan(d, Method::lockin);
  const auto amps = base.amplitudes();
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    std::vector<double> scaled(amps);
    for (double& a : scaled) a *= c;
    const auto det = detect_object(base.positions, scaled);
    EXPECT_EQ(det.object_detected, base.detection.object_detected) << "c = " << c;
    EXPECT_EQ(det.edge_positions, base.detection.edge_positions) << "c = " << c;
  }
}

TEST(DetectObject, RejectsTooFewPositions) {
  std::vector<double> pos{0, 1, 2, 3, 4, 5}, v{0, 0, 1, 1, 0, 0};
  EXPECT_THROW(detect_object(pos, v), InvalidArgument);
  EXPECT_THROW(detect_object(std::vector<double>{0, 1, 2, 3, 4, 5, 6}, v), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Scans

TEST(RunScan, FlatPhantomIsNotDetected) {
  SignalSpec t;
  t.seed = 8;
  const auto d = synthetic_dataset(flat_phantom(), t, "flat");
  for (auto m : {Method::lockin, Method::power, Method::crossover_closed, Method::qmle_closed}) {
    const auto p = run_scan(d, m);
    EXPECT_FALSE(p.detection.object_detected) << to_string(m);
  }
}

TEST(RunScan, Deterministic) {
  const auto d = small_dataset(30);
  const auto a = run_scan(d, Method::crossover_closed);
  const auto b = run_scan(small_dataset(30), Method::crossover_closed);
  EXPECT_EQ(a.amplitudes(), b.amplitudes());
  EXPECT_EQ(a.detection.edge_positions, b.detection.edge_positions);
}

TEST(RunScan, PositionsAreEstimatedIndependently) {
  // Estimating in reverse order by hand gives the same per-position values.
  const auto d = small_dataset(31);
  ScanOptions o;
  o.sigma = 1.0;
  const auto p = run_scan(d, Method::qmle_closed, o);
  EstimateOptions eo;
  eo.f0 = d.normalized_f0();
  eo.gamma = optimal_threshold();
  eo.sigma = 1.0;
  for (std::size_t k = d.positions.size(); k-- > 0;)
    EXPECT_EQ(estimate(d.series[k], Method::qmle_closed, eo).amplitude_physical, p.per_position[k].amplitude_physical);
}

TEST(RunScan, FailedPositionIsFlaggedNotFatal) {
  auto d = small_dataset(32, 500);
  std::fill(d.series[3].samples.begin(), d.series[3].samples.end(), 2.0);
  const auto p = run_scan(d, Method::crossover_closed);
  EXPECT_FALSE(p.per_position[3].converged);
  EXPECT_EQ(p.per_position[3].amplitude_physical, 0.0);
  EXPECT_TRUE(p.per_position[4].converged);
}

TEST(RunScan, ProfileCsv) {
  const auto p = run_scan(small_dataset(33, 500), Method::power);
  std::ostringstream os;
  write_profile_csv(os, p);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "position,method,amplitude_physical,amplitude_normalized,converged,clamped");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("0,power,", 0), 0u) << line;
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 41);
}

TEST(RunScan, RejectsBrokenDataset) {
  auto d = small_dataset(34, 100);
  d.positions[5] = d.positions[4];
  EXPECT_THROW(run_scan(d, Method::power), InvalidArgument);
}

TEST(RunScan, LockinFindsRodAtExactFrequency) {
  SignalSpec t;
  t.seed = 40;
  const auto p = run_scan(synthetic_dataset(low_turbidity_phantom(), t, "rod-low"), Method::lockin);
  EXPECT_TRUE(p.detection.object_detected);
  EXPECT_GT(*p.detection.profile_correlation, 0.95);
}

TEST(RunScan, PowerProfileTracksDefaultRod) {
  SignalSpec t;
  t.seed = 41;
  const auto p = run_scan(synthetic_dataset(high_turbidity_phantom(), t, "rod"), Method::power);
  ASSERT_TRUE(p.detection.profile_correlation);
  EXPECT_GE(*p.detection.profile_correlation, 0.9);
}

TEST(RunScan, AllMethodsDetectLowTurbidityRod) {
  SignalSpec t;
  t.seed = 42;
  const auto d = synthetic_dataset(low_turbidity_phantom(), t, "rod-low");
  for (auto m : {Method::lockin, Method::crossover_closed, Method::qmle_iterative, Method::qmle_closed,
                 Method::power}) {
    const auto p = run_scan(d, m);
    EXPECT_TRUE(p.detection.object_detected) << to_string(m) << " correlation "
                                             << p.detection.profile_correlation.value_or(-2);
  }
}

TEST(RunScan, PowerDetectsUnderFrequencyOffsetWhereLinearDegrades) {
  SignalSpec t;
  t.seed = 43;
  const auto d = synthetic_dataset(high_turbidity_phantom(), t, "rod");
  ScanOptions o;
  o.freq_offset = 5e-4;
  const auto power = run_scan(d, Method::power, o);
  const auto crossing = run_scan(d, Method::crossover_closed, o);
  const auto qmle = run_scan(d, Method::qmle_closed, o);
  const auto mle = run_scan(d, Method::mle_linear, o);
  EXPECT_TRUE(power.detection.object_detected);
  const double sr = std::min({*power.detection.profile_correlation, *crossing.detection.profile_correlation,
                              *qmle.detection.profile_correlation});
  EXPECT_LT(*mle.detection.profile_correlation, sr);
}
