#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/estimators.hpp"
#include "sramp/io.hpp"
#include "sramp/numeric.hpp"
#include "sramp/signal_synth.hpp"

namespace sramp {

struct Provenance {
  enum class Kind { synthetic, ingested };
  Kind kind = Kind::synthetic;
  std::string phantom;     ///< synthetic only
  std::uint64_t seed = 0;  ///< synthetic only
  std::string path;        ///< ingested only
};

struct ScanDataset {
  std::vector<double> positions;
  std::vector<TimeSeries> series;
  double f0 = 0.1;                 ///< Hz when rate_hz is set, else cycles/sample
  std::optional<double> rate_hz;
  Provenance provenance;
  std::optional<std::vector<double>> true_amplitudes;  ///< known for synthetic scans

  double normalized_f0() const { return rate_hz ? f0 / *rate_hz : f0; }

  void validate() const {
    if (positions.empty()) throw InvalidArgument("scan dataset has no positions");
    if (positions.size() != series.size()) throw InvalidArgument("every position needs a series");
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (series[i].samples.empty()) throw InvalidArgument("empty series at position index " + std::to_string(i));
      if (i > 0 && !(positions[i] > positions[i - 1]))
        throw InvalidArgument("scan positions must be strictly increasing");
    }
    if (rate_hz && !(*rate_hz > 0.0)) throw InvalidArgument("rate_hz must be positive");
    const double f = normalized_f0();
    if (!(f > 0.0 && f < 0.5)) throw InvalidArgument("signal frequency must lie below Nyquist");
    if (true_amplitudes && true_amplitudes->size() != positions.size())
      throw InvalidArgument("true amplitude profile must cover every position");
  }

  bool operator==(const ScanDataset& o) const {
    return positions == o.positions && series == o.series && f0 == o.f0 && rate_hz == o.rate_hz;
  }
};

inline ScanDataset synthetic_dataset(const Phantom& phantom, const SignalSpec& tmpl, std::string phantom_name) {
  ScanDataset d;
  d.positions = phantom.positions;
  d.series = phantom_scan(phantom, tmpl);
  d.f0 = tmpl.f0;
  d.provenance = {Provenance::Kind::synthetic, std::move(phantom_name), tmpl.seed, {}};
  d.true_amplitudes = phantom.amplitudes;
  return d;
}

inline io::Manifest dataset_manifest(const ScanDataset& d) {
  io::Manifest m;
  m.set("f0", d.f0);
  if (d.rate_hz) m.set("rate_hz", *d.rate_hz);
  if (d.provenance.kind == Provenance::Kind::synthetic) {
    m.set("seed", std::to_string(d.provenance.seed));
    m.set("phantom", d.provenance.phantom);
  }
  m.set("positions", std::to_string(d.positions.size()));
  m.set("samples", std::to_string(d.series.empty() ? 0 : d.series.front().size()));
  return m;
}

/// Writes `<path>` and its manifest sidecar `<path>.manifest`.
inline void write_dataset(const ScanDataset& d, const std::string& path, const io::Manifest& extra = {}) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    io::write_scan_csv(out, {d.positions, d.series});
  }
  auto m = dataset_manifest(d);
  for (const auto& [k, v] : extra.entries()) m.set(k, v);
  io::write_manifest_file(io::manifest_path_for(path), m);
}

struct IngestOptions {
  std::optional<double> f0;       ///< overrides the manifest
  std::optional<double> rate_hz;  ///< overrides the manifest
};

/// Reads a scan (or single-series) CSV and its optional manifest sidecar.
inline ScanDataset ingest(const std::string& path, const IngestOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  auto table = io::read_scan_csv(in);
  const auto manifest = io::read_manifest_file(io::manifest_path_for(path));

  ScanDataset d;
  d.positions = std::move(table.positions);
  d.series = std::move(table.series);
  d.provenance = {Provenance::Kind::ingested, {}, 0, path};
  std::optional<double> f0 = opt.f0;
  std::optional<double> rate = opt.rate_hz;
  if (manifest) {
    if (!f0) f0 = manifest->get_double("f0");
    if (!rate) rate = manifest->get_double("rate_hz");
    if (const auto declared = manifest->get("positions")) {
      const auto n = io::parse_int(*declared);
      if (!n || *n < 0) throw ParseError("manifest 'positions' is not a count");
      if (static_cast<std::size_t>(*n) != d.positions.size())
        throw ParseError("manifest declares " + *declared + " positions but the file has " +
                         std::to_string(d.positions.size()) + " position blocks");
    }
  }
  if (!f0) throw ParseError("signal frequency unknown: no f0 in manifest and none given");
  d.f0 = *f0;
  d.rate_hz = rate;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Detection

struct BaselineWindows {
  double fraction = 0.2;  ///< share of positions on each side used as baseline
};

struct DetectorRule {
  double k = 4.0;              ///< threshold = baseline + k * spread
  std::size_t min_run = 3;     ///< contiguous interior positions above threshold
};

struct Detection {
  bool object_detected = false;
  std::optional<std::pair<double, double>> edge_positions;
  std::optional<double> profile_correlation;
  double baseline = 0.0;
  double spread = 0.0;
  double threshold = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Baseline level and spread come from the outer windows. The spread is the
/// median absolute deviation; when more than half of the baseline values
/// coincide (MAD = 0, typical of clamped estimates) the mean absolute deviation
/// is used instead. The object is the longest interior run of at least
/// `min_run` positions strictly above baseline + k * spread.
inline Detection detect_object(std::span<const double> positions, std::span<const double> values,
                               const BaselineWindows& windows = {}, const DetectorRule& rule = {},
                               std::optional<std::span<const double>> truth = std::nullopt) {
  const std::size_t n = values.size();
  if (n < 7) throw InvalidArgument("detect_object: need at least 7 positions");
  if (positions.size() != n) throw InvalidArgument("detect_object: positions and values differ in length");
  if (truth && truth->size() != n) throw InvalidArgument("detect_object: true profile length mismatch");
  if (!(windows.fraction > 0.0 && windows.fraction < 0.5))
    throw InvalidArgument("detect_object: baseline fraction must lie in (0, 0.5)");
  const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(windows.fraction * static_cast<double>(n)));

  std::vector<double> base;
  for (std::size_t i = 0; i < w; ++i) base.push_back(values[i]);
  for (std::size_t i = n - w; i < n; ++i) base.push_back(values[i]);

  Detection d;
  d.baseline = detail::median(base);
  std::vector<double> dev;
  for (double v : base) dev.push_back(std::abs(v - d.baseline));
  // Clamped estimators put a point mass at zero, which can collapse the MAD
  // far below the real scatter of the baseline; the mean absolute deviation
  // keeps the tail in view.
  double mean_dev = 0.0;
  for (double v : dev) mean_dev += v;
  mean_dev /= static_cast<double>(dev.size());
  d.spread = std::max(detail::median(dev), mean_dev);
  d.threshold = d.baseline + rule.k * d.spread;

  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = w; i < n - w;) {
    if (!(values[i] > d.threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n - w && values[j] > d.threshold) ++j;
    if (j - i > best_len) {
      best_len = j - i;
      best_start = i;
    }
    i = j;
  }
  if (best_len >= rule.min_run) {
    d.object_detected = true;
    const std::size_t last = best_start + best_len - 1;
    d.edge_positions = std::make_pair(0.5 * (positions[best_start - 1] + positions[best_start]),
                                      0.5 * (positions[last] + positions[last + 1]));
  }
  if (truth) d.profile_correlation = detail::pearson(values, *truth);
  return d;
}

// ---------------------------------------------------------------------------
// Scan

struct ScanOptions {
  std::optional<double> gamma;   ///< default: optimal_threshold()
  double freq_offset = 0.0;      ///< relative error applied to f0 before estimation
  std::optional<double> sigma;   ///< known noise level
  BaselineWindows windows{};
  DetectorRule rule{};
  MleOptions mle{};
  QmleIterativeOptions qmle{};
};

struct ScanProfile {
  Method method = Method::power;
  std::vector<double> positions;
  std::vector<AmplitudeEstimate> per_position;
  Detection detection;

  std::vector<double> amplitudes() const {
    std::vector<double> a;
    a.reserve(per_position.size());
    for (const auto& e : per_position) a.push_back(e.amplitude_physical);
    return a;
  }
};

/// Estimates every position independently with a shared quantizer setting.
/// Estimator failures are recorded in that position's flags (converged =
/// false, amplitude 0) and never abort the scan.
inline ScanProfile run_scan(const ScanDataset& data, Method method, const ScanOptions& opt = {}) {
  data.validate();
  EstimateOptions eo;
  eo.f0 = data.normalized_f0() * (1.0 + opt.freq_offset);
  eo.gamma = opt.gamma ? *opt.gamma : optimal_threshold();
  eo.sigma = opt.sigma;
  eo.mle = opt.mle;
  eo.qmle = opt.qmle;
  detail::require_f0(eo.f0);

  ScanProfile p;
  p.method = method;
  p.positions = data.positions;
  p.per_position.resize(data.positions.size());
  numeric::parallel_for(data.positions.size(), [&](std::size_t i) {
    try {
      p.per_position[i] = estimate(data.series[i], method, eo);
    } catch (const NumericFailure&) {
      p.per_position[i] = detail::make_estimate(method, 0.0, eo.sigma.value_or(1.0));
      p.per_position[i].converged = false;
    } catch (const InvalidArgument&) {
      p.per_position[i] = detail::make_estimate(method, 0.0, eo.sigma.value_or(1.0));
      p.per_position[i].converged = false;
    }
  });

  if (p.positions.size() >= 7) {
    const auto amps = p.amplitudes();
    std::optional<std::span<const double>> truth;
    if (data.true_amplitudes) truth = std::span<const double>(*data.true_amplitudes);
    p.detection = detect_object(p.positions, amps, opt.windows, opt.rule, truth);
  }
  return p;
}

inline void write_profile_csv(std::ostream& os, const ScanProfile& p) {
  os << "position,method,amplitude_physical,amplitude_normalized,converged,clamped\n";
  for (std::size_t i = 0; i < p.positions.size(); ++i) {
    const auto& e = p.per_position[i];
    os << io::format_double(p.positions[i]) << ',' << to_string(e.method) << ','
       << io::format_double(e.amplitude_physical) << ',' << io::format_double(e.amplitude_normalized) << ','
       << (e.converged ? "true" : "false") << ',' << (e.clamped ? "true" : "false") << '\n';
  }
}

}  // namespace sramp
