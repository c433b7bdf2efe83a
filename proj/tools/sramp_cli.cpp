// sramp: simulate, estimate, theory, sweep, scan, fitnoise.
//
// Exit codes: 0 success, 2 usage, 3 parse/format or I/O, 4 numeric failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sramp/sramp.hpp"

namespace {

using namespace sramp;
using json = nlohmann::json;

constexpr int kUsage = 2;
constexpr int kFormat = 3;
constexpr int kNumeric = 4;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db;
  std::optional<double> amplitude;
  std::optional<double> f0;
  std::optional<double> rate_hz;
  double freq_offset = 0.0;
  std::optional<double> gamma;
  std::optional<double> sigma;
  std::string method = "power";
  std::string phantom;
  std::size_t positions = 41;
  std::size_t samples = 100000;
  std::string out;
  std::string input;
  std::string format = "csv";
  double phase = 0.0;
  double gamma_min = 0.1, gamma_max = 3.0, gamma_step = 0.001;
  std::size_t trials = 100;
  std::string argmax_out;
};

std::uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "seed=" << s << '\n';
  return s;
}

std::optional<double> resolve_amplitude(const Common& c) {
  if (c.amplitude) return c.amplitude;
  if (c.snr_db) return snr_db_to_amplitude(*c.snr_db);
  return std::nullopt;
}

/// Normalized frequency from --f0 / --rate-hz; f0 is in Hz when a rate is given.
double normalized_f0(const Common& c) {
  const double f = c.f0.value_or(0.1);
  return c.rate_hz ? f / *c.rate_hz : f;
}

Method resolve_method(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw InvalidArgument("unknown method '" + name + "'");
  return *m;
}

class Output {
public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  bool to_file() const { return file_.is_open(); }

private:
  std::ofstream file_;
};

Phantom make_phantom(const Common& c) {
  const auto amp = resolve_amplitude(c);
  if (c.phantom == "flat") return flat_phantom(c.positions, amp.value_or(0.0));
  RodParams p;
  if (c.positions != p.n_positions) {
    if (c.positions < 7) throw InvalidArgument("--positions must be at least 7 for a rod phantom");
    p.n_positions = c.positions;
    p.rod_half_width = std::max<std::size_t>(1, c.positions * 8 / 41);
    p.bump_half_width = std::max<std::size_t>(1, c.positions * 4 / 41);
  }
  if (c.phantom == "rod-high") return rod_phantom(p, "L/l* = 5.05");
  if (c.phantom == "rod-low") return rod_phantom(p.scaled_to_peak(0.3), "L/l* = 2.14");
  if (c.phantom == "rod") return rod_phantom(amp ? p.scaled_to_peak(*amp) : p, "rod");
  throw InvalidArgument("unknown phantom '" + c.phantom + "'");
}

SignalSpec base_spec(const Common& c, std::uint64_t seed) {
  SignalSpec s;
  s.amplitude = resolve_amplitude(c).value_or(0.0);
  s.f0 = normalized_f0(c);
  s.phase = c.phase;
  s.sigma = c.sigma.value_or(1.0);
  s.n_samples = c.samples;
  s.seed = seed;
  return s;
}

int cmd_simulate(const Common& c) {
  const std::uint64_t seed = resolve_seed(c);
  const SignalSpec spec = base_spec(c, seed);
  spec.validate();
  ScanDataset d;
  io::Manifest extra;
  if (c.phantom.empty()) {
    d.positions = {0.0};
    d.series = {synthesize(spec)};
    d.provenance = {Provenance::Kind::synthetic, "single", seed, {}};
    extra.set("amplitude", spec.amplitude);
  } else {
    const auto ph = make_phantom(c);
    d = synthetic_dataset(ph, spec, c.phantom);
    extra.set("amplitude_peak", *std::max_element(ph.amplitudes.begin(), ph.amplitudes.end()));
    extra.set("turbidity_label", ph.turbidity_label);
  }
  d.f0 = c.f0.value_or(0.1);
  d.rate_hz = c.rate_hz;
  extra.set("snr_db", amplitude_to_snr_db(spec.amplitude));
  extra.set("sigma", spec.sigma);
  extra.set("phase", spec.phase);
  if (c.phantom.empty()) {
    std::ofstream out(c.out, std::ios::binary);
    if (!out) throw IoError("cannot open " + c.out + " for writing");
    io::write_series_csv(out, d.series.front());
    auto m = dataset_manifest(d);
    for (const auto& [k, v] : extra.entries()) m.set(k, v);
    io::write_manifest_file(io::manifest_path_for(c.out), m);
  } else {
    write_dataset(d, c.out, extra);
  }
  std::cout << "wrote " << c.out << " (" << d.positions.size() << " position(s), " << spec.n_samples
            << " samples each, seed " << seed << ")\n";
  return 0;
}

json estimate_json(double position, const AmplitudeEstimate& e) {
  return {{"position", position},
          {"method", std::string(to_string(e.method))},
          {"amplitude_physical", e.amplitude_physical},
          {"amplitude_normalized", e.amplitude_normalized},
          {"sigma_used", e.sigma_used},
          {"converged", e.converged},
          {"iterations", e.iterations},
          {"clamped", e.clamped}};
}

IngestOptions ingest_options(const Common& c) {
  IngestOptions o;
  o.f0 = c.f0;
  o.rate_hz = c.rate_hz;
  return o;
}

int cmd_estimate(const Common& c) {
  const Method method = resolve_method(c.method);
  const auto data = ingest(c.input, ingest_options(c));
  EstimateOptions eo;
  eo.f0 = data.normalized_f0() * (1.0 + c.freq_offset);
  eo.gamma = c.gamma ? *c.gamma : optimal_threshold();
  eo.sigma = c.sigma;
  Output out(c.out);
  auto& os = out.stream();
  if (c.format == "csv")
    os << "position,method,amplitude_physical,amplitude_normalized,sigma_used,converged,iterations,clamped\n";
  for (std::size_t i = 0; i < data.positions.size(); ++i) {
    const auto e = estimate(data.series[i], method, eo);
    if (c.format == "jsonl") {
      os << estimate_json(data.positions[i], e).dump() << '\n';
    } else {
      os << io::format_double(data.positions[i]) << ',' << to_string(e.method) << ','
         << io::format_double(e.amplitude_physical) << ',' << io::format_double(e.amplitude_normalized) << ','
         << io::format_double(e.sigma_used) << ',' << (e.converged ? "true" : "false") << ',' << e.iterations
         << ',' << (e.clamped ? "true" : "false") << '\n';
    }
  }
  return 0;
}

int cmd_theory(const Common& c) {
  const double A = resolve_amplitude(c).value_or(0.1);
  const auto curve = theoretical_curve(gamma_grid(c.gamma_min, c.gamma_max, c.gamma_step), A);
  const double g = optimal_threshold();
  Output out(c.out);
  write_curve_csv(out.stream(), curve);
  (out.to_file() ? std::cout : std::cerr) << "gamma_opt=" << io::format_double(g) << '\n';
  return 0;
}

int cmd_sweep(const Common& c) {
  SweepConfig s;
  s.amplitude = resolve_amplitude(c).value_or(snr_db_to_amplitude(-23.0));
  s.sigma = c.sigma.value_or(1.0);
  s.n_trials = c.trials;
  s.n_samples = c.samples;
  s.gammas = gamma_grid(c.gamma_min, c.gamma_max, c.gamma_step);
  s.f0 = normalized_f0(c);
  s.seed = resolve_seed(c);
  const auto r = threshold_sweep(s);
  Output out(c.out);
  auto& os = out.stream();
  os << "gamma,mean_snr\n";
  for (std::size_t i = 0; i < r.mean_curve.gammas.size(); ++i)
    os << io::format_double(r.mean_curve.gammas[i]) << ',' << io::format_double(r.mean_curve.mu_values[i]) << '\n';
  if (!c.argmax_out.empty()) {
    std::ofstream am(c.argmax_out, std::ios::binary);
    if (!am) throw IoError("cannot open " + c.argmax_out + " for writing");
    am << "trial,argmax_gamma\n";
    for (std::size_t t = 0; t < r.argmaxes.size(); ++t) am << t << ',' << io::format_double(r.argmaxes[t]) << '\n';
  }
  (out.to_file() ? std::cout : std::cerr) << "mean_argmax=" << io::format_double(r.mean_argmax())
                                          << " trials=" << r.argmaxes.size() << '\n';
  return 0;
}

int cmd_scan(const Common& c) {
  const Method method = resolve_method(c.method);
  ScanDataset data;
  if (!c.input.empty()) {
    data = ingest(c.input, ingest_options(c));
  } else {
    if (c.phantom.empty()) throw InvalidArgument("scan needs --input or --phantom");
    const std::uint64_t seed = resolve_seed(c);
    data = synthetic_dataset(make_phantom(c), base_spec(c, seed), c.phantom);
    data.f0 = c.f0.value_or(0.1);
    data.rate_hz = c.rate_hz;
  }
  ScanOptions so;
  so.gamma = c.gamma;
  so.freq_offset = c.freq_offset;
  so.sigma = c.sigma;
  const auto p = run_scan(data, method, so);
  Output out(c.out);
  if (c.format == "jsonl") {
    for (std::size_t i = 0; i < p.positions.size(); ++i)
      out.stream() << estimate_json(p.positions[i], p.per_position[i]).dump() << '\n';
  } else {
    write_profile_csv(out.stream(), p);
  }
  const auto& d = p.detection;
  auto& log = out.to_file() ? std::cout : std::cerr;
  log << "object_detected=" << (d.object_detected ? "true" : "false");
  if (d.edge_positions)
    log << " edges=" << io::format_double(d.edge_positions->first) << ','
        << io::format_double(d.edge_positions->second);
  if (d.profile_correlation) log << " correlation=" << io::format_double(*d.profile_correlation);
  log << " baseline=" << io::format_double(d.baseline) << " threshold=" << io::format_double(d.threshold) << '\n';
  return 0;
}

int cmd_fitnoise(const Common& c) {
  const auto data = ingest(c.input, IngestOptions{c.f0.value_or(0.1), c.rate_hz});
  std::vector<double> pooled;
  for (const auto& s : data.series) pooled.insert(pooled.end(), s.samples.begin(), s.samples.end());
  const double s = fit_scale(pooled);
  Output out(c.out);
  if (c.format == "jsonl")
    out.stream() << json{{"scale", s}, {"samples", pooled.size()}}.dump() << '\n';
  else
    out.stream() << "scale,samples\n" << io::format_double(s) << ',' << pooled.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak sinusoid amplitude estimation in Rayleigh noise with a three-level quantizer"};
  app.require_subcommand(1);
  Common c;

  auto add_signal = [&](CLI::App* s) {
    s->add_option("--seed", c.seed, "RNG seed (random and printed when omitted)");
    auto* snr = s->add_option("--snr-db", c.snr_db, "input SNR in dB, A^2/2 over unit noise variance");
    s->add_option("--amplitude", c.amplitude, "normalized amplitude A")->excludes(snr)->check(CLI::NonNegativeNumber);
    s->add_option("--f0", c.f0, "signal frequency: cycles/sample, or Hz with --rate-hz");
    s->add_option("--rate-hz", c.rate_hz, "sampling rate in Hz")->check(CLI::PositiveNumber);
    s->add_option("--samples", c.samples, "samples per series")->check(CLI::PositiveNumber);
    s->add_option("--sigma", c.sigma, "noise standard deviation")->check(CLI::PositiveNumber);
  };
  auto add_phantom = [&](CLI::App* s) {
    s->add_option("--phantom", c.phantom, "phantom: rod, rod-high, rod-low, flat")
        ->check(CLI::IsMember({"rod", "rod-high", "rod-low", "flat"}));
    s->add_option("--positions", c.positions, "scan positions")->check(CLI::PositiveNumber);
  };
  auto add_estimation = [&](CLI::App* s) {
    std::vector<std::string> names;
    for (auto m : kAllMethods) names.emplace_back(to_string(m));
    s->add_option("--method", c.method, "estimator")->check(CLI::IsMember(names));
    s->add_option("--gamma", c.gamma, "normalized threshold (default: optimal)")->check(CLI::PositiveNumber);
    s->add_option("--freq-offset", c.freq_offset, "relative frequency error, e.g. 0.0005");
    s->add_option("--format", c.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  };

  auto* sim = app.add_subcommand("simulate", "write a synthetic series or phantom scan with its manifest");
  add_signal(sim);
  add_phantom(sim);
  sim->add_option("--phase", c.phase, "carrier phase in [0, 2 pi)");
  sim->add_option("--out", c.out, "output CSV")->required();

  auto* est = app.add_subcommand("estimate", "estimate the amplitude of every series in a file");
  est->add_option("--input", c.input, "series or scan CSV")->required();
  est->add_option("--f0", c.f0, "signal frequency (overrides the manifest)");
  est->add_option("--rate-hz", c.rate_hz, "sampling rate in Hz (overrides the manifest)")->check(CLI::PositiveNumber);
  est->add_option("--sigma", c.sigma, "known noise standard deviation")->check(CLI::PositiveNumber);
  est->add_option("--out", c.out, "output file (default: stdout)");
  add_estimation(est);

  auto* th = app.add_subcommand("theory", "theoretical output SNR curve and optimal threshold");
  auto* th_snr = th->add_option("--snr-db", c.snr_db, "input SNR in dB");
  th->add_option("--amplitude", c.amplitude, "normalized amplitude A")->excludes(th_snr)->check(CLI::NonNegativeNumber);
  th->add_option("--gamma-min", c.gamma_min, "first grid threshold")->check(CLI::PositiveNumber);
  th->add_option("--gamma-max", c.gamma_max, "last grid threshold")->check(CLI::PositiveNumber);
  th->add_option("--gamma-step", c.gamma_step, "grid spacing")->check(CLI::PositiveNumber);
  th->add_option("--out", c.out, "output CSV (default: stdout)");

  auto* sw = app.add_subcommand("sweep", "Monte Carlo threshold sweep of the empirical output SNR");
  add_signal(sw);
  sw->add_option("--trials", c.trials, "independent noise realizations")->check(CLI::PositiveNumber);
  sw->add_option("--gamma-min", c.gamma_min, "first grid threshold")->check(CLI::PositiveNumber);
  sw->add_option("--gamma-max", c.gamma_max, "last grid threshold")->check(CLI::PositiveNumber);
  sw->add_option("--gamma-step", c.gamma_step, "grid spacing")->check(CLI::PositiveNumber);
  sw->add_option("--out", c.out, "mean curve CSV (default: stdout)");
  sw->add_option("--argmax-out", c.argmax_out, "per-trial argmax CSV");

  auto* sc = app.add_subcommand("scan", "amplitude profile and detection over a scan");
  add_signal(sc);
  add_phantom(sc);
  add_estimation(sc);
  sc->add_option("--input", c.input, "scan CSV (instead of --phantom)");
  sc->add_option("--out", c.out, "profile CSV (default: stdout)");

  auto* fit = app.add_subcommand("fitnoise", "maximum-likelihood Rayleigh scale of a record");
  fit->add_option("--input", c.input, "series or scan CSV")->required();
  fit->add_option("--format", c.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  fit->add_option("--out", c.out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(c);
    if (est->parsed()) return cmd_estimate(c);
    if (th->parsed()) return cmd_theory(c);
    if (sw->parsed()) return cmd_sweep(c);
    if (sc->parsed()) return cmd_scan(c);
    if (fit->parsed()) return cmd_fitnoise(c);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFormat;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFormat;
  } catch (const NumericFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
