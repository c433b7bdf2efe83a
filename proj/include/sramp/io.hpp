#pragma once

// Text formats:
//   scan dataset CSV   position,sample_index,intensity   (rows grouped by position)
//   single series CSV  sample_index,intensity
//   manifest sidecar   key=value per line
// Numbers are written in shortest round-trip form.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "sramp/errors.hpp"
#include "sramp/signal_synth.hpp"

namespace sramp::io {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Ordered key=value sidecar. Unknown keys are kept and written back.
class Manifest {
public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_double(value)); }

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return kv.second;
    return std::nullopt;
  }

  std::optional<double> get_double(std::string_view key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    const auto d = parse_double(*v);
    if (!d) throw ParseError("manifest value for '" + std::string(key) + "' is not a number: " + *v);
    return d;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
  }

  static Manifest read(std::istream& is) {
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError("manifest entry is not key=value", lineno);
      m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string manifest_path_for(const std::string& csv_path) { return csv_path + ".manifest"; }

inline std::optional<Manifest> read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  return Manifest::read(in);
}

inline void write_manifest_file(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  m.write(out);
}

/// Positions with their series, as stored in a scan dataset CSV.
struct ScanTable {
  std::vector<double> positions;
  std::vector<TimeSeries> series;
};

inline void write_scan_csv(std::ostream& os, const ScanTable& t) {
  os << "position,sample_index,intensity\n";
  for (std::size_t p = 0; p < t.positions.size(); ++p) {
    const std::string pos = format_double(t.positions[p]);
    const auto& s = t.series[p].samples;
    for (std::size_t i = 0; i < s.size(); ++i) os << pos << ',' << i << ',' << format_double(s[i]) << '\n';
  }
}

inline void write_series_csv(std::ostream& os, const TimeSeries& ts) {
  os << "sample_index,intensity\n";
  for (std::size_t i = 0; i < ts.samples.size(); ++i) os << i << ',' << format_double(ts.samples[i]) << '\n';
}

namespace detail {

struct Columns {
  std::optional<std::size_t> position, sample_index, intensity;
  std::size_t count = 0;
};

inline Columns parse_header(std::string_view header) {
  Columns c;
  const auto cols = split_csv(header);
  c.count = cols.size();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == "position") c.position = i;
    else if (cols[i] == "sample_index") c.sample_index = i;
    else if (cols[i] == "intensity") c.intensity = i;
    else throw ParseError("unknown column '" + std::string(cols[i]) + "'", 1);
  }
  return c;
}

}  // namespace detail

/// Reads either a scan dataset CSV or a single-series CSV (which becomes one
/// block at position 0). Validates grouping, dense sample indices, strictly
/// increasing positions and finite values.
inline ScanTable read_scan_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw ParseError("empty file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cols = detail::parse_header(line);
  if (!cols.sample_index) throw ParseError("missing column 'sample_index'", 1);
  if (!cols.intensity) throw ParseError("missing column 'intensity'", 1);

  ScanTable t;
  bool have_block = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError("blank row", lineno);
    const auto f = split_csv(line);
    if (f.size() != cols.count)
      throw ParseError("expected " + std::to_string(cols.count) + " fields, found " + std::to_string(f.size()), lineno);
    double pos = 0.0;
    if (cols.position) {
      const auto p = parse_double(f[*cols.position]);
      if (!p || !std::isfinite(*p)) throw ParseError("position is not a finite number", lineno);
      pos = *p;
    }
    const auto idx = parse_int(f[*cols.sample_index]);
    if (!idx) throw ParseError("sample_index is not an integer", lineno);
    const auto val = parse_double(f[*cols.intensity]);
    if (!val) throw ParseError("intensity is not a number", lineno);
    if (!std::isfinite(*val)) throw ParseError("intensity is NaN or infinite", lineno);

    if (!have_block || pos != t.positions.back()) {
      if (have_block && !(pos > t.positions.back()))
        throw ParseError("positions must be strictly increasing and grouped", lineno);
      if (*idx != 0) throw ParseError("position block must start at sample_index 0", lineno);
      t.positions.push_back(pos);
      t.series.emplace_back();
      have_block = true;
    }
    auto& s = t.series.back().samples;
    if (*idx != static_cast<long long>(s.size()))
      throw ParseError("sample_index must be dense from 0 (expected " + std::to_string(s.size()) + ")", lineno);
    s.push_back(*val);
  }
  if (!have_block) throw ParseError("no data rows");
  return t;
}

}  // namespace sramp::io
