#include <gtest/gtest.h>

#include <limits>
#include <sstream>
#include <string>

#include "sramp/io.hpp"

using namespace sramp;
using namespace sramp::io;

namespace {

ScanTable read(const std::string& text) {
  std::istringstream is(text);
  return read_scan_csv(is);
}

std::size_t error_line(const std::string& text) {
  try {
    read(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no parse error for:\n" << text;
  return 0;
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.0, -1.5, 0.1, 1.0 / 3.0, 6.02e23, 5e-324, std::numeric_limits<double>::max()})
    EXPECT_EQ(*parse_double(format_double(v)), v);
}

TEST(ParseDouble, RejectsGarbage) {
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_FALSE(parse_double("1.0x").has_value());
  EXPECT_FALSE(parse_double("1,0").has_value());
  EXPECT_EQ(*parse_double(" 2.5 "), 2.5);
  EXPECT_EQ(*parse_double("+2.5"), 2.5);
}

TEST(ScanCsv, RoundTrip) {
  ScanTable t;
  t.positions = {0.0, 1.5, 3.0};
  t.series = {{{1.0, 2.0, 0.1}, {}}, {{0.5, 1.0 / 3.0}, {}}, {{7.0}, {}}};
  std::ostringstream os;
  write_scan_csv(os, t);
  const auto back = read(os.str());
  EXPECT_EQ(back.positions, t.positions);
  EXPECT_EQ(back.series, t.series);
}

TEST(ScanCsv, SingleSeriesBecomesOneBlock) {
  const auto t = read("sample_index,intensity\n0,1.5\n1,2.5\n");
  ASSERT_EQ(t.positions.size(), 1u);
  EXPECT_EQ(t.series[0].samples, (std::vector<double>{1.5, 2.5}));
  TimeSeries ts{{0.25, 4.0}, {}};
  std::ostringstream os;
  write_series_csv(os, ts);
  EXPECT_EQ(read(os.str()).series[0], ts);
}

TEST(ScanCsv, AcceptsCrLf) {
  EXPECT_EQ(read("position,sample_index,intensity\r\n0,0,1\r\n").series[0].samples.size(), 1u);
}

TEST(ScanCsv, NanSampleCitesRow) {
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0,1\n0,1,nan\n"), 3u);
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0,inf\n"), 2u);
}

TEST(ScanCsv, MissingColumn) {
  EXPECT_EQ(error_line("position,sample_index\n0,0\n"), 1u);
  EXPECT_EQ(error_line("position,intensity\n0,1\n"), 1u);
  EXPECT_EQ(error_line("position,sample_index,intensity,extra\n"), 1u);
}

TEST(ScanCsv, NonMonotonePositions) {
  EXPECT_EQ(error_line("position,sample_index,intensity\n1,0,1\n0,0,1\n"), 3u);
  // Ungrouped: position 0 reappears after 1.
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0,1\n1,0,1\n0,1,1\n"), 4u);
}

TEST(ScanCsv, SampleIndicesMustBeDense) {
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0,1\n0,2,1\n"), 3u);
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0,1\n1,1,1\n"), 3u);
}

TEST(ScanCsv, EmptyInputs) {
  EXPECT_THROW(read(""), ParseError);
  EXPECT_THROW(read("position,sample_index,intensity\n"), ParseError);
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0,1\n\n"), 3u);
  EXPECT_EQ(error_line("position,sample_index,intensity\n0,0\n"), 2u);
}

TEST(Manifest, RoundTripKeepsOrderAndUnknownKeys) {
  Manifest m;
  m.set("f0", 0.1);
  m.set("custom", "x=y");
  m.set("f0", 0.2);
  std::ostringstream os;
  m.write(os);
  EXPECT_EQ(os.str(), "f0=0.2\ncustom=x=y\n");
  std::istringstream is("# comment\nf0=0.2\n\ncustom=x=y\n");
  const auto back = Manifest::read(is);
  EXPECT_EQ(back.entries(), m.entries());
  EXPECT_EQ(*back.get_double("f0"), 0.2);
  EXPECT_FALSE(back.get("rate_hz").has_value());
}

TEST(Manifest, Errors) {
  std::istringstream bad("f0\n");
  EXPECT_THROW(Manifest::read(bad), ParseError);
  Manifest m;
  m.set("f0", std::string("fast"));
  EXPECT_THROW(m.get_double("f0"), ParseError);
}
