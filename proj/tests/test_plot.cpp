#include "doctest.h"
#include "invlmp/lp.hpp"
#include "invlmp/plot.hpp"

using namespace invlmp;

TEST_CASE("csv parsing") {
  const CsvTable t = parse_csv("iteration,a,b\n0,1,2\n10, 3 ,4.5\n\n");
  CHECK(t.header == std::vector<std::string>{"iteration", "a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == 3.0);
  CHECK(t.column(2) == std::vector<double>{2.0, 4.5});
  CHECK_THROWS_AS(parse_csv(""), InputError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), InputError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,x\n"), InputError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2x\n"), InputError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,\n"), InputError);
}

TEST_CASE("line chart has one polyline per series and is byte-stable") {
  const CsvTable t = parse_csv("iteration,g1_b1,g1_b2,g1_b3\n0,10,20,30\n5,12,19,31\n10,13,18,31\n");
  const std::string a = svg_from_csv(t, "trajectory");
  const std::string b = svg_from_csv(parse_csv("iteration,g1_b1,g1_b2,g1_b3\n0,10,20,30\n5,12,19,31\n10,13,18,31\n"),
                                     "trajectory");
  CHECK(a == b);
  std::size_t lines = 0;
  for (auto pos = a.find("<polyline"); pos != std::string::npos; pos = a.find("<polyline", pos + 1)) ++lines;
  CHECK(lines == 3);
  CHECK(a.find("g1_b3") != std::string::npos);
  CHECK(a.rfind("</svg>") != std::string::npos);
}

TEST_CASE("histogram tables become bar charts") {
  const CsvTable t = parse_csv("bin_lo,bin_hi,x,y\n-1,0,2,0\n0,1,3,1\n");
  const std::string s = svg_from_csv(t, "errors");
  CHECK(s.find("<polyline") == std::string::npos);
  std::size_t bars = 0;
  for (auto pos = s.find("<rect x="); pos != std::string::npos; pos = s.find("<rect x=", pos + 1)) ++bars;
  CHECK(bars == 3 + 2);  // three non-empty bars plus two legend swatches
  CHECK_THROWS_AS(svg_histogram({0.0}, {"a"}, {{}}, "t", "x"), InputError);
  CHECK_THROWS_AS(svg_histogram({0.0, 1.0}, {"a"}, {{1.0, 2.0}}, "t", "x"), InputError);
}

TEST_CASE("labels are escaped") {
  const std::string s = svg_line_chart({{"a<b", {0.0, 1.0}, {1.0, 2.0}}}, "x & y", "i", "v");
  CHECK(s.find("a&lt;b") != std::string::npos);
  CHECK(s.find("x &amp; y") != std::string::npos);
}
