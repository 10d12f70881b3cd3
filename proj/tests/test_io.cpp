#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "nlmetro/config.hpp"
#include "nlmetro/csv.hpp"
#include "nlmetro/errors.hpp"

using namespace nlmetro;

TEST_CASE("quantities with units") {
  CHECK(parse_quantity("54 ns", Dimension::time) == doctest::Approx(54e-9).epsilon(1e-15));
  CHECK(parse_quantity("20um", Dimension::length) == doctest::Approx(20e-6).epsilon(1e-15));
  CHECK(parse_quantity("1.5 GHz", Dimension::frequency) == 1.5e9);
  CHECK(parse_quantity("462 mhz", Dimension::frequency) == 462e6);
  CHECK(parse_quantity("3.17 mm", Dimension::length) == doctest::Approx(3.17e-3));
  CHECK(parse_quantity("0.25", Dimension::none) == 0.25);
  CHECK(parse_quantity("7", Dimension::time) == 7.0); // SI when bare
  CHECK_THROWS_AS(parse_quantity("5 ns", Dimension::length), InvalidConfig);
  CHECK_THROWS_AS(parse_quantity("abc", Dimension::none), InvalidConfig);
  CHECK_THROWS_AS(parse_quantity("1e6 parsecs", Dimension::length), InvalidConfig);
}

TEST_CASE("key-value files") {
  const auto f = KeyValueFile::parse("# comment\n"
                                     "pulse.fwhm = 54 ns   # trailing\n"
                                     "run.seed = 12\n"
                                     "run.ideal = true\n"
                                     "study.photons = 1e6, 2e6,5e6\n"
                                     "name = rb87\n");
  CHECK(f.get_quantity("pulse.fwhm", Dimension::time) == doctest::Approx(54e-9));
  CHECK(f.get_integer("run.seed") == 12);
  CHECK(f.get_bool("run.ideal", false));
  CHECK(f.get_bool("run.missing", true));
  CHECK(f.get_number("run.missing", 3.5) == 3.5);
  CHECK(f.get_string("name") == "rb87");
  const auto list = f.get_list("study.photons");
  REQUIRE(list.size() == 3);
  CHECK(list[2] == 5e6);
  CHECK_THROWS_AS(f.get_number("name"), InvalidConfig);
  CHECK_THROWS_AS(f.get_string("nope"), InvalidConfig);

  // serialize() round-trips
  const auto g = KeyValueFile::parse(f.serialize());
  CHECK(g.entries() == f.entries());

  CHECK_THROWS_AS(KeyValueFile::parse("no equals sign here\n"), InvalidConfig);
  CHECK_THROWS_AS(KeyValueFile::parse("a = 1\na = 2\n"), InvalidConfig);
  CHECK(KeyValueFile::parse("a = 1").checksum() != KeyValueFile::parse("a = 2").checksum());
}

TEST_CASE("fnv1a") {
  // published test vectors
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("csv round trip") {
  std::stringstream ss;
  {
    csv::Writer w(ss, {"n", "phi", "probe"}, "test/1");
    w << 1e6 << 0.1 << std::string("NL");
    w.end_row();
    w << 3.0 << 1.0 / 3.0 << std::string("L1");
    w.end_row();
  }
  std::stringstream junk;
  csv::Writer partial(junk, {"a", "b"});
  partial << 1.0;
  CHECK_THROWS_AS(partial.end_row(), InvalidConfig);
  partial << 2.0;
  CHECK_THROWS_AS(partial << 3.0, InvalidConfig);
  CHECK_THROWS_AS(partial << std::string("x,y"), InvalidConfig);

  const auto t = csv::parse(ss);
  CHECK(t.schema == "test/1");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.number(1, "phi") == 1.0 / 3.0);
  CHECK(t.text(0, "probe") == "NL");
  CHECK_THROWS_AS(t.column("missing"), InvalidConfig);

  for (double v : {0.1, 1.0 / 3.0, 6.0e7, 3.8e-16, -2.5e-4,
                   std::numeric_limits<double>::min(),
                   std::numeric_limits<double>::max()})
    CHECK(std::stod(csv::format(v)) == v);
}
