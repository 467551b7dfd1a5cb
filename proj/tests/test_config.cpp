#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nscm/config.hpp"
#include "nscm/rng.hpp"

using namespace nscm;

TEST_CASE("config parses sections, comments, and lists") {
  Config cfg = Config::from_string(
      "# comment\n"
      "top = 1\n"
      "[sec]\n"
      "name = hello world\n"
      "xs = 1.0, -2.5, 3\n"
      "flag = true\n"
      "; another comment\n"
      "count = 42\n");
  CHECK(cfg.number("top") == 1.0);
  CHECK(cfg.str("sec.name") == "hello world");
  auto xs = cfg.numbers("sec.xs");
  REQUIRE(xs.size() == 3);
  CHECK(xs[1] == -2.5);
  CHECK(cfg.boolean("sec.flag", false));
  CHECK(cfg.integer("sec.count") == 42);
  CHECK(cfg.number("absent", 7.0) == 7.0);
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS(Config::from_string("just a line\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_string("[open\n"), ConfigError);
  Config cfg = Config::from_string("a = text\n");
  CHECK_THROWS_AS(cfg.number("a"), ConfigError);
  CHECK_THROWS_AS(cfg.number("missing"), ConfigError);
  CHECK_THROWS_AS(cfg.integer("a", 2), ConfigError);
}

TEST_CASE("substreams are stable and independent") {
  CHECK(substream_seed(7, "noise", 0) == substream_seed(7, "noise", 0));
  CHECK(substream_seed(7, "noise", 0) != substream_seed(7, "noise", 1));
  CHECK(substream_seed(7, "noise", 0) != substream_seed(7, "init", 0));
  CHECK(substream_seed(7, "noise", 0) != substream_seed(8, "noise", 0));

  GaussianStream a(7, "noise");
  GaussianStream b(7, "noise");
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("gaussian stream has sane moments") {
  GaussianStream g(123, "moments");
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    double x = g.next();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}
