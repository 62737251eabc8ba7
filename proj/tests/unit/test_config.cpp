#include "adaptcm/config.hpp"
#include "adaptcm/scenario.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace adaptcm;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("sections, scalars and arrays") {
  const Config c = Config::parse(R"(
top = 1
[a]
x = 0.5        # trailing comment
name = "file#1.txt"
flag = true
list = [1, 2, 3]
table = [[0.0, 0.2],
         [0.6, 0.3]]
)");
  CHECK(c.integer("top") == 1);
  CHECK(c.number("a.x") == 0.5);
  CHECK(c.string("a.name") == "file#1.txt");
  CHECK(c.boolean("a.flag"));
  CHECK(c.integers("a.list") == std::vector<int>{1, 2, 3});
  const auto t = c.table("a.table");
  REQUIRE(t.size() == 2);
  CHECK(t[1] == std::vector<double>{0.6, 0.3});
  CHECK(c.number_or("a.missing", 7.0) == 7.0);
  CHECK(c.string_or("a.name", "x") == "file#1.txt");
}

TEST_CASE("type errors name the key") {
  const Config c = Config::parse("[s]\nv = \"abc\"\nf = 1.5\nb = 1\n");
  try {
    c.number("s.v");
    FAIL("expected error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("s.v") != std::string::npos);
  }
  CHECK_THROWS_AS(c.integer("s.f"), ConfigError);
  CHECK_THROWS_AS(c.boolean("s.b"), ConfigError);
  CHECK_THROWS_AS(c.string("s.f"), ConfigError);
  CHECK_THROWS_AS(c.numbers("s.f"), ConfigError);
}

TEST_CASE("syntax errors carry the line number") {
  try {
    Config::parse("a = 1\n[broken\n", "cfg");
    FAIL("expected error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::parse("just a line\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("a = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("a = abc\n"), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent.toml"), ConfigError);
}

TEST_CASE("overrides replace or add keys") {
  Config c = Config::parse("[t]\nn = 5\n");
  c.apply_override("t.n=9");
  c.apply_override("t.list = [1, 2]");
  CHECK(c.integer("t.n") == 9);
  CHECK(c.numbers("t.list").size() == 2);
  c.apply_override("new.name=\"x.txt\"");
  CHECK(c.string("new.name") == "x.txt");
  CHECK(c.keys() == std::vector<std::string>{"new.name", "t.list", "t.n"});
  CHECK_THROWS_AS(c.apply_override("novalue"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("t.n=abc"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("t.n.x=1"), ConfigError);
}

TEST_CASE("missing keys are listed by name") {
  const Config c = Config::parse("[a]\nx = 1\n");
  try {
    c.require({"a.x", "a.y", "b.z"});
    FAIL("expected error");
  } catch (const MissingKeys& e) {
    CHECK(e.keys() == std::vector<std::string>{"a.y", "b.z"});
    CHECK(std::string(e.what()).find("a.y b.z") != std::string::npos);
  }
}

TEST_CASE("shipped scenario configuration") {
  const Config c = Config::load(ADAPTCM_SOURCE_DIR "/configs/cstr.toml");
  const ScenarioConfig s = ScenarioConfig::from_config(c);
  CHECK(s.model.alpha == 0.8);
  CHECK(s.model.zeta == 0.1);
  CHECK(s.trainer.beta == 0.26);
  CHECK(s.trainer.beta_relaxed == 0.21);
  CHECK(s.trainer.learning_rate == 0.001);
  CHECK(s.trainer.hidden == std::vector<int>{15, 15, 15});
  CHECK(s.geodesic.segments == 20);
  CHECK(s.true_params == Vec{{1.25, 1.375}});
  CHECK(s.initial_estimate == Vec{{2.5, 1.522}});
  CHECK(s.initial_state == Vec{{0.6, 0.01}});
  CHECK(s.schedule.entries().size() == 2);
  CHECK(s.schedule.entries()[1].start == 0.6);
  CHECK(s.steps() == 10);
  CHECK(s.model.param_box.upper == Vec{{3.125, 3.438}});

  // Dropping any key is reported by its name.
  const std::string text = read_file(ADAPTCM_SOURCE_DIR "/configs/cstr.toml");
  std::string without = text;
  without.erase(without.find("zeta = 0.1"), std::string("zeta = 0.1").size());
  try {
    ScenarioConfig::from_config(Config::parse(without));
    FAIL("expected error");
  } catch (const MissingKeys& e) {
    CHECK(e.keys() == std::vector<std::string>{"model.zeta"});
  }
}

TEST_CASE("scenario validation") {
  ScenarioConfig s;
  s.duration = 1.05;
  CHECK_THROWS(s.validate());
  s = ScenarioConfig{};
  s.estimator_start = 0.25;
  CHECK_THROWS(s.validate());
  s = ScenarioConfig{};
  CHECK_NOTHROW(s.validate());
}

}
