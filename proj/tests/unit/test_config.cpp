#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "npmo/config.hpp"
#include "npmo/errors.hpp"

using namespace npmo;

namespace {

void expect_field_error(const std::string& text, const std::string& field) {
  try {
    parse_run_config(text);
    FAIL("no ParseError for " << field);
  } catch (const ParseError& e) {
    CHECK(e.field() == field);
  }
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c = default_run_config();
  CHECK(c.net.grid == 10);
  CHECK(c.net.capacity == 20);
  CHECK(c.ppo.clip == 0.2);
  CHECK(c.ppo.gamma == 0.95);
  CHECK(c.ppo.lambda == 0.95);
  CHECK(c.search.iterations == 64);
  CHECK(c.suite.object_counts == std::vector<int>{3, 5, 8, 10});
  CHECK(c.suite.per_size == 100);
  CHECK(parse_run_config("{}").search.iterations == 64);
}

TEST_CASE("overrides") {
  const RunConfig c = parse_run_config(R"({
    "net": {"grid": 6, "capacity": 4, "trunk": "conv"},
    "ppo": {"iterations": 12, "object_counts": [2, 3], "learning_rate": 0.001},
    "search": {"iterations": 128, "mode": "paper_literal"},
    "suite": {"object_counts": [2], "per_size": 5}
  })");
  CHECK(c.net.trunk == Trunk::conv);
  CHECK(c.ppo.iterations == 12);
  CHECK(c.ppo.learning_rate == 0.001);
  CHECK(c.ppo.env.object_counts == std::vector<int>{2, 3});
  // the samplers follow the network's grid and width
  CHECK(c.ppo.env.grid == 6);
  CHECK(c.expert_sampler.capacity == 4);
  CHECK(c.search.mode == SelectionMode::paper_literal);
  CHECK(c.suite.per_size == 5);
}

TEST_CASE("errors name the offending key") {
  expect_field_error(R"({"ppo": {"clipp": 0.1}})", "ppo.clipp");
  expect_field_error(R"({"tuning": {}})", "tuning");
  expect_field_error(R"({"net": {"grid": "ten"}})", "net.grid");
  expect_field_error(R"({"net": {"grid": 0}})", "net.grid");
  expect_field_error(R"({"net": {"trunk": "rnn"}})", "net.trunk");
  expect_field_error(R"({"search": {"mode": "greedy"}})", "search.mode");
  expect_field_error(R"({"bc": {"holdout_fraction": 1.5}})", "bc.holdout_fraction");
  expect_field_error(R"({"ppo": {"clip": -1}})", "ppo");
  CHECK_THROWS_AS(parse_run_config("[1, 2]"), ParseError);
  CHECK_THROWS_AS(parse_run_config("{"), ParseError);
}

TEST_CASE("load from file") {
  const auto path = std::filesystem::temp_directory_path() / "npmo_config_test.json";
  std::ofstream(path) << R"({"bc": {"epochs": 3}})";
  CHECK(load_run_config(path).bc.epochs == 3);
  std::filesystem::remove(path);
  CHECK_THROWS(load_run_config(path));
}
