#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../common/gradcheck.hpp"
#include "../common/helpers.hpp"
#include "npmo/errors.hpp"
#include "npmo/policy_net.hpp"

using namespace npmo;
using namespace npmo::testing;

namespace {

NetConfig tiny(Trunk trunk) {
  NetConfig c;
  c.grid = 6;
  c.capacity = 2;
  c.trunk = trunk;
  c.hidden1 = 16;
  c.hidden2 = 12;
  c.conv1 = 3;
  c.conv2 = 4;
  return c;
}

}  // namespace

TEST_CASE("make_input encodes the observation and the auxiliary vector") {
  const Scenario s = grid_scenario(6, {{{1, 1}, {1, 1}}, {{3, 3}, {5, 0}}}, {Rect{0, 5, 2, 1}});
  WorldState st = start_state(s);
  apply_action(st, {1, PrimitiveKind::down});
  const NetInput in = make_input(st, 2);
  CHECK(in.obs_value.empty());
  const Observation obs = encode_observation(st, 2);
  const std::vector<std::int32_t> active = obs.active();
  CHECK(in.obs_index == active);
  const NetConfig c = tiny(Trunk::dense);
  REQUIRE(in.aux.size() == static_cast<std::size_t>(c.aux_dim()));
  // finished flags, then the previous action one-hot
  CHECK(in.aux[0] == 1.0);
  CHECK(in.aux[1] == 0.0);
  for (int k = 0; k < c.action_dim(); ++k)
    CHECK(in.aux[2 + k] == (k == PrimitiveAction{1, PrimitiveKind::down}.index() ? 1.0 : 0.0));
}

TEST_CASE("forward output shapes and input checks") {
  for (Trunk trunk : {Trunk::dense, Trunk::conv}) {
    const NetConfig c = tiny(trunk);
    const PolicyParams p = init_params(3, c);
    Rng rng(1);
    const NetInput in = random_input(c, rng);
    const NetOutput out = forward(p, in);
    CHECK(out.logits.size() == static_cast<std::size_t>(c.action_dim()));
    CHECK(std::isfinite(out.value));
    NetInput bad = in;
    bad.aux.pop_back();
    CHECK_THROWS_AS(forward(p, bad), ShapeMismatch);
    bad = in;
    bad.obs_index.push_back(c.obs_dim());
    bad.obs_value.push_back(1.0);
    CHECK_THROWS_AS(forward(p, bad), ShapeMismatch);
  }
}

TEST_CASE("initialisation: Glorot-uniform weights, zero biases, deterministic") {
  for (Trunk trunk : {Trunk::dense, Trunk::conv}) {
    const NetConfig c = tiny(trunk);
    const PolicyParams p = init_params(9, c);
    CHECK(p == init_params(9, c));
    CHECK_FALSE(p == init_params(10, c));
    for (const auto& s : p.slices()) {
      const double* v = p.data(s);
      if (s.name.find("bias") != std::string::npos) {
        for (std::size_t k = 0; k < s.size; ++k) CHECK(v[k] == 0.0);
        continue;
      }
      // fan-in and fan-out from the stored shape: [in], [in, out] or [out, in, kh, kw]
      double fan_in, fan_out;
      if (s.shape.size() == 1) {
        fan_in = s.shape[0];
        fan_out = 1;
      } else if (s.shape.size() == 2) {
        fan_in = s.shape[0];
        fan_out = s.shape[1];
      } else {
        fan_in = static_cast<double>(s.shape[1]) * s.shape[2] * s.shape[3];
        fan_out = static_cast<double>(s.shape[0]) * s.shape[2] * s.shape[3];
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      double max_abs = 0.0;
      for (std::size_t k = 0; k < s.size; ++k) max_abs = std::max(max_abs, std::abs(v[k]));
      CAPTURE(s.name);
      CHECK(max_abs <= limit);
      CHECK(max_abs > 0.5 * limit);
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  for (Trunk trunk : {Trunk::dense, Trunk::conv}) {
    CAPTURE(trunk_name(trunk));
    const GradCheckResult r = gradient_check(tiny(trunk), 11, 50);
    CHECK(r.coordinates == 50);
    CHECK(r.max_abs_gradient > 1e-3);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("loss_gradients returns the batch mean") {
  const NetConfig c = tiny(Trunk::dense);
  const PolicyParams p = init_params(5, c);
  Rng rng(8);
  const NetInput a = random_input(c, rng), b = random_input(c, rng);
  ProbeLoss loss;
  for (int k = 0; k < 2; ++k) {
    loss.targets.push_back(k);
    loss.legal.emplace_back(c.action_dim(), 1);
    loss.value_targets.push_back(0.5 * k);
  }
  std::vector<double> ga(p.size()), gb(p.size()), gab(p.size());
  const NetInput* pa[] = {&a};
  const NetInput* pab[] = {&a, &b};
  ProbeLoss second = loss;
  second.targets = {loss.targets[1]};
  second.legal = {loss.legal[1]};
  second.value_targets = {loss.value_targets[1]};
  const NetInput* pb[] = {&b};
  const double la = loss_gradients(p, pa, loss, ga);
  const double lb = loss_gradients(p, pb, second, gb);
  const double lab = loss_gradients(p, pab, loss, gab);
  CHECK(lab == doctest::Approx((la + lb) / 2).epsilon(1e-12));
  for (std::size_t k = 0; k < p.size(); ++k)
    CHECK(gab[k] == doctest::Approx((ga[k] + gb[k]) / 2).epsilon(1e-9));
}

TEST_CASE("masked action distribution") {
  const std::vector<double> logits{0.5, 2.0, -1.0, 3.0};
  const std::vector<std::uint8_t> legal{1, 1, 1, 0};
  const ActionDistribution d(logits, legal);
  const double z = std::exp(0.5) + std::exp(2.0) + std::exp(-1.0);
  CHECK(d.prob(0) == doctest::Approx(std::exp(0.5) / z));
  CHECK(d.prob(1) == doctest::Approx(std::exp(2.0) / z));
  CHECK(d.prob(3) == 0.0);
  CHECK(std::isinf(d.log_prob(3)));
  CHECK(d.legal_count() == 3);
  CHECK(d.argmax() == 1);
  double h = 0.0;
  for (int k = 0; k < 3; ++k) h -= d.prob(k) * std::log(d.prob(k));
  CHECK(d.entropy() == doctest::Approx(h));
  // temperature flattens the distribution
  const ActionDistribution hot(logits, legal, 10.0);
  CHECK(hot.entropy() > d.entropy());
  CHECK_THROWS_AS(ActionDistribution(logits, std::vector<std::uint8_t>{0, 0, 0, 0}), NoLegalAction);
  CHECK_THROWS_AS(ActionDistribution(logits, std::vector<std::uint8_t>{1, 1}), ShapeMismatch);
  // ties go to the lowest index
  const ActionDistribution tie(std::vector<double>{1.0, 2.0, 2.0}, std::vector<std::uint8_t>{1, 1, 1});
  CHECK(tie.argmax() == 1);
}

TEST_CASE("sampling frequencies match the probabilities") {
  const std::vector<double> logits{0.0, 1.0, -0.5, 2.0, 0.3};
  const std::vector<std::uint8_t> legal{1, 1, 1, 0, 1};
  const ActionDistribution d(logits, legal);
  Rng rng(99);
  const int n = 100000;
  std::vector<int> counts(logits.size(), 0);
  for (int k = 0; k < n; ++k) ++counts[d.sample(rng)];
  CHECK(counts[3] == 0);
  for (std::size_t a = 0; a < logits.size(); ++a) {
    const double p = d.prob(static_cast<int>(a));
    const double sigma = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(counts[a] - n * p) <= 3 * sigma + 1e-9);
  }
}

TEST_CASE("Adam update matches the closed form") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam adam(2, cfg);
  std::vector<double> x{1.0, -2.0};
  const std::vector<double> g1{0.5, -4.0};
  adam.step(x, g1);
  // first step: m_hat = g, v_hat = g^2, so each coordinate moves by ~lr * sign(g)
  CHECK(x[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(x[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)));
  const std::vector<double> g2{1.0, 0.0};
  adam.step(x, g2);
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * 1.0;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 1.0;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  CHECK(x[0] == doctest::Approx(0.9 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)));
  CHECK(adam.steps() == 2);
}

TEST_CASE("checkpoint round trip and failures") {
  const auto dir = std::filesystem::temp_directory_path() / "npmo_ckpt_test";
  std::filesystem::create_directories(dir);
  for (Trunk trunk : {Trunk::dense, Trunk::conv}) {
    const PolicyParams p = init_params(4, tiny(trunk));
    save_checkpoint(dir / "a.ckpt", p);
    CHECK(load_checkpoint(dir / "a.ckpt") == p);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointMissing);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), ParseError);
  // truncated payload
  save_checkpoint(dir / "b.ckpt", init_params(4, tiny(Trunk::dense)));
  std::filesystem::resize_file(dir / "b.ckpt", std::filesystem::file_size(dir / "b.ckpt") - 8);
  CHECK_THROWS_AS(load_checkpoint(dir / "b.ckpt"), ParseError);
  std::filesystem::remove_all(dir);
}
