#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "npmo/policy_net.hpp"
#include "npmo/rng.hpp"

namespace npmo::testing {

// Random real-valued input: a sparse observation with values in [-1, 1] and
// a dense auxiliary vector, so that no ReLU sits exactly on its kink.
inline NetInput random_input(const NetConfig& config, Rng& rng, double density = 0.3) {
  NetInput in;
  for (int k = 0; k < config.obs_dim(); ++k)
    if (rng.uniform() < density) {
      in.obs_index.push_back(k);
      in.obs_value.push_back(rng.uniform(-1.0, 1.0));
    }
  for (int k = 0; k < config.aux_dim(); ++k) in.aux.push_back(rng.uniform(-1.0, 1.0));
  return in;
}

// Cross-entropy towards a fixed action over a fixed legal set plus a squared
// value error; smooth in the logits and the value.
struct ProbeLoss {
  std::vector<int> targets;
  std::vector<std::vector<std::uint8_t>> legal;
  std::vector<double> value_targets;

  double operator()(std::size_t i, std::span<const double> logits, double value,
                    std::span<double> dlogits, double& dvalue) const {
    const ActionDistribution dist(logits, legal[i]);
    for (std::size_t j = 0; j < logits.size(); ++j)
      dlogits[j] = dist.prob(static_cast<int>(j)) - (static_cast<int>(j) == targets[i] ? 1.0 : 0.0);
    const double err = value - value_targets[i];
    dvalue = 2.0 * err;
    return -dist.log_prob(targets[i]) + err * err;
  }
};

struct GradCheckResult {
  int coordinates = 0;
  double max_rel_error = 0.0;
  double max_abs_gradient = 0.0;
};

// Relative error |a - n| / max(|a|, |n|, floor) between the analytic and the
// central-difference gradient on `count` coordinates: two from every layer
// slice, the rest uniformly at random.
inline GradCheckResult gradient_check(const NetConfig& config, std::uint64_t seed, int count,
                                      double h = 1e-4, int batch = 3) {
  Rng rng(seed);
  PolicyParams params = init_params(seed, config);
  // non-zero biases so that every bias coordinate matters
  for (double& v : params.flat()) v += rng.uniform(-0.05, 0.05);
  std::vector<NetInput> inputs;
  ProbeLoss loss;
  for (int b = 0; b < batch; ++b) {
    inputs.push_back(random_input(config, rng));
    std::vector<std::uint8_t> legal(config.action_dim(), 0);
    for (auto& l : legal) l = rng.uniform() < 0.6 ? 1 : 0;
    const int target = static_cast<int>(rng.below(legal.size()));
    legal[target] = 1;
    loss.targets.push_back(target);
    loss.legal.push_back(std::move(legal));
    loss.value_targets.push_back(rng.uniform(-1.0, 1.0));
  }
  std::vector<const NetInput*> ptrs;
  for (const NetInput& in : inputs) ptrs.push_back(&in);

  std::vector<double> grad(params.size());
  loss_gradients(params, ptrs, loss, grad);

  std::vector<std::size_t> coords;
  for (const auto& s : params.slices())
    for (int k = 0; k < 2 && s.size > 0; ++k) coords.push_back(s.offset + rng.below(s.size));
  while (static_cast<int>(coords.size()) < count) coords.push_back(rng.below(params.size()));
  coords.resize(count);

  std::vector<double> scratch(params.size());
  auto eval = [&] { return loss_gradients(params, ptrs, loss, scratch); };
  GradCheckResult r;
  for (std::size_t c : coords) {
    const double saved = params.flat()[c];
    params.flat()[c] = saved + h;
    const double up = eval();
    params.flat()[c] = saved - h;
    const double down = eval();
    params.flat()[c] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(grad[c]), std::abs(numeric), 1e-6});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(grad[c] - numeric) / denom);
    r.max_abs_gradient = std::max(r.max_abs_gradient, std::abs(grad[c]));
    ++r.coordinates;
  }
  return r;
}

}  // namespace npmo::testing
