#include "npmo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "npmo/errors.hpp"
#include "npmo/mcts.hpp"

namespace npmo {

PpoConfig PpoConfig::paper_scale() {
  PpoConfig c;
  c.n_envs = 28;
  c.iterations = 8000;
  return c;
}

void validate(const PpoConfig& c) {
  if (!(c.clip > 0.0 && c.clip < 1.0)) throw ConfigError("clip must lie in (0, 1)");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (c.iterations < 0 || c.n_envs < 1 || c.horizon < 1 || c.epochs < 1 || c.minibatch < 1)
    throw ConfigError("iterations, envs, horizon, epochs and minibatch must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (c.env.object_counts.empty()) throw ConfigError("environment needs object counts");
}

RolloutCollector::RolloutCollector(const ScenarioSampler& sampler, int n_envs, std::uint64_t seed)
    : sampler_(sampler), seed_(seed) {
  envs_.resize(n_envs);
  for (int e = 0; e < n_envs; ++e) envs_[e].rng = Rng(mix_seed(seed, 1000 + e));
}

void RolloutCollector::reset(std::size_t e) {
  Env& env = envs_[e];
  Scenario s = sampler_.sample(mix_seed(seed_, e), env.episode++);
  env.scenario = static_cast<std::uint32_t>(scenarios_.size());
  scenarios_.push_back(s);
  env.state.emplace(std::make_shared<const Scenario>(std::move(s)));
  env.reward = 0.0;
}

RolloutBatch RolloutCollector::collect(const PolicyParams& params, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  const int capacity = params.config().capacity;
  RolloutBatch batch;
  batch.n_envs = static_cast<int>(envs_.size());
  batch.horizon = horizon;
  batch.steps.reserve(envs_.size() * static_cast<std::size_t>(horizon));
  // Scenario indices are relative to this batch.
  scenarios_.clear();
  for (std::size_t e = 0; e < envs_.size(); ++e) {
    Env& env = envs_[e];
    if (!env.state) {
      reset(e);
    } else {
      env.scenario = static_cast<std::uint32_t>(scenarios_.size());
      scenarios_.push_back(env.state->scenario());
    }
    for (int k = 0; k < horizon; ++k) {
      RolloutStep st;
      st.input = make_input(*env.state, capacity);
      st.legal = legal_mask(*env.state, capacity);
      const NetOutput out = forward(params, st.input);
      const ActionDistribution dist(out.logits, st.legal);
      st.action = dist.sample(env.rng);
      st.log_prob = dist.log_prob(st.action);
      st.value = out.value;
      st.scenario = env.scenario;
      st.t = env.state->t();
      const StepOutcome res = apply_action(*env.state, PrimitiveAction::from_index(st.action));
      st.reward = res.reward;
      env.reward += res.reward;
      const auto next_mask = legal_mask(*env.state, capacity);
      const bool stuck = !env.state->done() &&
                         std::find(next_mask.begin(), next_mask.end(), 1) == next_mask.end();
      st.done = res.done || stuck;
      batch.steps.push_back(std::move(st));
      if (batch.steps.back().done) {
        batch.finished.push_back({env.reward, env.state->t(), env.state->success()});
        reset(e);
      }
    }
    batch.bootstrap.push_back(forward(params, make_input(*env.state, capacity)).value);
  }
  batch.scenarios = scenarios_;
  return batch;
}

RolloutBatch collect_rollouts(const PolicyParams& params, const ScenarioSampler& sampler,
                              int horizon, int n_envs, std::uint64_t seed) {
  RolloutCollector collector(sampler, n_envs, seed);
  return collector.collect(params, horizon);
}

Advantages compute_advantages(const RolloutBatch& batch, double gamma, double lambda,
                              double reward_scale) {
  const std::size_t n = batch.steps.size();
  Advantages adv;
  adv.raw.assign(n, 0.0);
  adv.targets.assign(n, 0.0);
  const int h = batch.horizon;
  for (int e = 0; e < batch.n_envs; ++e) {
    double gae = 0.0;
    for (int k = h - 1; k >= 0; --k) {
      const std::size_t i = static_cast<std::size_t>(e) * h + k;
      const RolloutStep& s = batch.steps[i];
      const double next_value = k == h - 1 ? batch.bootstrap[e] : batch.steps[i + 1].value;
      const double live = s.done ? 0.0 : 1.0;
      const double delta = reward_scale * s.reward + gamma * next_value * live - s.value;
      gae = delta + gamma * lambda * live * gae;
      adv.raw[i] = gae;
      adv.targets[i] = gae + s.value;
    }
  }
  adv.normalized = adv.raw;
  if (n >= 2) {
    const double mean = std::accumulate(adv.raw.begin(), adv.raw.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv.raw) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv.normalized) a = (a - mean) / (sd + 1e-8);
  }
  return adv;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

UpdateStats ppo_loss_gradient(const PolicyParams& params, const RolloutBatch& batch,
                              const Advantages& adv, std::span<const std::size_t> samples,
                              const PpoConfig& config, std::span<double> grad) {
  UpdateStats st;
  std::vector<const NetInput*> inputs;
  inputs.reserve(samples.size());
  for (std::size_t i : samples) inputs.push_back(&batch.steps[i].input);
  const double eps = config.clip;
  int clipped = 0;
  const double total = loss_gradients(
      params, inputs,
      [&](std::size_t k, std::span<const double> logits, double value, std::span<double> dlogits,
          double& dvalue) {
        const std::size_t i = samples[k];
        const RolloutStep& s = batch.steps[i];
        const ActionDistribution dist(logits, s.legal);
        const double logp = dist.log_prob(s.action);
        const double ratio = std::exp(logp - s.log_prob);
        const double a = adv.normalized[i];
        const double surrogate = clipped_surrogate(ratio, a, eps);
        // d(surrogate)/d(ratio): zero when the clipped branch is active.
        const bool outside = (a >= 0.0 && ratio > 1.0 + eps) || (a < 0.0 && ratio < 1.0 - eps);
        const double dsurr = outside ? 0.0 : a;
        if (ratio < 1.0 - eps || ratio > 1.0 + eps) ++clipped;
        const double h = dist.entropy();
        for (std::size_t j = 0; j < dlogits.size(); ++j) {
          if (!dist.legal(static_cast<int>(j))) continue;
          const double p = dist.prob(static_cast<int>(j));
          const double dlogp = (static_cast<int>(j) == s.action ? 1.0 : 0.0) - p;
          const double dent = p > 0.0 ? -p * (dist.log_prob(static_cast<int>(j)) + h) : 0.0;
          dlogits[j] = -dsurr * ratio * dlogp - config.entropy_coef * dent;
        }
        const double err = value - adv.targets[i];
        dvalue = config.value_coef * 2.0 * err;
        st.mean_ratio += ratio;
        st.value_loss += err * err;
        st.entropy += h;
        st.surrogate += surrogate;
        return -surrogate + config.value_coef * err * err - config.entropy_coef * h;
      },
      grad);
  const double n = static_cast<double>(samples.size());
  st.policy_loss = total;
  if (n > 0) {
    st.mean_ratio /= n;
    st.value_loss /= n;
    st.entropy /= n;
    st.surrogate /= n;
    st.clip_fraction = clipped / n;
  }
  return st;
}

UpdateStats ppo_update(PolicyParams& params, Adam& adam, const RolloutBatch& batch,
                       const PpoConfig& config, Rng& rng) {
  if (batch.steps.empty()) throw ConfigError("empty rollout batch");
  const Advantages adv =
      compute_advantages(batch, config.gamma, config.lambda, config.reward_scale);
  const PolicyParams saved_params = params;
  const Adam saved_adam = adam;
  std::vector<double> grad(params.size());
  std::vector<std::size_t> order(batch.steps.size());
  std::iota(order.begin(), order.end(), 0);
  UpdateStats total;
  int rounds = 0;
  auto fail = [&](const std::string& why) {
    params = saved_params;
    adam = saved_adam;
    throw NonFiniteLoss(why);
  };
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
      const std::size_t stop = std::min(order.size(), start + config.minibatch);
      const std::span<const std::size_t> mb(order.data() + start, stop - start);
      const UpdateStats st = ppo_loss_gradient(params, batch, adv, mb, config, grad);
      if (!std::isfinite(st.policy_loss)) fail("non-finite PPO loss");
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      if (!std::isfinite(norm2)) fail("non-finite PPO gradient");
      const double norm = std::sqrt(norm2);
      if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) {
        const double scale = config.max_grad_norm / norm;
        for (double& g : grad) g *= scale;
      }
      adam.step(params.flat(), grad);
      total.mean_ratio += st.mean_ratio;
      total.clip_fraction += st.clip_fraction;
      total.value_loss += st.value_loss;
      total.entropy += st.entropy;
      total.policy_loss += st.policy_loss;
      total.surrogate += st.surrogate;
      ++rounds;
    }
  }
  for (double v : params.flat())
    if (!std::isfinite(v)) fail("non-finite parameter after update");
  const double r = std::max(rounds, 1);
  total.mean_ratio /= r;
  total.clip_fraction /= r;
  total.value_loss /= r;
  total.entropy /= r;
  total.policy_loss /= r;
  total.surrogate /= r;
  return total;
}

double evaluate_greedy(const PolicyParams& params, const ScenarioSampler& sampler,
                       std::uint64_t seed, int episodes) {
  if (episodes < 1) return 0.0;
  const NetworkGuidance guidance(params);
  Rng rng(seed);
  int wins = 0;
  for (int k = 0; k < episodes; ++k) {
    const Scenario s = sampler.sample(seed, static_cast<std::uint64_t>(k));
    wins += play_policy_episode(s, guidance, true, rng).metrics.success ? 1 : 0;
  }
  return static_cast<double>(wins) / episodes;
}

TrainResult train(const PolicyParams& initial, const PpoConfig& config,
                  const TrainCallback& on_row) {
  validate(config);
  TrainResult result{initial, initial, 0, 0.0, {}};
  PolicyParams& params = result.last;
  AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  Adam adam(params.size(), ac);
  RolloutCollector collector(config.env, config.n_envs, mix_seed(config.seed, 0xc011));
  Rng rng(mix_seed(config.seed, 0x99));

  auto evaluate = [&](int iteration, CurveRow& row) {
    const double sr = evaluate_greedy(params, config.env, config.eval_seed, config.eval_episodes);
    row.eval_success = sr;
    if (iteration == 0 || sr > result.best_eval) {
      result.best_eval = sr;
      result.best_iteration = iteration;
      result.best = params;
    }
  };

  CurveRow start;
  evaluate(0, start);
  result.curve.push_back(start);
  if (on_row) on_row(start);

  for (int it = 1; it <= config.iterations; ++it) {
    const RolloutBatch batch = collector.collect(params, config.horizon);
    const UpdateStats st = ppo_update(params, adam, batch, config, rng);
    CurveRow row;
    row.iteration = it;
    row.entropy = st.entropy;
    row.clip_fraction = st.clip_fraction;
    if (!batch.finished.empty()) {
      double reward = 0.0;
      int wins = 0;
      for (const auto& e : batch.finished) {
        reward += e.reward;
        wins += e.success ? 1 : 0;
      }
      row.mean_reward = reward / static_cast<double>(batch.finished.size());
      row.success_rate = static_cast<double>(wins) / static_cast<double>(batch.finished.size());
    }
    if (config.eval_every > 0 && (it % config.eval_every == 0 || it == config.iterations))
      evaluate(it, row);
    result.curve.push_back(row);
    if (on_row) on_row(row);
  }
  return result;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

void write_curve_csv(std::ostream& out, std::span<const CurveRow> curve) {
  out << "iteration,mean_reward,success_rate,entropy,clip_fraction,eval_success_rate\n";
  for (const CurveRow& r : curve)
    out << r.iteration << ',' << fmt(r.mean_reward) << ',' << fmt(r.success_rate) << ','
        << fmt(r.entropy) << ',' << fmt(r.clip_fraction) << ',' << fmt(r.eval_success) << '\n';
}

}  // namespace npmo
