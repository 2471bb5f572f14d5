#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "npmo/imitation.hpp"
#include "npmo/policy_net.hpp"

namespace npmo {

struct PpoConfig {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.001;
  double gamma = 0.95;
  double lambda = 0.95;
  double learning_rate = 2e-4;
  int iterations = 1000;
  int n_envs = 8;
  int horizon = 64;
  int epochs = 4;
  int minibatch = 64;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  // Multiplies rewards before they reach the value head and advantages.
  double reward_scale = 0.1;
  std::uint64_t seed = 0;
  ScenarioSampler env;
  // Greedy-policy evaluation on a fixed suite.
  int eval_every = 25;
  int eval_episodes = 50;
  std::uint64_t eval_seed = 7;

  // 28 workers, 8K iterations.
  static PpoConfig paper_scale();
};

// Throws ConfigError when a field is out of range.
void validate(const PpoConfig& config);

struct RolloutStep {
  NetInput input;
  std::vector<std::uint8_t> legal;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;  // unscaled simulator reward
  double value = 0.0;   // value-head estimate
  bool done = false;    // episode ended after this step
  std::uint32_t scenario = 0;  // index into RolloutBatch::scenarios
  int t = 0;
};

struct EpisodeSummary {
  double reward = 0.0;
  int steps = 0;
  bool success = false;
};

// Env-major: env e owns steps [e * horizon, (e + 1) * horizon).
struct RolloutBatch {
  int n_envs = 0;
  int horizon = 0;
  std::vector<RolloutStep> steps;
  std::vector<double> bootstrap;  // value of the state after each env's last step
  std::vector<Scenario> scenarios;
  std::vector<EpisodeSummary> finished;
};

// Persistent parallel environments; episodes continue across collect calls.
class RolloutCollector {
 public:
  RolloutCollector(const ScenarioSampler& sampler, int n_envs, std::uint64_t seed);

  RolloutBatch collect(const PolicyParams& params, int horizon);

 private:
  struct Env {
    std::optional<WorldState> state;
    std::uint32_t scenario = 0;
    std::uint64_t episode = 0;
    double reward = 0.0;
    Rng rng;
  };
  void reset(std::size_t e);

  ScenarioSampler sampler_;
  std::uint64_t seed_;
  std::vector<Env> envs_;
  std::vector<Scenario> scenarios_;
};

RolloutBatch collect_rollouts(const PolicyParams& params, const ScenarioSampler& sampler,
                              int horizon, int n_envs, std::uint64_t seed);

struct Advantages {
  std::vector<double> raw;         // GAE before normalisation
  std::vector<double> normalized;  // zero mean, unit variance (raw when n < 2)
  std::vector<double> targets;     // raw + value estimate
};

Advantages compute_advantages(const RolloutBatch& batch, double gamma, double lambda,
                              double reward_scale = 1.0);

// min(r A, clip(r, 1 - eps, 1 + eps) A).
double clipped_surrogate(double ratio, double advantage, double epsilon);

struct UpdateStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double policy_loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate L^C
};

// Loss -L^C + c1 L^VF - c2 S over the listed samples; writes its mean gradient.
UpdateStats ppo_loss_gradient(const PolicyParams& params, const RolloutBatch& batch,
                              const Advantages& adv, std::span<const std::size_t> samples,
                              const PpoConfig& config, std::span<double> grad);

// K minibatch epochs with Adam. On a non-finite loss or gradient the
// parameters and optimiser state are restored and NonFiniteLoss is thrown.
UpdateStats ppo_update(PolicyParams& params, Adam& adam, const RolloutBatch& batch,
                       const PpoConfig& config, Rng& rng);

struct CurveRow {
  int iteration = 0;
  std::optional<double> mean_reward;   // finished rollout episodes
  std::optional<double> success_rate;  // finished rollout episodes
  double entropy = 0.0;
  double clip_fraction = 0.0;
  std::optional<double> eval_success;  // greedy policy on the eval suite
};

struct TrainResult {
  PolicyParams best;
  PolicyParams last;
  int best_iteration = 0;
  double best_eval = 0.0;
  std::vector<CurveRow> curve;
};

// Success rate of the greedy policy on `episodes` scenarios drawn from
// (sampler, seed).
double evaluate_greedy(const PolicyParams& params, const ScenarioSampler& sampler,
                       std::uint64_t seed, int episodes);

using TrainCallback = std::function<void(const CurveRow&)>;

// Alternates collection and update; evaluates at iteration 0 and every
// eval_every iterations and keeps the best-by-eval parameters.
TrainResult train(const PolicyParams& initial, const PpoConfig& config,
                  const TrainCallback& on_row = {});

void write_curve_csv(std::ostream& out, std::span<const CurveRow> curve);

}  // namespace npmo
