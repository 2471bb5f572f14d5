#pragma once

#include <filesystem>
#include <string>

#include "npmo/bench.hpp"

namespace npmo {

// Everything a run can be configured with. Every section and key is optional;
// absent keys keep their defaults. Unknown keys are rejected.
//
// {
//   "net":    {"grid", "capacity", "trunk": "dense"|"conv", "hidden1", "hidden2", "conv1", "conv2"},
//   "expert": {"episodes", "object_counts": [..], "n_immovable"},
//   "bc":     {"epochs", "batch_size", "learning_rate", "holdout_fraction"},
//   "ppo":    {"clip", "value_coef", "entropy_coef", "gamma", "lambda", "learning_rate",
//              "iterations", "n_envs", "horizon", "epochs", "minibatch", "max_grad_norm",
//              "reward_scale", "eval_every", "eval_episodes", "eval_seed",
//              "object_counts": [..], "n_immovable"},
//   "search": {"iterations", "exploration", "gamma", "sim_cap", "mode": "value_augmented"|"paper_literal"},
//   "suite":  {"object_counts": [..], "per_size", "grid"}
// }
struct RunConfig {
  NetConfig net;
  int expert_episodes = 300;
  ScenarioSampler expert_sampler{{3, 5, 8, 10}};
  BcConfig bc;
  PpoConfig ppo;
  SearchConfig search;
  SuiteConfig suite;
};

RunConfig default_run_config();

// Throws ParseError naming the offending key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace npmo
