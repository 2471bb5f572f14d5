#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "npmo/gridworld.hpp"
#include "npmo/policy_net.hpp"

namespace npmo {

// Draws training/evaluation scenarios. Episode k uses object count
// object_counts[hash % size] and a scenario seed derived from (seed, k).
struct ScenarioSampler {
  std::vector<int> object_counts{5};
  int grid = kDefaultGrid;
  int n_immovable = 0;
  int capacity = kMaxObjects;

  Scenario sample(std::uint64_t seed, std::uint64_t k) const;
};

// Greedy rearrangement rule:
//  1. among unfinished objects with an executable A* primitive take the
//     shortest route (lowest id on ties), preferring a move that leaves every
//     other currently routable object routable;
//  2. otherwise sweep the object that blocks some unfinished object's
//     obstacle-only route, maximising the number of route cells cleared
//     (ties: up, down, left, right, then lowest id);
//  3. otherwise the lowest (id, kind) legal action.
// Throws NoLegalAction when nothing is executable.
PrimitiveAction scripted_expert_action(const WorldState& state);

struct ExpertRecord {
  std::uint32_t episode = 0;
  int t = 0;
  int action = 0;  // flat index
  double reward = 0.0;
  NetInput input;
  std::vector<std::uint8_t> legal;
};

struct ExpertDataset {
  int capacity = kMaxObjects;
  std::vector<Scenario> scenarios;  // one per stored episode
  std::vector<ExpertRecord> records;
  std::vector<std::size_t> episode_begin;  // record offset of each episode

  std::size_t episodes() const { return scenarios.size(); }
  std::size_t episode_end(std::size_t e) const {
    return e + 1 < episode_begin.size() ? episode_begin[e + 1] : records.size();
  }
};

struct ExpertRollout {
  std::vector<PrimitiveAction> actions;
  std::vector<double> rewards;
  bool success = false;
};

// Runs the scripted expert on one scenario until the episode is done.
ExpertRollout run_expert(const Scenario& scenario);

// Keeps successful expert episodes only. Throws ExpertTooWeak when fewer than
// 10% of the first 100 attempts succeed or the attempt budget runs out.
ExpertDataset collect_expert_dataset(std::size_t n_episodes, const ScenarioSampler& sampler,
                                     std::uint64_t seed);

// JSON-lines {scenario_ref, t, action_index} plus a scenario bundle; reading
// replays every episode to rebuild observations and checks legality.
void write_dataset(const std::filesystem::path& records, const std::filesystem::path& bundle,
                   const ExpertDataset& dataset);
ExpertDataset read_dataset(const std::filesystem::path& records,
                           const std::filesystem::path& bundle, int capacity = kMaxObjects);

struct BcConfig {
  int epochs = 3000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct BcEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double heldout_loss = 0.0;
  double heldout_accuracy = 0.0;
};

// Mean masked cross-entropy of the expert actions and top-1 accuracy.
struct BcMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};
BcMetrics evaluate_bc(const PolicyParams& params, const ExpertDataset& dataset,
                      std::span<const std::size_t> records);

// Minimises the masked cross-entropy with Adam. The split is by episode; when
// it leaves no held-out episode the held-out columns report the training set.
std::vector<BcEpoch> bc_train(PolicyParams& params, const ExpertDataset& dataset,
                              const BcConfig& config);

}  // namespace npmo
