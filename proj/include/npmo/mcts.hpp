#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include "npmo/gridworld.hpp"
#include "npmo/policy_net.hpp"
#include "npmo/rng.hpp"

namespace npmo {

// Action preferences used for tree expansion and rollouts.
class Guidance {
 public:
  virtual ~Guidance() = default;
  virtual int capacity() const = 0;
  // Writes capacity * 5 logits for `state`.
  virtual void logits(const WorldState& state, std::vector<double>& out) const = 0;
};

// Equal logits: uniform over legal actions after masking.
class UniformGuidance final : public Guidance {
 public:
  explicit UniformGuidance(int capacity = kMaxObjects) : capacity_(capacity) {}
  int capacity() const override { return capacity_; }
  void logits(const WorldState& state, std::vector<double>& out) const override;

 private:
  int capacity_;
};

// Policy head of a network; params must outlive the guidance.
class NetworkGuidance final : public Guidance {
 public:
  explicit NetworkGuidance(const PolicyParams& params) : params_(&params) {}
  int capacity() const override { return params_->config().capacity; }
  void logits(const WorldState& state, std::vector<double>& out) const override;

 private:
  const PolicyParams* params_;
};

enum class SelectionMode { paper_literal, value_augmented };

struct SearchConfig {
  int iterations = 64;
  double exploration = std::sqrt(2.0);
  double gamma = 0.95;
  int sim_cap = 0;  // rollout step cap; 0 means the steps left before T_max
  SelectionMode mode = SelectionMode::value_augmented;
};

struct SearchNode {
  WorldState state;
  int parent = -1;
  int action = -1;           // flat index of the edge from the parent
  double edge_reward = 0.0;  // simulator reward on that edge
  int visits = 0;
  double value = 0.0;        // V_n
  bool terminal = false;     // done, or no executable primitive
  std::vector<int> children;
  std::vector<std::uint8_t> unexpanded;  // flat action mask
  int unexpanded_count = 0;
};

// Arena-allocated search tree; node 0 is the root.
class SearchTree {
 public:
  SearchTree(const WorldState& root, int capacity, double gamma);

  SearchNode& node(int id) { return nodes_[id]; }
  const SearchNode& node(int id) const { return nodes_[id]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int capacity() const { return capacity_; }
  double gamma() const { return gamma_; }

  // Return of taking the edge into `child`: r + gamma * V_n(child).
  double edge_value(int child) const {
    return nodes_[child].edge_reward + gamma_ * nodes_[child].value;
  }

  // Adds the child reached by `action` (which must be unexpanded at parent).
  int add_child(int parent, int action, WorldState state, double reward);

  // Range of edge values over visited non-root nodes, for normalisation.
  double value_min() const { return value_min_; }
  double value_max() const { return value_max_; }
  void observe_edge_value(double v);

 private:
  int make_node(WorldState state);

  std::vector<SearchNode> nodes_;
  int capacity_;
  double gamma_;
  double value_min_ = std::numeric_limits<double>::infinity();
  double value_max_ = -std::numeric_limits<double>::infinity();
};

// Descends from the root choosing the child with the best selection score
// until a terminal node or a node with an unexpanded action. Ties go to the
// lowest action index.
int select(const SearchTree& tree, const SearchConfig& config);

// Selection score of `child` under its parent.
double selection_score(const SearchTree& tree, int child, const SearchConfig& config);

// Samples an unexpanded action from the guidance restricted to unexpanded
// actions, steps the simulator and attaches the child. Throws FullyExpanded.
int expand(SearchTree& tree, int node, const Guidance& guidance, Rng& rng);

// Discounted return of a guidance rollout from `state` over at most `cap`
// steps (or until done / no executable primitive).
double simulate(const WorldState& state, const Guidance& guidance, double gamma, int cap,
                Rng& rng);

// Sets the leaf value, then walks to the root updating each ancestor with its
// best edge value and incrementing visit counts.
void backpropagate(SearchTree& tree, int leaf, double value);

// One select / expand / simulate / backpropagate round.
void run_iteration(SearchTree& tree, const Guidance& guidance, const SearchConfig& config,
                   Rng& rng);

struct RootChild {
  PrimitiveAction action;
  int visits = 0;
  double value = 0.0;       // V_n(child)
  double edge_value = 0.0;  // r + gamma * V_n(child)
};

struct SearchResult {
  PrimitiveAction action;
  std::vector<RootChild> children;
};

// Builds a fresh tree and returns the root child with the best edge value
// (lowest action index on ties). Throws NoLegalAction.
SearchResult search_with_stats(const WorldState& state, const Guidance& guidance,
                               const SearchConfig& config, Rng& rng);
PrimitiveAction search(const WorldState& state, const Guidance& guidance,
                       const SearchConfig& config, Rng& rng);

struct EpisodeMetrics {
  double total_reward = 0.0;
  int steps = 0;  // actions executed
  bool success = false;
  int path_length = 0;  // sum of unit moves over executed paths
};

struct EpisodeResult {
  std::vector<PrimitiveAction> actions;
  std::vector<TraceRecord> trace;
  std::vector<SearchResult> decisions;  // filled when requested
  EpisodeMetrics metrics;
};

// Searches and steps until the episode is done (or no primitive is
// executable, which counts as failure).
EpisodeResult plan_episode(const Scenario& scenario, const Guidance& guidance,
                           const SearchConfig& config, Rng& rng, bool keep_decisions = false);

// Acts directly from the guidance without search: argmax when greedy,
// otherwise sampled.
EpisodeResult play_policy_episode(const Scenario& scenario, const Guidance& guidance, bool greedy,
                                  Rng& rng);

// Recomputes metrics by replaying a trace on the scenario; throws
// IllegalAction if the trace does not replay.
EpisodeMetrics replay_metrics(const Scenario& scenario, std::span<const TraceRecord> trace);

// JSON array of the root children per decision.
void write_search_dump(std::ostream& out, std::span<const SearchResult> decisions);

}  // namespace npmo
