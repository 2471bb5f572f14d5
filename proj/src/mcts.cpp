#include "npmo/mcts.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "npmo/errors.hpp"

namespace npmo {

void UniformGuidance::logits(const WorldState& /*state*/, std::vector<double>& out) const {
  out.assign(static_cast<std::size_t>(capacity_) * kPrimitiveCount, 0.0);
}

void NetworkGuidance::logits(const WorldState& state, std::vector<double>& out) const {
  out = forward(*params_, make_input(state, params_->config().capacity)).logits;
}

SearchTree::SearchTree(const WorldState& root, int capacity, double gamma)
    : capacity_(capacity), gamma_(gamma) {
  make_node(root);
}

int SearchTree::make_node(WorldState state) {
  SearchNode n{std::move(state), -1, -1, 0.0, 0, 0.0, false, {}, {}, 0};
  n.unexpanded = legal_mask(n.state, capacity_);
  n.unexpanded_count =
      static_cast<int>(std::count(n.unexpanded.begin(), n.unexpanded.end(), std::uint8_t{1}));
  n.terminal = n.state.done() || n.unexpanded_count == 0;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int SearchTree::add_child(int parent, int action, WorldState state, double reward) {
  if (!nodes_[parent].unexpanded[action])
    throw FullyExpanded("action " + std::to_string(action) + " already expanded");
  const int id = make_node(std::move(state));
  SearchNode& child = nodes_[id];
  child.parent = parent;
  child.action = action;
  child.edge_reward = reward;
  SearchNode& p = nodes_[parent];
  p.unexpanded[action] = 0;
  --p.unexpanded_count;
  p.children.push_back(id);
  return id;
}

void SearchTree::observe_edge_value(double v) {
  value_min_ = std::min(value_min_, v);
  value_max_ = std::max(value_max_, v);
}

double selection_score(const SearchTree& tree, int child, const SearchConfig& config) {
  const SearchNode& c = tree.node(child);
  const SearchNode& p = tree.node(c.parent);
  const double parent_visits = std::max(p.visits, 1);
  const double explore =
      config.exploration * std::sqrt(std::log(parent_visits) / (1.0 + c.visits));
  if (config.mode == SelectionMode::paper_literal) return explore;
  const double range = tree.value_max() - tree.value_min();
  const double exploit = range > 0.0 ? (tree.edge_value(child) - tree.value_min()) / range : 0.0;
  return exploit + explore;
}

int select(const SearchTree& tree, const SearchConfig& config) {
  int id = 0;
  for (;;) {
    const SearchNode& n = tree.node(id);
    if (n.terminal || n.unexpanded_count > 0 || n.children.empty()) return id;
    int best = -1;
    double best_score = 0.0;
    for (int c : n.children) {
      const double s = selection_score(tree, c, config);
      if (best < 0 || s > best_score ||
          (s == best_score && tree.node(c).action < tree.node(best).action)) {
        best = c;
        best_score = s;
      }
    }
    id = best;
  }
}

int expand(SearchTree& tree, int node, const Guidance& guidance, Rng& rng) {
  SearchNode& n = tree.node(node);
  if (n.terminal || n.unexpanded_count == 0)
    throw FullyExpanded("node has no unexpanded action");
  std::vector<double> logits;
  guidance.logits(n.state, logits);
  const ActionDistribution dist(logits, n.unexpanded);
  const int action = dist.sample(rng);
  auto [next, outcome] = step(n.state, PrimitiveAction::from_index(action));
  return tree.add_child(node, action, std::move(next), outcome.reward);
}

double simulate(const WorldState& start, const Guidance& guidance, double gamma, int cap,
                Rng& rng) {
  WorldState state = start;
  const int capacity = guidance.capacity();
  std::vector<double> logits;
  double total = 0.0;
  double discount = 1.0;
  for (int i = 0; i < cap && !state.done(); ++i) {
    const auto mask = legal_mask(state, capacity);
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) break;
    guidance.logits(state, logits);
    const ActionDistribution dist(logits, mask);
    const StepOutcome out = apply_action(state, PrimitiveAction::from_index(dist.sample(rng)));
    total += discount * out.reward;
    discount *= gamma;
  }
  return total;
}

void backpropagate(SearchTree& tree, int leaf, double value) {
  SearchNode& l = tree.node(leaf);
  l.value = value;
  l.visits += 1;
  if (l.parent >= 0) tree.observe_edge_value(tree.edge_value(leaf));
  for (int id = l.parent; id >= 0; id = tree.node(id).parent) {
    SearchNode& n = tree.node(id);
    double best = 0.0;
    bool any = false;
    for (int c : n.children) {
      if (tree.node(c).visits == 0) continue;
      const double v = tree.edge_value(c);
      if (!any || v > best) best = v;
      any = true;
    }
    n.value = best;
    n.visits += 1;
    if (n.parent >= 0) tree.observe_edge_value(tree.edge_value(id));
  }
}

void run_iteration(SearchTree& tree, const Guidance& guidance, const SearchConfig& config,
                   Rng& rng) {
  int leaf = select(tree, config);
  double value = 0.0;
  if (!tree.node(leaf).terminal) {
    leaf = expand(tree, leaf, guidance, rng);
    const WorldState& s = tree.node(leaf).state;
    const int remaining = kMaxSteps - s.t();
    const int cap = config.sim_cap > 0 ? std::min(config.sim_cap, remaining) : remaining;
    value = simulate(s, guidance, config.gamma, cap, rng);
  }
  backpropagate(tree, leaf, value);
}

SearchResult search_with_stats(const WorldState& state, const Guidance& guidance,
                               const SearchConfig& config, Rng& rng) {
  if (config.iterations < 1) throw ConfigError("search needs at least one iteration");
  SearchTree tree(state, guidance.capacity(), config.gamma);
  const SearchNode& root = tree.node(0);
  if (state.done() || root.unexpanded_count == 0) throw NoLegalAction("no executable primitive");
  SearchResult result;
  if (root.unexpanded_count == 1) {
    const auto it = std::find(root.unexpanded.begin(), root.unexpanded.end(), std::uint8_t{1});
    result.action = PrimitiveAction::from_index(static_cast<int>(it - root.unexpanded.begin()));
    return result;
  }
  for (int k = 0; k < config.iterations; ++k) run_iteration(tree, guidance, config, rng);

  int best = -1;
  for (int c : tree.node(0).children) {
    const SearchNode& n = tree.node(c);
    result.children.push_back(
        RootChild{PrimitiveAction::from_index(n.action), n.visits, n.value, tree.edge_value(c)});
    if (best < 0 || tree.edge_value(c) > tree.edge_value(best) ||
        (tree.edge_value(c) == tree.edge_value(best) && n.action < tree.node(best).action))
      best = c;
  }
  std::sort(result.children.begin(), result.children.end(),
            [](const RootChild& a, const RootChild& b) { return a.action.index() < b.action.index(); });
  result.action = PrimitiveAction::from_index(tree.node(best).action);
  return result;
}

PrimitiveAction search(const WorldState& state, const Guidance& guidance,
                       const SearchConfig& config, Rng& rng) {
  return search_with_stats(state, guidance, config, rng).action;
}

EpisodeResult plan_episode(const Scenario& scenario, const Guidance& guidance,
                           const SearchConfig& config, Rng& rng, bool keep_decisions) {
  EpisodeResult result;
  WorldState state(std::make_shared<const Scenario>(scenario));
  while (!state.done()) {
    SearchResult decision;
    try {
      decision = search_with_stats(state, guidance, config, rng);
    } catch (const NoLegalAction&) {
      break;
    }
    const int t = state.t();
    StepOutcome out = apply_action(state, decision.action);
    result.actions.push_back(decision.action);
    result.metrics.total_reward += out.reward;
    result.metrics.path_length += out.moved_path.length();
    result.trace.push_back(TraceRecord{t, decision.action, std::move(out.moved_path), out.reward, out.done});
    if (keep_decisions) result.decisions.push_back(std::move(decision));
  }
  result.metrics.steps = state.t();
  result.metrics.success = state.success();
  return result;
}

EpisodeResult play_policy_episode(const Scenario& scenario, const Guidance& guidance, bool greedy,
                                  Rng& rng) {
  EpisodeResult result;
  WorldState state(std::make_shared<const Scenario>(scenario));
  std::vector<double> logits;
  while (!state.done()) {
    const auto mask = legal_mask(state, guidance.capacity());
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) break;
    guidance.logits(state, logits);
    const ActionDistribution dist(logits, mask);
    const auto action = PrimitiveAction::from_index(greedy ? dist.argmax() : dist.sample(rng));
    const int t = state.t();
    StepOutcome out = apply_action(state, action);
    result.actions.push_back(action);
    result.metrics.total_reward += out.reward;
    result.metrics.path_length += out.moved_path.length();
    result.trace.push_back(TraceRecord{t, action, std::move(out.moved_path), out.reward, out.done});
  }
  result.metrics.steps = state.t();
  result.metrics.success = state.success();
  return result;
}

EpisodeMetrics replay_metrics(const Scenario& scenario, std::span<const TraceRecord> trace) {
  EpisodeMetrics m;
  WorldState state(std::make_shared<const Scenario>(scenario));
  for (const TraceRecord& r : trace) {
    const StepOutcome out = apply_action(state, r.action);
    if (!(out.moved_path == r.path) || out.reward != r.reward || out.done != r.done)
      throw IllegalAction("trace diverges from the simulator at t=" + std::to_string(r.t));
    m.total_reward += out.reward;
    m.path_length += out.moved_path.length();
  }
  m.steps = state.t();
  m.success = state.success();
  return m;
}

void write_search_dump(std::ostream& out, std::span<const SearchResult> decisions) {
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < decisions.size(); ++t) {
    nlohmann::ordered_json d;
    d["decision"] = t;
    d["chosen"] = decisions[t].action.index();
    nlohmann::ordered_json children = nlohmann::ordered_json::array();
    for (const RootChild& c : decisions[t].children)
      children.push_back({{"object", c.action.object},
                          {"primitive", std::string(to_string(c.action.kind))},
                          {"N", c.visits},
                          {"V_n", c.value},
                          {"edge_value", c.edge_value}});
    d["children"] = std::move(children);
    all.push_back(std::move(d));
  }
  out << all.dump(1) << '\n';
}

}  // namespace npmo
