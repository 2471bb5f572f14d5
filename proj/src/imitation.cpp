#include "npmo/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "npmo/errors.hpp"
#include "npmo/scenario_io.hpp"

namespace npmo {

Scenario ScenarioSampler::sample(std::uint64_t seed, std::uint64_t k) const {
  const std::uint64_t h = mix_seed(seed, k);
  const int n = object_counts[h % object_counts.size()];
  ScenarioOptions opt;
  opt.n_immovable = n_immovable;
  opt.max_objects = capacity;
  return random_scenario(n, grid, mix_seed(h, 17), opt);
}

namespace {

constexpr int kDx[4] = {0, 0, -1, 1};
constexpr int kDy[4] = {-1, 1, 0, 0};

// Cells swept by the shortest route of `object` to its target when only
// immovable obstacles block; empty when even that route does not exist.
std::vector<std::uint8_t> relaxed_route(const WorldState& state, int object) {
  const Scenario& s = state.scenario();
  const int m = s.grid;
  std::vector<std::uint8_t> wall(static_cast<std::size_t>(m) * m, 0);
  for (const Rect& r : s.immovable)
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) wall[y * m + x] = 1;
  for (int i = 0; i < s.object_count(); ++i) {
    if (s.objects[i].movable) continue;
    const Rect r = footprint(s.objects[i], state.pose(i));
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) wall[y * m + x] = 1;
  }
  const ObjectSpec& o = s.objects[object];
  auto fits = [&](int x, int y) {
    if (x < 0 || y < 0 || x + o.w > m || y + o.h > m) return false;
    for (int yy = y; yy < y + o.h; ++yy)
      for (int xx = x; xx < x + o.w; ++xx)
        if (wall[yy * m + xx]) return false;
    return true;
  };
  const Pose start = state.pose(object);
  const Pose goal = s.target[object];
  std::vector<int> parent(static_cast<std::size_t>(m) * m, -2);
  std::vector<int> queue{start.y * m + start.x};
  parent[queue[0]] = -1;
  const int goal_cell = goal.y * m + goal.x;
  for (std::size_t head = 0; head < queue.size() && parent[goal_cell] == -2; ++head) {
    const int cell = queue[head];
    for (int d = 0; d < 4; ++d) {
      const int nx = cell % m + kDx[d];
      const int ny = cell / m + kDy[d];
      if (!fits(nx, ny) || parent[ny * m + nx] != -2) continue;
      parent[ny * m + nx] = cell;
      queue.push_back(ny * m + nx);
    }
  }
  std::vector<std::uint8_t> route(static_cast<std::size_t>(m) * m, 0);
  if (parent[goal_cell] == -2) return {};
  for (int cell = goal_cell; cell != -1; cell = parent[cell])
    for (int y = cell / m; y < cell / m + o.h; ++y)
      for (int x = cell % m; x < cell % m + o.w; ++x) route[y * m + x] = 1;
  return route;
}

int covered(const std::vector<std::uint8_t>& cells, int m, const Rect& r) {
  int n = 0;
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) n += cells[y * m + x];
  return n;
}

}  // namespace

PrimitiveAction scripted_expert_action(const WorldState& state) {
  const Scenario& s = state.scenario();
  const int n = s.object_count();
  const Occupancy occ(state);

  // Rule 1: direct deliveries.
  struct Candidate {
    int length;
    int object;
    Pose end;
  };
  std::vector<Candidate> direct;
  for (int i = 0; i < n; ++i) {
    if (!s.objects[i].movable || state.at_target(i)) continue;
    if (auto p = astar_path(occ, state, i)) direct.push_back({p->length(), i, p->end()});
  }
  std::sort(direct.begin(), direct.end(), [](const Candidate& a, const Candidate& b) {
    return a.length != b.length ? a.length < b.length : a.object < b.object;
  });
  for (const Candidate& c : direct) {
    const auto [next, outcome] = step(state, PrimitiveAction{c.object, PrimitiveKind::astar});
    const Occupancy after(next);
    const bool keeps_others = std::all_of(direct.begin(), direct.end(), [&](const Candidate& d) {
      return d.object == c.object || target_reachable(after, next, d.object);
    });
    if (keeps_others) return {c.object, PrimitiveKind::astar};
  }
  if (!direct.empty()) return {direct.front().object, PrimitiveKind::astar};

  // Rule 2: clear the obstacle-only routes of unfinished objects.
  const int m = s.grid;
  std::vector<std::vector<std::uint8_t>> routes(n);
  for (int i = 0; i < n; ++i)
    if (s.objects[i].movable && !state.at_target(i)) routes[i] = relaxed_route(state, i);
  struct Sweep {
    int cleared;
    int kind;
    int object;
  };
  std::optional<Sweep> best;
  for (int b = 0; b < n; ++b) {
    if (!s.objects[b].movable) continue;
    std::vector<std::uint8_t> others(static_cast<std::size_t>(m) * m, 0);
    bool blocking = false;
    const Rect here = footprint(s.objects[b], state.pose(b));
    for (int u = 0; u < n; ++u) {
      if (u == b || routes[u].empty()) continue;
      if (covered(routes[u], m, here) > 0) blocking = true;
      for (std::size_t k = 0; k < others.size(); ++k) others[k] |= routes[u][k];
    }
    if (!blocking) continue;
    for (int d = 0; d < 4; ++d) {
      const Path p = directional_sweep(occ, state, b, kAllPrimitives[d]);
      if (p.length() == 0) continue;
      const int cleared = covered(others, m, here) - covered(others, m, footprint(s.objects[b], p.end()));
      if (cleared <= 0) continue;
      const Sweep cand{cleared, d, b};
      if (!best || cand.cleared > best->cleared ||
          (cand.cleared == best->cleared &&
           (cand.kind < best->kind || (cand.kind == best->kind && cand.object < best->object))))
        best = cand;
    }
  }
  if (best) return {best->object, kAllPrimitives[best->kind]};

  // Rule 3: anything executable.
  const auto legal = legal_actions(state);
  if (legal.empty()) throw NoLegalAction("expert found no executable primitive");
  return legal.front();
}

ExpertRollout run_expert(const Scenario& scenario) {
  ExpertRollout out;
  WorldState state(std::make_shared<const Scenario>(scenario));
  while (!state.done()) {
    PrimitiveAction a;
    try {
      a = scripted_expert_action(state);
    } catch (const NoLegalAction&) {
      break;
    }
    out.actions.push_back(a);
    out.rewards.push_back(apply_action(state, a).reward);
  }
  out.success = state.success();
  return out;
}

namespace {

void append_episode(ExpertDataset& ds, const Scenario& scenario,
                    std::span<const PrimitiveAction> actions) {
  const auto episode = static_cast<std::uint32_t>(ds.scenarios.size());
  ds.scenarios.push_back(scenario);
  ds.episode_begin.push_back(ds.records.size());
  WorldState state(std::make_shared<const Scenario>(scenario));
  for (const PrimitiveAction& a : actions) {
    ExpertRecord r;
    r.episode = episode;
    r.t = state.t();
    r.action = a.index();
    r.input = make_input(state, ds.capacity);
    r.legal = legal_mask(state, ds.capacity);
    if (!r.legal[r.action])
      throw IllegalAction("expert action " + std::to_string(r.action) + " illegal at t=" +
                          std::to_string(r.t));
    r.reward = apply_action(state, a).reward;
    ds.records.push_back(std::move(r));
  }
}

}  // namespace

ExpertDataset collect_expert_dataset(std::size_t n_episodes, const ScenarioSampler& sampler,
                                     std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("need at least one expert episode");
  ExpertDataset ds;
  ds.capacity = sampler.capacity;
  const std::uint64_t budget = 100 + 20 * static_cast<std::uint64_t>(n_episodes);
  std::uint64_t attempts = 0;
  std::size_t early_success = 0;
  while (ds.episodes() < n_episodes) {
    if (attempts >= budget)
      throw ExpertTooWeak("expert solved only " + std::to_string(ds.episodes()) + " of " +
                          std::to_string(attempts) + " scenarios");
    const Scenario scenario = sampler.sample(seed, attempts);
    ++attempts;
    const ExpertRollout run = run_expert(scenario);
    if (run.success) {
      append_episode(ds, scenario, run.actions);
      if (attempts <= 100) ++early_success;
    }
    if (attempts == 100 && early_success < 10)
      throw ExpertTooWeak("expert success rate " + std::to_string(early_success) +
                          "% over the first 100 attempts");
  }
  return ds;
}

void write_dataset(const std::filesystem::path& records, const std::filesystem::path& bundle,
                   const ExpertDataset& ds) {
  write_scenarios(bundle, ds.scenarios);
  std::ofstream out(records);
  if (!out) throw Error("cannot write " + records.string());
  for (const ExpertRecord& r : ds.records) {
    nlohmann::ordered_json j;
    j["scenario_ref"] = r.episode;
    j["t"] = r.t;
    j["action_index"] = r.action;
    out << j.dump() << '\n';
  }
}

ExpertDataset read_dataset(const std::filesystem::path& records,
                           const std::filesystem::path& bundle, int capacity) {
  const std::vector<Scenario> scenarios = read_scenarios(bundle, capacity);
  std::vector<std::vector<PrimitiveAction>> actions(scenarios.size());
  std::ifstream in(records);
  if (!in) throw Error("cannot read " + records.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("", e.what(), lineno);
    }
    for (const char* key : {"scenario_ref", "t", "action_index"})
      if (!j.contains(key) || !j[key].is_number_integer()) throw ParseError(key, "missing or not an integer", lineno);
    const auto ref = j["scenario_ref"].get<std::size_t>();
    if (ref >= scenarios.size()) throw ParseError("scenario_ref", "out of range", lineno);
    if (j["t"].get<std::size_t>() != actions[ref].size())
      throw ParseError("t", "records of an episode must be consecutive", lineno);
    const int a = j["action_index"].get<int>();
    if (a < 0 || a >= capacity * kPrimitiveCount) throw ParseError("action_index", "out of range", lineno);
    actions[ref].push_back(PrimitiveAction::from_index(a));
  }
  ExpertDataset ds;
  ds.capacity = capacity;
  for (std::size_t e = 0; e < scenarios.size(); ++e) append_episode(ds, scenarios[e], actions[e]);
  return ds;
}

namespace {

double cross_entropy(std::span<const double> logits, const ExpertRecord& r,
                     std::span<double> dlogits, bool* correct) {
  const ActionDistribution dist(logits, r.legal);
  if (correct) *correct = dist.argmax() == r.action;
  if (!dlogits.empty()) {
    for (std::size_t a = 0; a < dlogits.size(); ++a) dlogits[a] = dist.prob(static_cast<int>(a));
    dlogits[r.action] -= 1.0;
  }
  return -dist.log_prob(r.action);
}

}  // namespace

BcMetrics evaluate_bc(const PolicyParams& params, const ExpertDataset& ds,
                      std::span<const std::size_t> records) {
  BcMetrics m;
  if (records.empty()) return m;
  std::size_t hits = 0;
  ForwardCache cache;
  for (std::size_t idx : records) {
    forward(params, ds.records[idx].input, cache);
    bool ok = false;
    m.loss += cross_entropy(cache.out.logits, ds.records[idx], {}, &ok);
    hits += ok ? 1 : 0;
  }
  m.loss /= static_cast<double>(records.size());
  m.accuracy = static_cast<double>(hits) / static_cast<double>(records.size());
  return m;
}

std::vector<BcEpoch> bc_train(PolicyParams& params, const ExpertDataset& ds,
                              const BcConfig& config) {
  if (ds.records.empty()) throw ConfigError("behaviour cloning needs a non-empty dataset");
  if (config.batch_size < 1) throw ConfigError("batch size must be positive");
  if (ds.capacity != params.config().capacity)
    throw ShapeMismatch("dataset capacity differs from the network's");
  Rng rng(mix_seed(config.seed, 0xbc));

  std::vector<std::size_t> episodes(ds.episodes());
  std::iota(episodes.begin(), episodes.end(), 0);
  for (std::size_t k = episodes.size(); k > 1; --k) std::swap(episodes[k - 1], episodes[rng.below(k)]);
  const auto held = static_cast<std::size_t>(
      std::floor(config.holdout_fraction * static_cast<double>(episodes.size())));
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    auto& dst = k < episodes.size() - held ? train : heldout;
    for (std::size_t r = ds.episode_begin[episodes[k]]; r < ds.episode_end(episodes[k]); ++r)
      dst.push_back(r);
  }
  std::sort(train.begin(), train.end());
  std::sort(heldout.begin(), heldout.end());
  const std::vector<std::size_t>& check = heldout.empty() ? train : heldout;

  AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  Adam adam(params.size(), ac);
  std::vector<double> grad(params.size());
  std::vector<const NetInput*> batch;
  std::vector<std::size_t> batch_idx;
  std::vector<BcEpoch> curve;
  std::vector<std::size_t> order = train;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      batch_idx.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(&ds.records[order[k]].input);
        batch_idx.push_back(order[k]);
      }
      loss_gradients(
          params, batch,
          [&](std::size_t i, std::span<const double> logits, double value,
              std::span<double> dlogits, double& dvalue) {
            (void)value;
            dvalue = 0.0;
            return cross_entropy(logits, ds.records[batch_idx[i]], dlogits, nullptr);
          },
          grad);
      adam.step(params.flat(), grad);
    }
    BcEpoch row;
    row.epoch = epoch;
    const BcMetrics tr = evaluate_bc(params, ds, train);
    row.train_loss = tr.loss;
    row.train_accuracy = tr.accuracy;
    const BcMetrics ho = evaluate_bc(params, ds, check);
    row.heldout_loss = ho.loss;
    row.heldout_accuracy = ho.accuracy;
    curve.push_back(row);
  }
  return curve;
}

}  // namespace npmo
