// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [--out DIR] [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../common/gradcheck.hpp"
#include "../common/helpers.hpp"
#include "npmo/bench.hpp"
#include "npmo/config.hpp"
#include "npmo/errors.hpp"
#include "npmo/imitation.hpp"
#include "npmo/mcts.hpp"
#include "npmo/pathfind.hpp"
#include "npmo/ppo.hpp"

namespace fs = std::filesystem;
using namespace npmo;
using namespace npmo::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path g_out = "acceptance_out";

// ---------------------------------------------------------------------------
// 1. A* against a breadth-first oracle

Outcome pathfinding_oracle() {
  const auto start = Clock::now();
  Rng rng(1001);
  int grids = 0, queries = 0, agree = 0, reachable = 0;
  while (grids < 1000) {
    const int m = rng.uniform_int(2, 12);
    ScenarioOptions options;
    options.n_immovable = rng.uniform_int(0, m * m / 3);
    const int free_cells = m * m - options.n_immovable;
    if (free_cells < 4) continue;
    const int n = rng.uniform_int(1, std::min(8, free_cells / 2 - 1 > 0 ? free_cells / 2 - 1 : 1));
    Scenario s;
    try {
      s = random_scenario(n, m, rng.next(), options);
    } catch (const PlacementFailure&) {
      continue;
    }
    ++grids;
    const WorldState st = start_state(s);
    for (int i = 0; i < n; ++i) {
      ++queries;
      const std::optional<int> oracle = bfs_distance(st, i);
      const std::optional<Path> p = astar_path(st, i);
      bool ok = p.has_value() == oracle.has_value();
      if (ok && p) {
        ++reachable;
        ok = p->length() == *oracle && p->end() == s.target[i] &&
             path_valid(*p, st.pose(i), blocked_cells(st, i), m);
      }
      agree += ok ? 1 : 0;
    }
  }
  const double secs = seconds_since(start);
  return {agree == queries && secs < 5.0,
          fmt("%d grids, %d/%d queries agree (%d reachable), %.2f s", grids, agree, queries, reachable, secs)};
}

// ---------------------------------------------------------------------------
// 2. Analytic against finite-difference gradients

Outcome gradient_check_criterion() {
  const auto start = Clock::now();
  double worst = 0.0;
  int coords = 0;
  for (Trunk trunk : {Trunk::dense, Trunk::conv}) {
    NetConfig c;
    c.grid = 6;
    c.capacity = 2;
    c.trunk = trunk;
    c.hidden1 = 32;
    c.hidden2 = 32;
    c.conv1 = 4;
    c.conv2 = 4;
    const GradCheckResult r = gradient_check(c, 2024, 50, 1e-4);
    worst = std::max(worst, r.max_rel_error);
    coords += r.coordinates;
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 10.0,
          fmt("%d coordinates (dense + conv), max relative error %.2e, %.2f s", coords, worst, secs)};
}

// ---------------------------------------------------------------------------
// 3. Simulator invariants over random-action episodes

Outcome simulator_invariants() {
  int episodes = 0, violations = 0, successes = 0, timeouts = 0;
  long steps_total = 0;
  std::string first_violation;
  auto violate = [&](const std::string& what) {
    if (violations++ == 0) first_violation = what;
  };
  for (std::uint64_t e = 0; episodes < 10000; ++e) {
    Rng rng(mix_seed(3003, e));
    const int m = rng.uniform_int(3, 10);
    ScenarioOptions options;
    options.n_immovable = rng.uniform_int(0, m);
    const int n = rng.uniform_int(1, std::min(10, (m * m - options.n_immovable) / 2 - 1));
    const std::uint64_t scenario_seed = rng.next();
    Scenario s;
    try {
      s = random_scenario(n, m, scenario_seed, options);
    } catch (const PlacementFailure&) {
      continue;
    }
    ++episodes;
    if (!(random_scenario(n, m, scenario_seed, options) == s)) violate("scenario generation not deterministic");

    WorldState st = start_state(s);
    std::vector<PrimitiveAction> actions;
    std::vector<double> rewards;
    double total = 0.0;
    while (!st.done()) {
      const std::vector<PrimitiveAction> legal = legal_actions(st);
      if (legal.empty()) break;
      const PrimitiveAction a = legal[rng.below(legal.size())];
      std::vector<bool> before(n);
      for (int i = 0; i < n; ++i) before[i] = st.at_target(i);
      const int t = st.t();
      const double r = apply_action(st, a).reward;
      // reward accounting from first principles
      double expect = kMoveReward;
      for (int i = 0; i < n; ++i) {
        if (!before[i] && st.at_target(i)) expect += kArrivalReward;
        if (before[i] && !st.at_target(i)) expect += kLeaveReward;
      }
      if (st.success()) expect += kSuccessReward;
      if (r != expect) violate(fmt("episode %d: reward %.1f, expected %.1f", episodes, r, expect));
      if (!layout_valid(st)) violate(fmt("episode %d: overlapping layout", episodes));
      if (st.t() != t + 1) violate(fmt("episode %d: step counter", episodes));
      if (st.t() > kMaxSteps) violate(fmt("episode %d: past T_max", episodes));
      actions.push_back(a);
      rewards.push_back(r);
      total += r;
    }
    if (!st.done() && !legal_actions(st).empty()) violate("episode stopped early");
    if (st.t() >= kMaxSteps && !st.done()) violate("T_max did not terminate");
    if (st.done() && !st.success() && st.t() != kMaxSteps) violate("done without success before T_max");
    successes += st.success() ? 1 : 0;
    timeouts += (!st.success() && st.t() == kMaxSteps) ? 1 : 0;
    steps_total += st.t();

    // determinism: the same actions replay to the same rewards and poses
    WorldState again = start_state(s);
    double again_total = 0.0;
    for (std::size_t k = 0; k < actions.size(); ++k) {
      const double r = apply_action(again, actions[k]).reward;
      if (r != rewards[k]) violate("replay reward differs");
      again_total += r;
    }
    if (!std::equal(again.poses().begin(), again.poses().end(), st.poses().begin(), st.poses().end()))
      violate("replay poses differ");
    if (again_total != total) violate("replay total differs");
  }
  std::string detail = fmt("%d episodes, %ld steps, %d solved, %d hit T_max, %d violations", episodes,
                           steps_total, successes, timeouts, violations);
  if (violations) detail += "; first: " + first_violation;
  return {violations == 0 && episodes == 10000, detail};
}

// ---------------------------------------------------------------------------
// 4. MCTS against exhaustive enumeration on 1-object 4x4 instances

// Best undiscounted return reachable within `depth` actions, and the first
// actions of every sequence attaining it.
double best_return(const WorldState& st, int depth, std::set<int>* first) {
  if (st.done() || depth == 0) return 0.0;
  double best = -1e18;
  for (const PrimitiveAction& a : legal_actions(st)) {
    const auto [next, out] = step(st, a);
    const double v = out.reward + best_return(next, depth - 1, nullptr);
    if (v > best + 1e-9) {
      best = v;
      if (first) first->clear();
    }
    if (first && std::abs(v - best) <= 1e-9) first->insert(a.index());
  }
  return best == -1e18 ? 0.0 : best;
}

Outcome mcts_micro_oracle() {
  int instances = 0, correct = 0;
  std::string misses;
  for (std::uint64_t seed = 0; instances < 20; ++seed) {
    ScenarioOptions options;
    options.n_immovable = static_cast<int>(seed % 5);
    Scenario s;
    try {
      s = random_scenario(1, 4, mix_seed(4004, seed), options);
    } catch (const PlacementFailure&) {
      continue;
    }
    const WorldState st = start_state(s);
    if (!astar_path(st, 0)) continue;  // unsolvable instance
    ++instances;
    std::set<int> optimal;
    best_return(st, 4, &optimal);
    SearchConfig cfg;
    cfg.iterations = 512;
    Rng rng(mix_seed(4005, seed));
    const PrimitiveAction a = search(st, UniformGuidance(1), cfg, rng);
    if (optimal.count(a.index())) {
      ++correct;
    } else {
      misses += fmt(" seed%llu", static_cast<unsigned long long>(seed));
    }
  }
  return {correct >= 19, fmt("%d/20 first actions optimal%s", correct, misses.empty() ? "" : (" (missed:" + misses + ")").c_str())};
}

// ---------------------------------------------------------------------------
// Shared training for criteria 5-8

struct Trained {
  ExpertDataset dataset;
  PolicyParams bc_ppo;
  PolicyParams ppo_only;
  fs::path bc_ppo_ckpt, ppo_only_ckpt;
  std::optional<Comparison> comparison;
  std::map<int, double> expert_steps;  // per object count, failures at T_max
};

RunConfig base_config() {
  RunConfig c = default_run_config();
  c.ppo.seed = 11;
  c.bc.seed = 12;
  return c;
}

PolicyParams train_ppo(const PolicyParams& init, const PpoConfig& cfg, const std::string& tag) {
  const auto start = Clock::now();
  const TrainResult r = train(init, cfg);
  {
    std::ofstream out(g_out / ("ppo_curve_" + tag + ".csv"));
    write_curve_csv(out, r.curve);
  }
  std::cout << fmt("  [%s] PPO %d iterations, best eval %.3f at iteration %d, %.0f s\n", tag.c_str(),
                   cfg.iterations, r.best_eval, r.best_iteration, seconds_since(start))
            << std::flush;
  return r.best;
}

Trained& trained() {
  static std::optional<Trained> t;
  if (t) return *t;
  const RunConfig c = base_config();
  auto start = Clock::now();
  ExpertDataset dataset = collect_expert_dataset(c.expert_episodes, c.expert_sampler, 10);
  PolicyParams bc = init_params(13, c.net);
  const std::vector<BcEpoch> curve = bc_train(bc, dataset, c.bc);
  std::cout << fmt("  expert dataset %zu episodes / %zu records; BC %d epochs, held-out accuracy %.3f, %.0f s\n",
                   dataset.episodes(), dataset.records.size(), c.bc.epochs,
                   curve.empty() ? 0.0 : curve.back().heldout_accuracy, seconds_since(start))
            << std::flush;
  PolicyParams bc_ppo = train_ppo(bc, c.ppo, "bc_ppo");
  PolicyParams ppo_only = train_ppo(init_params(13, c.net), c.ppo, "ppo_only");
  const fs::path bc_ppo_ckpt = g_out / "bc_ppo.ckpt", ppo_only_ckpt = g_out / "ppo_only.ckpt";
  save_checkpoint(bc_ppo_ckpt, bc_ppo);
  save_checkpoint(ppo_only_ckpt, ppo_only);
  t.emplace(Trained{std::move(dataset), std::move(bc_ppo), std::move(ppo_only), bc_ppo_ckpt, ppo_only_ckpt,
                    std::nullopt, {}});
  return *t;
}

const std::vector<std::string> kMethods{"MCTS+BC+PPO", "MCTS+PPO", "MCTS+random", "BC+PPO policy"};

const Comparison& comparison() {
  Trained& t = trained();
  if (t.comparison) return *t.comparison;
  const RunConfig c = base_config();
  std::vector<MethodSpec> methods(4);
  methods[0] = MethodSpec{kMethods[0], PlannerKind::mcts_policy, t.bc_ppo_ckpt, c.search, kMaxObjects};
  methods[1] = MethodSpec{kMethods[1], PlannerKind::mcts_policy, t.ppo_only_ckpt, c.search, kMaxObjects};
  methods[2] = MethodSpec{kMethods[2], PlannerKind::mcts_random, {}, c.search, kMaxObjects};
  methods[3] = MethodSpec{kMethods[3], PlannerKind::policy_greedy, t.bc_ppo_ckpt, c.search, kMaxObjects};
  const auto start = Clock::now();
  t.comparison = compare_methods(methods, c.suite, 21);
  std::cout << fmt("  comparison over %zu sizes x %d scenarios, %.0f s\n", c.suite.object_counts.size(),
                   c.suite.per_size, seconds_since(start));
  {
    std::ofstream out(g_out / "table.csv");
    write_table_csv(out, *t.comparison);
  }
  {
    std::ofstream out(g_out / "lengths.csv");
    write_lengths_csv(out, *t.comparison);
  }
  write_table_text(std::cout, *t.comparison);
  for (int n : c.suite.object_counts) {
    double steps = 0.0;
    const std::vector<Scenario> suite = make_suite(n, c.suite);
    for (const Scenario& s : suite) {
      const ExpertRollout r = run_expert(s);
      steps += r.success ? static_cast<double>(r.actions.size()) : kMaxSteps;
    }
    t.expert_steps[n] = steps / static_cast<double>(suite.size());
  }
  return *t.comparison;
}

const SuiteResult& result_of(const SizeResult& s, const std::string& method) {
  for (const SuiteResult& r : s.methods)
    if (r.method == method) return r;
  throw std::runtime_error("missing method " + method);
}

// ---------------------------------------------------------------------------
// 5. Ordering of the planners

Outcome ordering() {
  const Comparison& cmp = comparison();
  bool ok = true;
  std::string detail;
  for (const SizeResult& s : cmp.sizes) {
    const SuiteResult& ours = result_of(s, kMethods[0]);
    const SuiteResult& ppo = result_of(s, kMethods[1]);
    const SuiteResult& rnd = result_of(s, kMethods[2]);
    const SuiteResult& pol = result_of(s, kMethods[3]);
    const bool r_ok = ours.mean_reward >= ppo.mean_reward && ppo.mean_reward >= rnd.mean_reward &&
                      ours.mean_reward >= pol.mean_reward;
    const bool s_ok = ours.success_rate >= ppo.success_rate && ppo.success_rate >= rnd.success_rate &&
                      ours.success_rate >= pol.success_rate;
    ok = ok && r_ok && s_ok;
    detail += fmt("%sn=%d R %.1f/%.1f/%.1f/%.1f SR %.0f/%.0f/%.0f/%.0f%s", detail.empty() ? "" : "; ", s.objects,
                  ours.mean_reward, ppo.mean_reward, rnd.mean_reward, pol.mean_reward, ours.success_rate,
                  ppo.success_rate, rnd.success_rate, pol.success_rate, r_ok && s_ok ? "" : " (violated)");
  }
  return {ok, "ours/ppo-only/random/policy-only: " + detail};
}

// ---------------------------------------------------------------------------
// 6. Absolute target on the 5-object suite

Outcome five_object_target() {
  const Comparison& cmp = comparison();
  for (const SizeResult& s : cmp.sizes) {
    if (s.objects != 5) continue;
    const SuiteResult& ours = result_of(s, kMethods[0]);
    const double expert = trained().expert_steps.at(5);
    return {ours.success_rate >= 90.0 && ours.mean_steps <= 2.0 * expert,
            fmt("SR %.1f%% (>= 90), steps %.2f vs expert %.2f (<= %.2f)", ours.success_rate, ours.mean_steps, expert,
                2.0 * expert)};
  }
  return {false, "no 5-object suite in the comparison"};
}

// ---------------------------------------------------------------------------
// 7. Imitation budget trend

Outcome imitation_budget() {
  Trained& t = trained();
  const RunConfig c = base_config();
  const std::vector<std::pair<std::string, int>> budgets{{"0", 0}, {"low", 1}, {"medium", 10}, {"high", 100}};
  const double threshold = 0.9;
  PpoConfig ppo = c.ppo;
  ppo.iterations = 60;
  ppo.eval_every = 5;
  std::map<std::string, int> reach;  // iterations to threshold; iterations + 1 when never
  std::string detail;
  std::ofstream curves(g_out / "imitation_budget.csv");
  curves << "budget,epochs,iteration,eval_success_rate\n";
  for (const auto& [name, epochs] : budgets) {
    PolicyParams p = init_params(13, c.net);
    if (epochs > 0) {
      BcConfig bc = c.bc;
      bc.epochs = epochs;
      bc_train(p, t.dataset, bc);
    }
    const auto start = Clock::now();
    const TrainResult r = train(p, ppo);
    int hit = ppo.iterations + 1;
    for (const CurveRow& row : r.curve) {
      if (!row.eval_success) continue;
      curves << name << ',' << epochs << ',' << row.iteration << ',' << fmt("%.4f", *row.eval_success) << '\n';
      if (*row.eval_success >= threshold && hit > ppo.iterations) hit = row.iteration;
    }
    reach[name] = hit;
    std::cout << fmt("  [budget %s, %d epochs] threshold reached at %s, %.0f s\n", name.c_str(), epochs,
                     hit > ppo.iterations ? "never" : std::to_string(hit).c_str(), seconds_since(start))
              << std::flush;
    detail += fmt("%s%s=%s", detail.empty() ? "" : ", ", name.c_str(),
                  hit > ppo.iterations ? "never" : std::to_string(hit).c_str());
  }
  const bool medium_beats_zero = reach["medium"] < reach["0"];
  const bool over_imitation = reach["high"] >= reach["medium"];
  return {medium_beats_zero && over_imitation,
          fmt("iterations to eval SR >= %.2f: ", threshold) + detail};
}

// ---------------------------------------------------------------------------
// 8. Action-sequence length trend

Outcome length_trend() {
  const Comparison& cmp = comparison();
  bool ok = true;
  std::string detail;
  for (const std::string& m : kMethods) {
    double prev = -1.0;
    std::string row;
    for (const SizeResult& s : cmp.sizes) {
      const double len = length_stats(result_of(s, m)).mean;
      if (len < prev) ok = false;
      prev = len;
      row += fmt("%s%.2f", row.empty() ? "" : "/", len);
    }
    detail += (detail.empty() ? "" : "; ") + m + " " + row;
  }
  for (const SizeResult& s : cmp.sizes) {
    const double ours = length_stats(result_of(s, kMethods[0])).mean;
    for (std::size_t k = 1; k < kMethods.size(); ++k)
      if (ours > length_stats(result_of(s, kMethods[k])).mean) {
        ok = false;
        detail += fmt("; n=%d longer than %s", s.objects, kMethods[k].c_str());
      }
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 9. Byte-identical CLI outputs

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const fs::path root = g_out / "repro";
  fs::remove_all(root);
  fs::create_directories(root);
  save_checkpoint(root / "net.ckpt", init_params(5, NetConfig{}));
  std::ofstream(root / "config.json") << R"({"suite": {"per_size": 4}})";
  const std::string cli = NPMO_CLI;
  const std::string cfg = (root / "config.json").string();
  const std::string ckpt = (root / "net.ckpt").string();
  for (const std::string run : {"a", "b"}) {
    const fs::path d = root / run;
    const std::vector<std::string> commands{
        cli + " gen-scenarios --objects 3 --count 2 --seed 1 --out " + d.string(),
        cli + " plan --scenario " + (d / "scenarios_3.json").string() +
            " --index 1 --method r=mcts+random --iters 32 --seed 2 --out " + (d / "plan").string(),
        cli + " bench --config " + cfg + " --objects 3,5 --method p=mcts+policy:" + ckpt +
            " --iters 16 --seed 3 --out " + (d / "bench").string(),
        cli + " compare --config " + cfg + " --objects 3,5 --method r=mcts+random --method p=policy-greedy:" + ckpt +
            " --iters 16 --seed 4 --out " + (d / "compare").string()};
    for (const std::string& cmd : commands)
      if (std::system((cmd + " > /dev/null 2>&1").c_str()) != 0) return {false, "command failed: " + cmd};
  }
  int files = 0, identical = 0;
  std::string differing;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    if (fs::exists(other) && slurp(entry.path()) == slurp(other)) {
      ++identical;
    } else {
      differing += " " + fs::relative(entry.path(), root / "a").string();
    }
  }
  return {files >= 7 && identical == files,
          fmt("%d/%d CSV files byte-identical across two runs", identical, files) +
              (differing.empty() ? "" : ";" + differing)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int k = 1; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg == "--out" && k + 1 < argc) {
      g_out = argv[++k];
    } else {
      only.insert(std::atoi(arg.c_str()));
    }
  }
  fs::create_directories(g_out);
  const std::vector<Criterion> criteria{
      {1, "pathfinding matches the BFS oracle", pathfinding_oracle},
      {2, "gradients match finite differences", gradient_check_criterion},
      {3, "simulator invariants", simulator_invariants},
      {4, "MCTS finds optimal first actions", mcts_micro_oracle},
      {5, "planner ordering on reward and success", ordering},
      {6, "5-object success and plan length", five_object_target},
      {7, "imitation budget trend", imitation_budget},
      {8, "plan length trend", length_trend},
      {9, "reproducible CSV outputs", reproducibility},
  };
  std::vector<std::string> lines;
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cout << "criterion " << c.id << ": " << c.name << '\n' << std::flush;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    lines.push_back(fmt("%s  %d  %s: %s", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str()));
    std::cout << lines.back() << '\n' << std::flush;
  }
  std::cout << "\nsummary\n";
  for (const std::string& l : lines) std::cout << l << '\n';
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
