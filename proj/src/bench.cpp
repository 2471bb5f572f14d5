#include "npmo/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "npmo/errors.hpp"

namespace npmo {

namespace {

constexpr std::pair<PlannerKind, std::string_view> kPlannerNames[] = {
    {PlannerKind::policy_greedy, "policy-greedy"},
    {PlannerKind::policy_sample, "policy-sample"},
    {PlannerKind::mcts_random, "mcts+random"},
    {PlannerKind::mcts_policy, "mcts+policy"},
};

std::string num(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view to_string(PlannerKind kind) {
  for (const auto& [k, name] : kPlannerNames)
    if (k == kind) return name;
  return "?";
}

PlannerKind planner_from_string(std::string_view name) {
  for (const auto& [k, n] : kPlannerNames)
    if (n == name) return k;
  throw ConfigError("unknown planner kind: " + std::string(name));
}

void validate(const MethodSpec& method) {
  if (method.name.empty()) throw ConfigError("method needs a name");
  if (method.uses_network() && method.checkpoint.empty())
    throw ConfigError("method " + method.name + " needs a checkpoint");
  if (!method.uses_network() && !method.checkpoint.empty())
    throw ConfigError("method " + method.name + " does not take a checkpoint");
  if (method.search.iterations < 1) throw ConfigError("search iterations must be positive");
}

void SuiteResult::aggregate() {
  mean_reward = mean_steps = success_rate = 0.0;
  if (records.empty()) return;
  double reward = 0.0, steps = 0.0;
  int wins = 0;
  for (const ScenarioRecord& r : records) {
    reward += r.reward;
    steps += r.steps;
    wins += r.success ? 1 : 0;
  }
  const double n = static_cast<double>(records.size());
  mean_reward = reward / n;
  mean_steps = steps / n;
  success_rate = 100.0 * wins / n;
}

EpisodeResult run_method(const MethodSpec& method, const PolicyParams* params,
                         const Scenario& scenario, Rng& rng) {
  if (method.uses_network() && params == nullptr)
    throw CheckpointMissing("method " + method.name + " has no network loaded");
  switch (method.kind) {
    case PlannerKind::policy_greedy:
      return play_policy_episode(scenario, NetworkGuidance(*params), true, rng);
    case PlannerKind::policy_sample:
      return play_policy_episode(scenario, NetworkGuidance(*params), false, rng);
    case PlannerKind::mcts_random:
      return plan_episode(scenario, UniformGuidance(method.capacity), method.search, rng);
    case PlannerKind::mcts_policy:
      return plan_episode(scenario, NetworkGuidance(*params), method.search, rng);
  }
  throw ConfigError("unhandled planner kind");
}

SuiteResult run_suite(const MethodSpec& method, const PolicyParams* params,
                      std::span<const Scenario> suite, std::uint64_t seed, unsigned threads) {
  validate(method);
  SuiteResult result;
  result.method = method.name;
  result.records.resize(suite.size());
  auto run_one = [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(mix_seed(seed, i));
    const EpisodeResult ep = run_method(method, params, suite[i], rng);
    ScenarioRecord& r = result.records[i];
    r.index = i;
    r.objects = suite[i].movable_count();
    r.reward = ep.metrics.total_reward;
    r.executed = ep.metrics.steps;
    r.success = ep.metrics.success;
    r.steps = r.success ? r.executed : kMaxSteps;
    r.path_length = ep.metrics.path_length;
    r.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(suite.size(), 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < suite.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < suite.size();) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  result.aggregate();
  return result;
}

SuiteResult run_suite(const MethodSpec& method, std::span<const Scenario> suite,
                      std::uint64_t seed, unsigned threads) {
  validate(method);
  std::unique_ptr<PolicyParams> params;
  if (method.uses_network())
    params = std::make_unique<PolicyParams>(load_checkpoint(method.checkpoint));
  return run_suite(method, params.get(), suite, seed, threads);
}

std::vector<Scenario> make_suite(int objects, const SuiteConfig& config) {
  if (config.per_size < 0) throw ConfigError("suite size must be non-negative");
  std::vector<Scenario> suite;
  suite.reserve(config.per_size);
  const std::uint64_t base = mix_seed(config.seed, static_cast<std::uint64_t>(objects));
  for (int i = 0; i < config.per_size; ++i)
    suite.push_back(random_scenario(objects, config.grid, mix_seed(base, i)));
  return suite;
}

Comparison compare_methods(std::span<const MethodSpec> methods, const SuiteConfig& suite,
                           std::uint64_t seed, unsigned threads) {
  if (methods.size() < 2) throw ConfigError("a comparison needs at least two methods");
  if (suite.object_counts.empty()) throw ConfigError("a comparison needs object counts");
  std::vector<std::unique_ptr<PolicyParams>> params;
  for (const MethodSpec& m : methods) {
    validate(m);
    params.push_back(m.uses_network() ? std::make_unique<PolicyParams>(load_checkpoint(m.checkpoint))
                                      : nullptr);
  }
  Comparison cmp;
  for (const MethodSpec& m : methods) cmp.methods.push_back(m.name);
  for (int n : suite.object_counts) {
    const std::vector<Scenario> scenarios = make_suite(n, suite);
    SizeResult size{n, {}};
    const std::uint64_t size_seed = mix_seed(seed, static_cast<std::uint64_t>(n));
    for (std::size_t k = 0; k < methods.size(); ++k)
      size.methods.push_back(run_suite(methods[k], params[k].get(), scenarios, size_seed, threads));
    cmp.sizes.push_back(std::move(size));
  }
  return cmp;
}

LengthStats length_stats(const SuiteResult& result) {
  LengthStats s;
  const std::size_t n = result.records.size();
  if (n == 0) return s;
  for (const ScenarioRecord& r : result.records) s.mean += r.steps;
  s.mean /= static_cast<double>(n);
  double var = 0.0;
  for (const ScenarioRecord& r : result.records) var += (r.steps - s.mean) * (r.steps - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(n));
  s.sem = s.stddev / std::sqrt(static_cast<double>(n));
  return s;
}

namespace {

struct TableRow {
  std::string objects;
  std::string metric;
  std::vector<std::string> cells;
};

constexpr std::string_view kMetrics[] = {"Rewards (undiscounted sum)", "Steps", "SR(%)"};

double metric_of(const SuiteResult& r, int metric) {
  return metric == 0 ? r.mean_reward : metric == 1 ? r.mean_steps : r.success_rate;
}

std::vector<TableRow> table_rows(const Comparison& cmp) {
  std::vector<TableRow> rows;
  const std::size_t n_methods = cmp.methods.size();
  for (const SizeResult& size : cmp.sizes)
    for (int m = 0; m < 3; ++m) {
      TableRow row{std::to_string(size.objects), std::string(kMetrics[m]), {}};
      for (const SuiteResult& r : size.methods) row.cells.push_back(num(metric_of(r, m), 2));
      rows.push_back(std::move(row));
    }
  for (int m = 0; m < 3; ++m) {
    TableRow row{"average", std::string(kMetrics[m]), {}};
    for (std::size_t k = 0; k < n_methods; ++k) {
      double sum = 0.0;
      for (const SizeResult& size : cmp.sizes) sum += metric_of(size.methods[k], m);
      row.cells.push_back(num(cmp.sizes.empty() ? 0.0 : sum / cmp.sizes.size(), 2));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_table_csv(std::ostream& out, const Comparison& cmp) {
  out << "objects,metric";
  for (const std::string& m : cmp.methods) out << ',' << csv_field(m);
  out << '\n';
  for (const TableRow& row : table_rows(cmp)) {
    out << row.objects << ',' << csv_field(row.metric);
    for (const std::string& c : row.cells) out << ',' << c;
    out << '\n';
  }
}

void write_table_text(std::ostream& out, const Comparison& cmp) {
  const std::vector<TableRow> rows = table_rows(cmp);
  std::vector<std::size_t> width{7, 6};
  for (const std::string& m : cmp.methods) width.push_back(m.size());
  for (const TableRow& row : rows) {
    width[0] = std::max(width[0], row.objects.size());
    width[1] = std::max(width[1], row.metric.size());
    for (std::size_t k = 0; k < row.cells.size(); ++k)
      width[k + 2] = std::max(width[k + 2], row.cells[k].size());
  }
  auto line = [&](const std::string& a, const std::string& b, const std::vector<std::string>& cells) {
    out << std::left << std::setw(static_cast<int>(width[0])) << a << "  "
        << std::setw(static_cast<int>(width[1])) << b;
    for (std::size_t k = 0; k < cells.size(); ++k)
      out << "  " << std::right << std::setw(static_cast<int>(width[k + 2])) << cells[k];
    out << '\n';
  };
  line("objects", "metric", cmp.methods);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  out << std::string(total - 2, '-') << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    line(rows[i].objects, rows[i].metric, rows[i].cells);
    if (i % 3 == 2) out << std::string(total - 2, '-') << '\n';
  }
}

void write_lengths_csv(std::ostream& out, const Comparison& cmp) {
  out << "objects,method,mean,stddev,sem,n\n";
  for (const SizeResult& size : cmp.sizes)
    for (const SuiteResult& r : size.methods) {
      const LengthStats s = length_stats(r);
      out << size.objects << ',' << csv_field(r.method) << ',' << num(s.mean, 4) << ','
          << num(s.stddev, 4) << ',' << num(s.sem, 4) << ',' << r.records.size() << '\n';
    }
}

void write_records_csv(std::ostream& out, std::span<const SuiteResult> results) {
  out << "method,objects,index,reward,steps,executed,success,path_length\n";
  for (const SuiteResult& res : results)
    for (const ScenarioRecord& r : res.records)
      out << csv_field(res.method) << ',' << r.objects << ',' << r.index << ',' << num(r.reward, 2)
          << ',' << r.steps << ',' << r.executed << ',' << (r.success ? 1 : 0) << ','
          << r.path_length << '\n';
}

void write_timing_csv(std::ostream& out, std::span<const SuiteResult> results) {
  out << "method,objects,index,wall_ms\n";
  for (const SuiteResult& res : results)
    for (const ScenarioRecord& r : res.records)
      out << csv_field(res.method) << ',' << r.objects << ',' << r.index << ','
          << num(r.wall_ms, 3) << '\n';
}

std::span<const ReferenceRow> reference_results() {
  static constexpr ReferenceRow kRows[] = {
      {"PPO", 5, -18.6, 34.0, 80},       {"PPO", 10, -104.8, 50.0, 0},
      {"PPO", 15, -107.2, 50.0, 0},      {"PPO", 20, -110.8, 50.0, 0},
      {"PPO", 0, -85.35, 46.00, 20.0},   {"DQN", 5, -11.2, 14.0, 80},
      {"DQN", 10, -78.8, 42.0, 20},      {"DQN", 15, -123.2, 50.0, 0},
      {"DQN", 20, -125.0, 50.0, 0},      {"DQN", 0, -84.55, 39.00, 25.0},
      {"IL", 5, 45.8, 14.2, 100},        {"IL", 10, 2.5, 34.9, 50},
      {"IL", 15, -35.8, 50.0, 0},        {"IL", 20, 12.0, 47.4, 20},
      {"IL", 0, 6.13, 36.63, 42.5},      {"PPO+IL", 5, 59.2, 6.4, 100},
      {"PPO+IL", 10, 23.3, 26.3, 70},    {"PPO+IL", 15, -6.5, 44.9, 20},
      {"PPO+IL", 20, -20.8, 50.0, 0},    {"PPO+IL", 0, 13.78, 31.90, 47.5},
      {"MCTS+Random", 5, -37.5, 47.9, 20}, {"MCTS+Random", 10, -42.6, 50.0, 0},
      {"MCTS+Random", 15, -31.6, 50.0, 0}, {"MCTS+Random", 20, -28.4, 50.0, 0},
      {"MCTS+Random", 0, -35.00, 49.48, 5.0}, {"MCTS+DQN", 5, 59.8, 6.2, 100},
      {"MCTS+DQN", 10, -4.3, 26.7, 60},  {"MCTS+DQN", 15, -19.0, 40.6, 30},
      {"MCTS+DQN", 20, -26.6, 50.0, 0},  {"MCTS+DQN", 0, 2.48, 30.88, 47.5},
      {"MCTS+PPO", 5, 57.4, 8.4, 100},   {"MCTS+PPO", 10, 37.9, 31.3, 80},
      {"MCTS+PPO", 15, 23.3, 40.7, 50},  {"MCTS+PPO", 20, 21.8, 46.6, 30},
      {"MCTS+PPO", 0, 35.10, 31.75, 65.0}, {"MCTS+PPO+IL", 5, 61.0, 5.0, 100},
      {"MCTS+PPO+IL", 10, 41.3, 22.1, 70}, {"MCTS+PPO+IL", 15, 64.1, 29.9, 90},
      {"MCTS+PPO+IL", 20, 51.6, 43.4, 60}, {"MCTS+PPO+IL", 0, 54.50, 25.10, 80.0},
  };
  return kRows;
}

void write_reference_csv(std::ostream& out) {
  out << "method,objects,rewards,steps,success_rate\n";
  for (const ReferenceRow& r : reference_results())
    out << r.method << ',' << (r.objects == 0 ? std::string("average") : std::to_string(r.objects))
        << ',' << num(r.rewards, 2) << ',' << num(r.steps, 2) << ',' << num(r.success_rate, 1)
        << '\n';
}

}  // namespace npmo
