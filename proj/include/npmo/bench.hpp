#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "npmo/imitation.hpp"
#include "npmo/mcts.hpp"
#include "npmo/policy_net.hpp"
#include "npmo/ppo.hpp"

namespace npmo {

enum class PlannerKind { policy_greedy, policy_sample, mcts_random, mcts_policy };

std::string_view to_string(PlannerKind kind);
PlannerKind planner_from_string(std::string_view name);  // throws ConfigError

struct MethodSpec {
  std::string name;
  PlannerKind kind = PlannerKind::mcts_random;
  std::filesystem::path checkpoint;  // required iff the planner uses a network
  SearchConfig search;
  int capacity = kMaxObjects;  // guidance width for mcts+random

  bool uses_network() const { return kind != PlannerKind::mcts_random; }
};

// Throws ConfigError for an empty name or a checkpoint mismatch.
void validate(const MethodSpec& method);

struct ScenarioRecord {
  std::size_t index = 0;
  int objects = 0;
  double reward = 0.0;   // undiscounted episode sum
  int steps = 0;         // actions executed; T_max for failed runs
  int executed = 0;      // actions executed
  bool success = false;
  int path_length = 0;
  double wall_ms = 0.0;  // not part of any deterministic output
};

struct SuiteResult {
  std::string method;
  std::vector<ScenarioRecord> records;
  double mean_reward = 0.0;
  double mean_steps = 0.0;
  double success_rate = 0.0;  // percent

  // Recomputes the aggregates from the records.
  void aggregate();
};

// Runs one method over the suite. Scenario i uses an rng seeded from
// (seed, i); `threads` workers (0 = hardware concurrency) share the suite and
// the records come back in suite order. Throws CheckpointMissing.
SuiteResult run_suite(const MethodSpec& method, std::span<const Scenario> suite,
                      std::uint64_t seed, unsigned threads = 1);

// Same with an already-loaded network (ignored by mcts+random).
SuiteResult run_suite(const MethodSpec& method, const PolicyParams* params,
                      std::span<const Scenario> suite, std::uint64_t seed, unsigned threads = 1);

// Plays one scenario with a method; the trace can be written with write_trace.
EpisodeResult run_method(const MethodSpec& method, const PolicyParams* params,
                         const Scenario& scenario, Rng& rng);

struct SuiteConfig {
  std::vector<int> object_counts{3, 5, 8, 10};
  int per_size = 100;
  int grid = kDefaultGrid;
  std::uint64_t seed = 0;
};

// Scenario i of object count n is random_scenario(n, grid, mix_seed(mix_seed(seed, n), i)).
std::vector<Scenario> make_suite(int objects, const SuiteConfig& config);

struct SizeResult {
  int objects = 0;
  std::vector<SuiteResult> methods;  // in comparison order
};

struct Comparison {
  std::vector<std::string> methods;
  std::vector<SizeResult> sizes;
};

// Paired comparison: every method sees the same scenarios and seeds.
// Throws ConfigError for fewer than two methods.
Comparison compare_methods(std::span<const MethodSpec> methods, const SuiteConfig& suite,
                           std::uint64_t seed, unsigned threads = 1);

struct LengthStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double sem = 0.0;     // stddev / sqrt(n)
};
LengthStats length_stats(const SuiteResult& result);

// objects,metric,<method>... with Rewards/Steps/SR(%) per size, then the
// averages over sizes.
void write_table_csv(std::ostream& out, const Comparison& cmp);
void write_table_text(std::ostream& out, const Comparison& cmp);
// objects,method,mean,stddev,sem,n
void write_lengths_csv(std::ostream& out, const Comparison& cmp);
// Per-scenario records without wall time.
void write_records_csv(std::ostream& out, std::span<const SuiteResult> results);
// method,objects,index,wall_ms
void write_timing_csv(std::ostream& out, std::span<const SuiteResult> results);

// Reference baseline figures for side-by-side display.
struct ReferenceRow {
  std::string_view method;
  int objects = 0;  // 0 for the average row
  double rewards = 0.0;
  double steps = 0.0;
  double success_rate = 0.0;
};
std::span<const ReferenceRow> reference_results();
void write_reference_csv(std::ostream& out);

}  // namespace npmo
