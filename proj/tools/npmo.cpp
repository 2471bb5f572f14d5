// Command-line front end: scenario generation, training, planning and
// benchmarking.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "npmo/bench.hpp"
#include "npmo/config.hpp"
#include "npmo/errors.hpp"
#include "npmo/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace npmo;

namespace {

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::vector<int> objects;
  std::optional<int> grid;
  std::optional<int> iters;
  std::string checkpoint;
  std::string out = ".";
  unsigned threads = 1;
  bool timing = false;  // wall-clock times vary between runs
  bool long_run = false;
};

RunConfig load(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? default_run_config() : load_run_config(o.config);
  if (o.grid) {
    c.net.grid = c.suite.grid = c.ppo.env.grid = c.expert_sampler.grid = *o.grid;
  }
  if (!o.objects.empty()) c.suite.object_counts = o.objects;
  if (o.long_run)
    for (int n : {15, 20})
      if (std::find(c.suite.object_counts.begin(), c.suite.object_counts.end(), n) == c.suite.object_counts.end())
        c.suite.object_counts.push_back(n);
  return c;
}

std::ofstream open_out(const CommonOptions& o, const std::string& name) {
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  std::cerr << "wrote " << path.string() << '\n';
  return out;
}

void write_checkpoint(const CommonOptions& o, const std::string& name, const PolicyParams& p) {
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / name;
  save_checkpoint(path, p);
  std::cerr << "wrote " << path.string() << '\n';
}

// name=kind[:checkpoint]
MethodSpec parse_method(const std::string& text, const SearchConfig& search) {
  MethodSpec m;
  m.search = search;
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("method must look like name=kind[:checkpoint]: " + text);
  m.name = text.substr(0, eq);
  std::string rest = text.substr(eq + 1);
  const auto colon = rest.find(':');
  if (colon != std::string::npos) {
    m.checkpoint = rest.substr(colon + 1);
    rest = rest.substr(0, colon);
  }
  m.kind = planner_from_string(rest);
  return m;
}

void add_common(CLI::App* app, CommonOptions& o, bool objects = true) {
  app->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Random seed");
  if (objects) {
    app->add_option("--objects", o.objects, "Object counts, e.g. 3,5,8,10")->delimiter(',');
    app->add_flag("--long-run", o.long_run, "Add the 15- and 20-object suites");
  }
  app->add_option("--grid", o.grid, "Grid side length");
  app->add_option("--out", o.out, "Output directory");
}

void gen_scenarios(const CommonOptions& o, int count) {
  RunConfig c = load(o);
  c.suite.seed = o.seed;
  if (count > 0) c.suite.per_size = count;
  for (int n : c.suite.object_counts) {
    fs::create_directories(o.out);
    const fs::path path = fs::path(o.out) / ("scenarios_" + std::to_string(n) + ".json");
    write_scenarios(path, make_suite(n, c.suite));
    std::cerr << "wrote " << path.string() << '\n';
  }
}

void train_bc(const CommonOptions& o) {
  RunConfig c = load(o);
  if (o.iters) c.bc.epochs = *o.iters;
  c.bc.seed = o.seed;
  const ExpertDataset ds = collect_expert_dataset(c.expert_episodes, c.expert_sampler, o.seed);
  std::cerr << "expert dataset: " << ds.episodes() << " episodes, " << ds.records.size() << " records\n";
  fs::create_directories(o.out);
  write_dataset(fs::path(o.out) / "expert.jsonl", fs::path(o.out) / "expert_scenarios.json", ds);
  PolicyParams params = o.checkpoint.empty() ? init_params(o.seed, c.net) : load_checkpoint(o.checkpoint);
  const std::vector<BcEpoch> curve = bc_train(params, ds, c.bc);
  std::ofstream out = open_out(o, "bc_curve.csv");
  out << "epoch,train_loss,train_accuracy,heldout_loss,heldout_accuracy\n";
  char buf[160];
  for (const BcEpoch& e : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss, e.train_accuracy,
                  e.heldout_loss, e.heldout_accuracy);
    out << buf;
  }
  write_checkpoint(o, "bc.ckpt", params);
}

void train_ppo(const CommonOptions& o) {
  RunConfig c = load(o);
  if (o.iters) c.ppo.iterations = *o.iters;
  c.ppo.seed = o.seed;
  const PolicyParams initial =
      o.checkpoint.empty() ? init_params(o.seed, c.net) : load_checkpoint(o.checkpoint);
  const TrainResult r = train(initial, c.ppo, [](const CurveRow& row) {
    if (row.eval_success)
      std::cerr << "iteration " << row.iteration << ": eval success " << *row.eval_success << '\n';
  });
  std::ofstream out = open_out(o, "ppo_curve.csv");
  write_curve_csv(out, r.curve);
  write_checkpoint(o, "ppo_best.ckpt", r.best);
  write_checkpoint(o, "ppo_last.ckpt", r.last);
}

void plan(const CommonOptions& o, const std::string& scenario_file, int index, const std::string& method_text,
          bool dump) {
  RunConfig c = load(o);
  if (o.iters) c.search.iterations = *o.iters;
  Scenario scenario;
  if (!scenario_file.empty()) {
    const std::vector<Scenario> all = read_scenarios(scenario_file);
    if (index < 0 || index >= static_cast<int>(all.size())) throw ConfigError("scenario index out of range");
    scenario = all[index];
  } else {
    const int n = c.suite.object_counts.empty() ? 5 : c.suite.object_counts.front();
    scenario = random_scenario(n, c.suite.grid, o.seed);
  }
  MethodSpec m = parse_method(method_text, c.search);
  if (!o.checkpoint.empty()) m.checkpoint = o.checkpoint;
  validate(m);
  std::optional<PolicyParams> params;
  if (m.uses_network()) params = load_checkpoint(m.checkpoint);
  Rng rng(mix_seed(o.seed, 0));
  EpisodeResult ep;
  if (m.kind == PlannerKind::mcts_random || m.kind == PlannerKind::mcts_policy) {
    const UniformGuidance uniform(m.capacity);
    std::optional<NetworkGuidance> net;
    if (params) net.emplace(*params);
    const Guidance& g = net ? static_cast<const Guidance&>(*net) : uniform;
    ep = plan_episode(scenario, g, m.search, rng, dump);
  } else {
    ep = run_method(m, params ? &*params : nullptr, scenario, rng);
  }
  {
    std::ofstream out = open_out(o, "trace.jsonl");
    write_trace(out, ep.trace);
  }
  {
    std::ofstream out = open_out(o, "plan_metrics.csv");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.2f,%d,%d,%d\n", ep.metrics.total_reward, ep.metrics.steps,
                  ep.metrics.success ? 1 : 0, ep.metrics.path_length);
    out << "reward,steps,success,path_length\n" << buf;
  }
  if (dump) {
    std::ofstream out = open_out(o, "search.json");
    write_search_dump(out, ep.decisions);
  }
}

void bench(const CommonOptions& o, const std::string& method_text) {
  RunConfig c = load(o);
  if (o.iters) c.search.iterations = *o.iters;
  MethodSpec m = parse_method(method_text, c.search);
  if (!o.checkpoint.empty()) m.checkpoint = o.checkpoint;
  c.suite.seed = o.seed;
  std::vector<SuiteResult> results;
  for (int n : c.suite.object_counts)
    results.push_back(run_suite(m, make_suite(n, c.suite), mix_seed(o.seed, n), o.threads));
  {
    std::ofstream out = open_out(o, "metrics.csv");
    out << "method,objects,mean_reward,mean_steps,success_rate\n";
    char buf[160];
    for (std::size_t k = 0; k < results.size(); ++k) {
      std::snprintf(buf, sizeof buf, ",%d,%.2f,%.2f,%.2f\n", c.suite.object_counts[k],
                    results[k].mean_reward, results[k].mean_steps, results[k].success_rate);
      out << m.name << buf;
    }
  }
  {
    std::ofstream out = open_out(o, "records.csv");
    write_records_csv(out, results);
  }
  if (!o.timing) return;
  std::ofstream out = open_out(o, "timing.csv");
  write_timing_csv(out, results);
}

void compare(const CommonOptions& o, const std::vector<std::string>& method_texts) {
  RunConfig c = load(o);
  if (o.iters) c.search.iterations = *o.iters;
  c.suite.seed = o.seed;
  std::vector<MethodSpec> methods;
  for (const std::string& t : method_texts) methods.push_back(parse_method(t, c.search));
  const Comparison cmp = compare_methods(methods, c.suite, o.seed, o.threads);
  std::vector<SuiteResult> all;
  for (const SizeResult& s : cmp.sizes) all.insert(all.end(), s.methods.begin(), s.methods.end());
  {
    std::ofstream out = open_out(o, "table.csv");
    write_table_csv(out, cmp);
  }
  {
    std::ofstream out = open_out(o, "table.txt");
    write_table_text(out, cmp);
  }
  write_table_text(std::cout, cmp);
  {
    std::ofstream out = open_out(o, "lengths.csv");
    write_lengths_csv(out, cmp);
  }
  {
    std::ofstream out = open_out(o, "records.csv");
    write_records_csv(out, all);
  }
  {
    std::ofstream out = open_out(o, "reference.csv");
    write_reference_csv(out);
  }
  if (!o.timing) return;
  std::ofstream out = open_out(o, "timing.csv");
  write_timing_csv(out, all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-object rearrangement planning: training, search and benchmarks"};
  app.require_subcommand(1);
  CommonOptions o;

  auto* gen = app.add_subcommand("gen-scenarios", "Write random scenario suites");
  add_common(gen, o);
  int count = 0;
  gen->add_option("--count", count, "Scenarios per object count");

  auto* bc = app.add_subcommand("train-bc", "Collect expert data and pretrain by behaviour cloning");
  add_common(bc, o, false);
  bc->add_option("--iters", o.iters, "Training epochs");
  bc->add_option("--checkpoint", o.checkpoint, "Initial parameters");

  auto* ppo = app.add_subcommand("train-ppo", "Fine-tune with PPO");
  add_common(ppo, o, false);
  ppo->add_option("--iters", o.iters, "PPO iterations");
  ppo->add_option("--checkpoint", o.checkpoint, "Initial parameters (e.g. a BC checkpoint)");

  auto* pl = app.add_subcommand("plan", "Plan one scenario and write its trace");
  add_common(pl, o);
  std::string scenario_file, method = "mcts=mcts+random";
  int index = 0;
  bool dump = false;
  pl->add_option("--scenario", scenario_file, "Scenario or suite file")->check(CLI::ExistingFile);
  pl->add_option("--index", index, "Scenario index within the suite file");
  pl->add_option("--method", method, "name=kind[:checkpoint]");
  pl->add_option("--iters", o.iters, "Search iterations per decision");
  pl->add_option("--checkpoint", o.checkpoint, "Network checkpoint");
  pl->add_flag("--dump-search", dump, "Write per-decision root statistics");

  auto* be = app.add_subcommand("bench", "Run one method over scenario suites");
  add_common(be, o);
  be->add_option("--method", method, "name=kind[:checkpoint]");
  be->add_option("--iters", o.iters, "Search iterations per decision");
  be->add_option("--checkpoint", o.checkpoint, "Network checkpoint");
  be->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  be->add_flag("--timing", o.timing, "Also write per-scenario wall times to timing.csv");

  auto* cmp = app.add_subcommand("compare", "Paired comparison of several methods");
  add_common(cmp, o);
  std::vector<std::string> methods;
  cmp->add_option("--method", methods, "name=kind[:checkpoint], repeatable")->required();
  cmp->add_option("--iters", o.iters, "Search iterations per decision");
  cmp->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  cmp->add_flag("--timing", o.timing, "Also write per-scenario wall times to timing.csv");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) gen_scenarios(o, count);
    if (bc->parsed()) train_bc(o);
    if (ppo->parsed()) train_ppo(o);
    if (pl->parsed()) plan(o, scenario_file, index, method, dump);
    if (be->parsed()) bench(o, method);
    if (cmp->parsed()) compare(o, methods);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
