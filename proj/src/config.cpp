#include "npmo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "npmo/errors.hpp"

namespace npmo {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    node_ = &root.at(name_);
    if (!node_->is_object()) throw ParseError(name_, "expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParseError(name_ + "." + key, e.what());
    }
  }

  template <typename T>
  void read_positive(const char* key, T& out) {
    read(key, out);
    if (!(out > 0)) throw ParseError(name_ + "." + key, "must be positive");
  }

  // Rejects keys that were never read.
  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items())
      if (!seen_.count(key)) throw ParseError(name_ + "." + key, "unknown key");
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

void read_sampler(Section& s, ScenarioSampler& sampler) {
  s.read("object_counts", sampler.object_counts);
  s.read("n_immovable", sampler.n_immovable);
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.bc.epochs = 10;
  c.bc.learning_rate = 1e-3;
  c.ppo.iterations = 100;
  c.ppo.env.object_counts = {3, 5, 8, 10};
  c.ppo.eval_episodes = 40;
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("", e.what());
  }
  if (!root.is_object()) throw ParseError("", "expected a JSON object");
  static const std::set<std::string> kSections{"net", "expert", "bc", "ppo", "search", "suite"};
  for (const auto& [key, value] : root.items())
    if (!kSections.count(key)) throw ParseError(key, "unknown section");

  RunConfig c = default_run_config();

  Section net(root, "net");
  net.read_positive("grid", c.net.grid);
  net.read_positive("capacity", c.net.capacity);
  std::string trunk(trunk_name(c.net.trunk));
  net.read("trunk", trunk);
  try {
    c.net.trunk = trunk_from_name(trunk);
  } catch (const Error& e) {
    throw ParseError("net.trunk", e.what());
  }
  net.read_positive("hidden1", c.net.hidden1);
  net.read_positive("hidden2", c.net.hidden2);
  net.read_positive("conv1", c.net.conv1);
  net.read_positive("conv2", c.net.conv2);
  net.finish();

  Section expert(root, "expert");
  expert.read_positive("episodes", c.expert_episodes);
  read_sampler(expert, c.expert_sampler);
  expert.finish();

  Section bc(root, "bc");
  bc.read("epochs", c.bc.epochs);
  bc.read_positive("batch_size", c.bc.batch_size);
  bc.read_positive("learning_rate", c.bc.learning_rate);
  bc.read("holdout_fraction", c.bc.holdout_fraction);
  bc.finish();
  if (c.bc.epochs < 0) throw ParseError("bc.epochs", "must be non-negative");
  if (c.bc.holdout_fraction < 0.0 || c.bc.holdout_fraction >= 1.0)
    throw ParseError("bc.holdout_fraction", "must lie in [0, 1)");

  Section ppo(root, "ppo");
  ppo.read("clip", c.ppo.clip);
  ppo.read("value_coef", c.ppo.value_coef);
  ppo.read("entropy_coef", c.ppo.entropy_coef);
  ppo.read("gamma", c.ppo.gamma);
  ppo.read("lambda", c.ppo.lambda);
  ppo.read("learning_rate", c.ppo.learning_rate);
  ppo.read("iterations", c.ppo.iterations);
  ppo.read("n_envs", c.ppo.n_envs);
  ppo.read("horizon", c.ppo.horizon);
  ppo.read("epochs", c.ppo.epochs);
  ppo.read("minibatch", c.ppo.minibatch);
  ppo.read("max_grad_norm", c.ppo.max_grad_norm);
  ppo.read("reward_scale", c.ppo.reward_scale);
  ppo.read("eval_every", c.ppo.eval_every);
  ppo.read("eval_episodes", c.ppo.eval_episodes);
  ppo.read("eval_seed", c.ppo.eval_seed);
  read_sampler(ppo, c.ppo.env);
  ppo.finish();

  Section search(root, "search");
  search.read_positive("iterations", c.search.iterations);
  search.read("exploration", c.search.exploration);
  search.read("gamma", c.search.gamma);
  search.read("sim_cap", c.search.sim_cap);
  std::string mode = c.search.mode == SelectionMode::paper_literal ? "paper_literal" : "value_augmented";
  search.read("mode", mode);
  if (mode == "paper_literal")
    c.search.mode = SelectionMode::paper_literal;
  else if (mode == "value_augmented")
    c.search.mode = SelectionMode::value_augmented;
  else
    throw ParseError("search.mode", "expected value_augmented or paper_literal");
  search.finish();

  Section suite(root, "suite");
  suite.read("object_counts", c.suite.object_counts);
  suite.read_positive("per_size", c.suite.per_size);
  suite.read_positive("grid", c.suite.grid);
  suite.finish();

  c.ppo.env.grid = c.net.grid;
  c.ppo.env.capacity = c.net.capacity;
  c.expert_sampler.grid = c.net.grid;
  c.expert_sampler.capacity = c.net.capacity;
  try {
    validate(c.ppo);
  } catch (const ConfigError& e) {
    throw ParseError("ppo", e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

}  // namespace npmo
