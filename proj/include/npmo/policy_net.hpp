#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "npmo/rng.hpp"
#include "npmo/scenario.hpp"
#include "npmo/world.hpp"

namespace npmo {

enum class Trunk { dense, conv };

// Shape of the policy-value network. The trunk is either a flattened dense
// layer or two 3x3 same-padded convolutions followed by that dense layer. The
// auxiliary input (finished flags, previous action) joins at the second
// hidden layer; the policy head emits capacity * 5 logits and the value head
// one scalar.
struct NetConfig {
  int grid = kDefaultGrid;
  int capacity = kMaxObjects;
  Trunk trunk = Trunk::dense;
  int hidden1 = 128;
  int hidden2 = 128;
  int conv1 = 8;
  int conv2 = 8;

  int channels() const { return 2 * capacity + 1; }
  int obs_dim() const { return grid * grid * channels(); }
  int aux_dim() const { return capacity + capacity * kPrimitiveCount; }
  int action_dim() const { return capacity * kPrimitiveCount; }
  int trunk_dim() const { return trunk == Trunk::dense ? obs_dim() : conv2 * grid * grid; }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Network input with a sparse observation. obs_value empty means every listed
// index has value 1 (binary encodings).
struct NetInput {
  std::vector<std::int32_t> obs_index;
  std::vector<double> obs_value;
  std::vector<double> aux;

  double obs_at(std::size_t k) const { return obs_value.empty() ? 1.0 : obs_value[k]; }
};

// Encodes the observation volume and the auxiliary vector of `state`.
NetInput make_input(const WorldState& state, int capacity);

// All weights as one flat vector, with named slices per layer.
class PolicyParams {
 public:
  struct Slice {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  explicit PolicyParams(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  const std::vector<Slice>& slices() const { return slices_; }
  const Slice& slice(const std::string& name) const;

  double* data(const Slice& s) { return values_.data() + s.offset; }
  const double* data(const Slice& s) const { return values_.data() + s.offset; }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    return a.config_ == b.config_ && a.values_ == b.values_;
  }

 private:
  NetConfig config_;
  std::vector<Slice> slices_;
  std::vector<double> values_;
};

// Glorot-uniform weights, zero biases; deterministic in (seed, config).
PolicyParams init_params(std::uint64_t seed, const NetConfig& config);

struct NetOutput {
  std::vector<double> logits;
  double value = 0.0;
};

// Activations retained for the backward pass.
struct ForwardCache {
  std::vector<double> a1;  // conv1 output after ReLU (conv trunk only)
  std::vector<double> a2;  // conv2 output after ReLU (conv trunk only)
  std::vector<double> h1;
  std::vector<double> h2;
  NetOutput out;
};

// Throws ShapeMismatch when the input does not match the configuration.
NetOutput forward(const PolicyParams& params, const NetInput& input);
void forward(const PolicyParams& params, const NetInput& input, ForwardCache& cache);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(logits) and
// d(loss)/d(value) for one sample whose activations are in `cache`.
void backward(const PolicyParams& params, const NetInput& input, const ForwardCache& cache,
              std::span<const double> dlogits, double dvalue, std::span<double> grad);

// Per-sample loss over the forward outputs. Writes its gradient w.r.t. the
// logits and the value and returns the loss.
using SampleLoss = std::function<double(std::size_t sample, std::span<const double> logits,
                                        double value, std::span<double> dlogits, double& dvalue)>;

// Mean loss over the batch; grad is overwritten with the mean gradient.
double loss_gradients(const PolicyParams& params, std::span<const NetInput* const> batch,
                      const SampleLoss& loss, std::span<double> grad);

// Softmax restricted to the legal entries of a flat action space.
class ActionDistribution {
 public:
  // Throws NoLegalAction when no entry is legal, ShapeMismatch on size mismatch.
  ActionDistribution(std::span<const double> logits, std::span<const std::uint8_t> legal,
                     double temperature = 1.0);

  std::span<const double> probs() const { return probs_; }
  double prob(int action) const { return probs_[action]; }
  // -inf for illegal actions.
  double log_prob(int action) const { return log_probs_[action]; }
  double entropy() const { return entropy_; }
  int legal_count() const { return legal_count_; }
  bool legal(int action) const { return legal_[action] != 0; }
  double temperature() const { return temperature_; }

  int sample(Rng& rng) const;
  // Most probable legal action, lowest index on ties.
  int argmax() const;

 private:
  std::vector<double> probs_;
  std::vector<double> log_probs_;
  std::vector<std::uint8_t> legal_;
  double entropy_ = 0.0;
  double temperature_ = 1.0;
  int legal_count_ = 0;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t size, const AdamConfig& config);

  void step(std::span<double> params, std::span<const double> grad);
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const AdamConfig& config() const { return config_; }
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

// Versioned binary checkpoint: magic, header JSON (config and layer shapes),
// then the flat parameter vector as little-endian IEEE doubles.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
// Throws CheckpointMissing if the file does not exist, ParseError if corrupt.
PolicyParams load_checkpoint(const std::filesystem::path& path);

std::string trunk_name(Trunk trunk);
Trunk trunk_from_name(const std::string& name);

}  // namespace npmo
