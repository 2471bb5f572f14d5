#include "npmo/policy_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "npmo/errors.hpp"
#include "npmo/gridworld.hpp"

namespace npmo {

NetInput make_input(const WorldState& state, int capacity) {
  NetInput in;
  in.obs_index = encode_observation(state, capacity).active();
  in.aux.assign(static_cast<std::size_t>(capacity) * (1 + kPrimitiveCount), 0.0);
  const Scenario& s = state.scenario();
  for (int i = 0; i < s.object_count(); ++i)
    if (s.objects[i].movable && state.at_target(i)) in.aux[i] = 1.0;
  if (const auto& prev = state.prev_action()) in.aux[capacity + prev->index()] = 1.0;
  return in;
}

std::string trunk_name(Trunk trunk) { return trunk == Trunk::dense ? "dense" : "conv"; }

Trunk trunk_from_name(const std::string& name) {
  if (name == "dense") return Trunk::dense;
  if (name == "conv") return Trunk::conv;
  throw ConfigError("unknown trunk '" + name + "' (expected dense or conv)");
}

PolicyParams::PolicyParams(const NetConfig& c) : config_(c) {
  if (c.grid < 1 || c.capacity < 1 || c.hidden1 < 1 || c.hidden2 < 1 ||
      (c.trunk == Trunk::conv && (c.conv1 < 1 || c.conv2 < 1)))
    throw ConfigError("network sizes must be positive");
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    slices_.push_back(Slice{std::move(name), std::move(shape), offset, n});
    offset += n;
  };
  if (c.trunk == Trunk::conv) {
    add("conv1.kernel", {c.conv1, c.channels(), 3, 3});
    add("conv1.bias", {c.conv1});
    add("conv2.kernel", {c.conv2, c.conv1, 3, 3});
    add("conv2.bias", {c.conv2});
  }
  add("fc1.weight", {c.trunk_dim(), c.hidden1});
  add("fc1.bias", {c.hidden1});
  add("fc2.weight", {c.hidden1 + c.aux_dim(), c.hidden2});
  add("fc2.bias", {c.hidden2});
  add("policy.weight", {c.hidden2, c.action_dim()});
  add("policy.bias", {c.action_dim()});
  add("value.weight", {c.hidden2});
  add("value.bias", {1});
  values_.assign(offset, 0.0);
}

const PolicyParams::Slice& PolicyParams::slice(const std::string& name) const {
  for (const auto& s : slices_)
    if (s.name == name) return s;
  throw ConfigError("no parameter slice named " + name);
}

PolicyParams init_params(std::uint64_t seed, const NetConfig& config) {
  PolicyParams p(config);
  Rng rng(mix_seed(seed, 0x1217));
  for (const auto& s : p.slices()) {
    if (s.name.ends_with(".bias")) continue;
    double fan_in = 0;
    double fan_out = 0;
    if (s.shape.size() == 4) {
      fan_in = static_cast<double>(s.shape[1]) * 9;
      fan_out = static_cast<double>(s.shape[0]) * 9;
    } else if (s.shape.size() == 2) {
      fan_in = s.shape[0];
      fan_out = s.shape[1];
    } else {
      fan_in = s.shape[0];
      fan_out = 1;
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = p.data(s);
    for (std::size_t k = 0; k < s.size; ++k) w[k] = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

// Raw pointers into the flat vector, in declaration order.
template <typename T>
struct Layers {
  T* k1 = nullptr;
  T* kb1 = nullptr;
  T* k2 = nullptr;
  T* kb2 = nullptr;
  T* w1;
  T* b1;
  T* w2;
  T* b2;
  T* wp;
  T* bp;
  T* wv;
  T* bv;
};

template <typename T>
Layers<T> layers(const NetConfig& c, T* base) {
  Layers<T> l{};
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    T* p = base + off;
    off += n;
    return p;
  };
  const auto ch = static_cast<std::size_t>(c.channels());
  if (c.trunk == Trunk::conv) {
    l.k1 = take(static_cast<std::size_t>(c.conv1) * ch * 9);
    l.kb1 = take(c.conv1);
    l.k2 = take(static_cast<std::size_t>(c.conv2) * c.conv1 * 9);
    l.kb2 = take(c.conv2);
  }
  l.w1 = take(static_cast<std::size_t>(c.trunk_dim()) * c.hidden1);
  l.b1 = take(c.hidden1);
  l.w2 = take(static_cast<std::size_t>(c.hidden1 + c.aux_dim()) * c.hidden2);
  l.b2 = take(c.hidden2);
  l.wp = take(static_cast<std::size_t>(c.hidden2) * c.action_dim());
  l.bp = take(c.action_dim());
  l.wv = take(c.hidden2);
  l.bv = take(1);
  return l;
}

inline void axpy(double a, const double* x, double* y, int n) {
  for (int k = 0; k < n; ++k) y[k] += a * x[k];
}

inline double dot(const double* x, const double* y, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += x[k] * y[k];
  return s;
}

void check_input(const NetConfig& c, const NetInput& in) {
  if (static_cast<int>(in.aux.size()) != c.aux_dim())
    throw ShapeMismatch("auxiliary input has " + std::to_string(in.aux.size()) +
                        " entries, expected " + std::to_string(c.aux_dim()));
  if (!in.obs_value.empty() && in.obs_value.size() != in.obs_index.size())
    throw ShapeMismatch("observation values and indices differ in length");
  const int dim = c.obs_dim();
  for (std::int32_t idx : in.obs_index)
    if (idx < 0 || idx >= dim)
      throw ShapeMismatch("observation index " + std::to_string(idx) + " outside volume of " +
                          std::to_string(dim));
}

}  // namespace

void forward(const PolicyParams& params, const NetInput& in, ForwardCache& cache) {
  const NetConfig& c = params.config();
  check_input(c, in);
  const auto L = layers(c, params.flat().data());
  const int m = c.grid;
  const int cells = m * m;
  const int h1n = c.hidden1;
  const int h2n = c.hidden2;
  const int an = c.action_dim();

  cache.h1.assign(L.b1, L.b1 + h1n);
  if (c.trunk == Trunk::dense) {
    for (std::size_t k = 0; k < in.obs_index.size(); ++k)
      axpy(in.obs_at(k), L.w1 + static_cast<std::size_t>(in.obs_index[k]) * h1n, cache.h1.data(),
           h1n);
  } else {
    const int f1 = c.conv1;
    const int f2 = c.conv2;
    const int ch = c.channels();
    cache.a1.assign(static_cast<std::size_t>(f1) * cells, 0.0);
    for (int f = 0; f < f1; ++f)
      std::fill_n(cache.a1.begin() + static_cast<std::ptrdiff_t>(f) * cells, cells, L.kb1[f]);
    // Scatter each active input into the 3x3 neighbourhood of outputs it feeds.
    for (std::size_t k = 0; k < in.obs_index.size(); ++k) {
      const int idx = in.obs_index[k];
      const int cin = idx / cells;
      const int y = (idx % cells) / m;
      const int x = idx % m;
      const double v = in.obs_at(k);
      for (int ky = 0; ky < 3; ++ky) {
        const int oy = y - (ky - 1);
        if (oy < 0 || oy >= m) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ox = x - (kx - 1);
          if (ox < 0 || ox >= m) continue;
          for (int f = 0; f < f1; ++f)
            cache.a1[static_cast<std::size_t>(f) * cells + oy * m + ox] +=
                v * L.k1[((static_cast<std::size_t>(f) * ch + cin) * 3 + ky) * 3 + kx];
        }
      }
    }
    for (double& v : cache.a1) v = std::max(v, 0.0);

    cache.a2.assign(static_cast<std::size_t>(f2) * cells, 0.0);
    for (int g = 0; g < f2; ++g) {
      double* out = cache.a2.data() + static_cast<std::size_t>(g) * cells;
      for (int y = 0; y < m; ++y)
        for (int x = 0; x < m; ++x) {
          double s = L.kb2[g];
          for (int f = 0; f < f1; ++f) {
            const double* src = cache.a1.data() + static_cast<std::size_t>(f) * cells;
            const double* ker = L.k2 + (static_cast<std::size_t>(g) * f1 + f) * 9;
            for (int ky = 0; ky < 3; ++ky) {
              const int yy = y + ky - 1;
              if (yy < 0 || yy >= m) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int xx = x + kx - 1;
                if (xx < 0 || xx >= m) continue;
                s += ker[ky * 3 + kx] * src[yy * m + xx];
              }
            }
          }
          out[y * m + x] = std::max(s, 0.0);
        }
    }
    for (std::size_t j = 0; j < cache.a2.size(); ++j)
      if (cache.a2[j] != 0.0) axpy(cache.a2[j], L.w1 + j * h1n, cache.h1.data(), h1n);
  }
  for (double& v : cache.h1) v = std::max(v, 0.0);

  cache.h2.assign(L.b2, L.b2 + h2n);
  for (int j = 0; j < h1n; ++j)
    if (cache.h1[j] != 0.0)
      axpy(cache.h1[j], L.w2 + static_cast<std::size_t>(j) * h2n, cache.h2.data(), h2n);
  for (int j = 0; j < c.aux_dim(); ++j)
    if (in.aux[j] != 0.0)
      axpy(in.aux[j], L.w2 + static_cast<std::size_t>(h1n + j) * h2n, cache.h2.data(), h2n);
  for (double& v : cache.h2) v = std::max(v, 0.0);

  cache.out.logits.assign(L.bp, L.bp + an);
  for (int j = 0; j < h2n; ++j)
    if (cache.h2[j] != 0.0)
      axpy(cache.h2[j], L.wp + static_cast<std::size_t>(j) * an, cache.out.logits.data(), an);
  cache.out.value = L.bv[0] + dot(L.wv, cache.h2.data(), h2n);
}

NetOutput forward(const PolicyParams& params, const NetInput& input) {
  ForwardCache cache;
  forward(params, input, cache);
  return std::move(cache.out);
}

void backward(const PolicyParams& params, const NetInput& in, const ForwardCache& cache,
              std::span<const double> dlogits, double dvalue, std::span<double> grad) {
  const NetConfig& c = params.config();
  if (grad.size() != params.size()) throw ShapeMismatch("gradient size differs from parameters");
  if (static_cast<int>(dlogits.size()) != c.action_dim())
    throw ShapeMismatch("logit gradient size differs from action space");
  const auto L = layers(c, params.flat().data());
  const auto G = layers(c, grad.data());
  const int m = c.grid;
  const int cells = m * m;
  const int h1n = c.hidden1;
  const int h2n = c.hidden2;
  const int an = c.action_dim();

  // Heads.
  std::vector<double> dh2(h2n, 0.0);
  for (int a = 0; a < an; ++a) G.bp[a] += dlogits[a];
  G.bv[0] += dvalue;
  for (int j = 0; j < h2n; ++j) {
    if (cache.h2[j] == 0.0) continue;  // ReLU inactive: no gradient flows either way
    const double* wrow = L.wp + static_cast<std::size_t>(j) * an;
    double* grow = G.wp + static_cast<std::size_t>(j) * an;
    axpy(cache.h2[j], dlogits.data(), grow, an);
    G.wv[j] += cache.h2[j] * dvalue;
    dh2[j] = dot(wrow, dlogits.data(), an) + L.wv[j] * dvalue;
  }

  // fc2 over [h1, aux].
  std::vector<double> dh1(h1n, 0.0);
  axpy(1.0, dh2.data(), G.b2, h2n);
  for (int j = 0; j < h1n; ++j) {
    if (cache.h1[j] == 0.0) continue;
    axpy(cache.h1[j], dh2.data(), G.w2 + static_cast<std::size_t>(j) * h2n, h2n);
    dh1[j] = dot(L.w2 + static_cast<std::size_t>(j) * h2n, dh2.data(), h2n);
  }
  for (int j = 0; j < c.aux_dim(); ++j)
    if (in.aux[j] != 0.0)
      axpy(in.aux[j], dh2.data(), G.w2 + static_cast<std::size_t>(h1n + j) * h2n, h2n);

  // fc1.
  axpy(1.0, dh1.data(), G.b1, h1n);
  if (c.trunk == Trunk::dense) {
    for (std::size_t k = 0; k < in.obs_index.size(); ++k)
      axpy(in.obs_at(k), dh1.data(), G.w1 + static_cast<std::size_t>(in.obs_index[k]) * h1n, h1n);
    return;
  }

  const int f1 = c.conv1;
  const int f2 = c.conv2;
  const int ch = c.channels();
  std::vector<double> da2(cache.a2.size(), 0.0);
  for (std::size_t j = 0; j < cache.a2.size(); ++j) {
    if (cache.a2[j] == 0.0) continue;
    axpy(cache.a2[j], dh1.data(), G.w1 + j * h1n, h1n);
    da2[j] = dot(L.w1 + j * h1n, dh1.data(), h1n);
  }

  std::vector<double> da1(cache.a1.size(), 0.0);
  for (int g = 0; g < f2; ++g) {
    const double* dout = da2.data() + static_cast<std::size_t>(g) * cells;
    for (int y = 0; y < m; ++y)
      for (int x = 0; x < m; ++x) {
        const double d = dout[y * m + x];
        if (d == 0.0) continue;
        G.kb2[g] += d;
        for (int f = 0; f < f1; ++f) {
          const double* src = cache.a1.data() + static_cast<std::size_t>(f) * cells;
          double* dsrc = da1.data() + static_cast<std::size_t>(f) * cells;
          const double* ker = L.k2 + (static_cast<std::size_t>(g) * f1 + f) * 9;
          double* gker = G.k2 + (static_cast<std::size_t>(g) * f1 + f) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= m) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= m) continue;
              gker[ky * 3 + kx] += d * src[yy * m + xx];
              dsrc[yy * m + xx] += d * ker[ky * 3 + kx];
            }
          }
        }
      }
  }
  for (std::size_t j = 0; j < da1.size(); ++j)
    if (cache.a1[j] == 0.0) da1[j] = 0.0;
  for (int f = 0; f < f1; ++f)
    for (int p = 0; p < cells; ++p) G.kb1[f] += da1[static_cast<std::size_t>(f) * cells + p];
  for (std::size_t k = 0; k < in.obs_index.size(); ++k) {
    const int idx = in.obs_index[k];
    const int cin = idx / cells;
    const int y = (idx % cells) / m;
    const int x = idx % m;
    const double v = in.obs_at(k);
    for (int ky = 0; ky < 3; ++ky) {
      const int oy = y - (ky - 1);
      if (oy < 0 || oy >= m) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const int ox = x - (kx - 1);
        if (ox < 0 || ox >= m) continue;
        for (int f = 0; f < f1; ++f)
          G.k1[((static_cast<std::size_t>(f) * ch + cin) * 3 + ky) * 3 + kx] +=
              v * da1[static_cast<std::size_t>(f) * cells + oy * m + ox];
      }
    }
  }
}

double loss_gradients(const PolicyParams& params, std::span<const NetInput* const> batch,
                      const SampleLoss& loss, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  const int an = params.config().action_dim();
  ForwardCache cache;
  std::vector<double> dlogits(an);
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward(params, *batch[i], cache);
    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    double dvalue = 0.0;
    total += loss(i, cache.out.logits, cache.out.value, dlogits, dvalue);
    for (double& d : dlogits) d *= scale;
    backward(params, *batch[i], cache, dlogits, dvalue * scale, grad);
  }
  return total * scale;
}

ActionDistribution::ActionDistribution(std::span<const double> logits,
                                       std::span<const std::uint8_t> legal, double temperature)
    : probs_(logits.size(), 0.0),
      log_probs_(logits.size(), -std::numeric_limits<double>::infinity()),
      legal_(legal.begin(), legal.end()),
      temperature_(temperature) {
  if (logits.size() != legal.size()) throw ShapeMismatch("logits and legality mask differ in size");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < logits.size(); ++a)
    if (legal[a]) {
      top = std::max(top, logits[a] / temperature);
      ++legal_count_;
    }
  if (legal_count_ == 0) throw NoLegalAction("no legal action in distribution");
  double z = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a)
    if (legal[a]) z += std::exp(logits[a] / temperature - top);
  const double log_z = top + std::log(z);
  for (std::size_t a = 0; a < logits.size(); ++a) {
    if (!legal[a]) continue;
    log_probs_[a] = logits[a] / temperature - log_z;
    probs_[a] = std::exp(log_probs_[a]);
    if (probs_[a] > 0.0) entropy_ -= probs_[a] * log_probs_[a];
  }
}

int ActionDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (std::size_t a = 0; a < probs_.size(); ++a) {
    if (!legal_[a]) continue;
    acc += probs_[a];
    last = static_cast<int>(a);
    if (u < acc) return last;
  }
  return last;
}

int ActionDistribution::argmax() const {
  int best = -1;
  for (std::size_t a = 0; a < probs_.size(); ++a)
    if (legal_[a] && (best < 0 || probs_[a] > probs_[best])) best = static_cast<int>(a);
  return best;
}

Adam::Adam(std::size_t size, const AdamConfig& config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ShapeMismatch("optimizer state size differs from parameters");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grad[k];
    m_[k] = b1 * m_[k] + (1.0 - b1) * g;
    v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
    params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps);
  }
}

namespace {

constexpr char kMagic[8] = {'N', 'P', 'M', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("header", "truncated checkpoint");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
  const NetConfig& c = params.config();
  nlohmann::ordered_json header;
  header["grid"] = c.grid;
  header["capacity"] = c.capacity;
  header["trunk"] = trunk_name(c.trunk);
  header["hidden1"] = c.hidden1;
  header["hidden2"] = c.hidden2;
  header["conv1"] = c.conv1;
  header["conv2"] = c.conv2;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& s : params.slices()) layers.push_back({{"name", s.name}, {"shape", s.shape}});
  header["layers"] = std::move(layers);
  header["count"] = params.size();
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<unsigned char> buf(params.size() * 8);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto bits = std::bit_cast<std::uint64_t>(params.flat()[k]);
    for (int b = 0; b < 8; ++b) buf[k * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointMissing("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError("magic", "not a checkpoint file");
  if (get_u32(in) != kCheckpointVersion) throw ParseError("version", "unsupported version");
  const std::uint32_t len = get_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw ParseError("header", "truncated checkpoint");
  nlohmann::json header;
  NetConfig c;
  try {
    header = nlohmann::json::parse(text);
    c.grid = header.at("grid").get<int>();
    c.capacity = header.at("capacity").get<int>();
    c.trunk = trunk_from_name(header.at("trunk").get<std::string>());
    c.hidden1 = header.at("hidden1").get<int>();
    c.hidden2 = header.at("hidden2").get<int>();
    c.conv1 = header.at("conv1").get<int>();
    c.conv2 = header.at("conv2").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("header", e.what());
  }
  PolicyParams p(c);
  if (header.value("count", std::size_t{0}) != p.size())
    throw ParseError("count", "parameter count does not match the layer shapes");
  std::vector<unsigned char> buf(p.size() * 8);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw ParseError("params", "truncated parameter block");
  for (std::size_t k = 0; k < p.size(); ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[k * 8 + b]) << (8 * b);
    p.flat()[k] = std::bit_cast<double>(bits);
  }
  return p;
}

}  // namespace npmo
