#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "curio/rng.hpp"
#include "curio/tensor.hpp"

// Network containers for the program runtime: MLPs, small CNNs and 5-member
// ensembles, together with Adam state and flat binary weight snapshots.

namespace curio {

constexpr int kFeatureDim = 32;
constexpr int kEnsembleSize = 5;

struct MlpSpec {
  int in = 0;
  int hidden = 64;
  int out = 0;
};

struct CnnSpec {
  int channels = 0;
  int height = 0;
  int width = 0;
  int conv1 = 16;
  int conv2 = 32;
  int kernel = 3;
  int stride = 2;
  int out = 0;

  int h1() const { return (height - kernel) / stride + 1; }
  int w1() const { return (width - kernel) / stride + 1; }
  int h2() const { return (h1() - kernel) / stride + 1; }
  int w2() const { return (w1() - kernel) / stride + 1; }
  int flat() const { return conv2 * h2() * w2(); }
};

struct NetworkArch {
  enum class Kind { Mlp, Cnn } kind = Kind::Mlp;
  MlpSpec mlp;
  CnnSpec cnn;
  bool ensemble = false;

  std::string describe() const {
    char buf[96];
    if (kind == Kind::Mlp)
      std::snprintf(buf, sizeof(buf), "%smlp:%d-%d-%d-%d", ensemble ? "ens5-" : "",
                    mlp.in, mlp.hidden, mlp.hidden, mlp.out);
    else
      std::snprintf(buf, sizeof(buf), "%scnn:%dx%dx%d-%d-%d-%d", ensemble ? "ens5-" : "",
                    cnn.channels, cnn.height, cnn.width, cnn.conv1, cnn.conv2, cnn.out);
    return buf;
  }
};

// One network's parameters in declaration order. Ensembles hold the five
// members' parameter lists back to back.
struct NetworkWeights {
  NetworkArch arch;
  uint64_t seed = 0;
  std::vector<Tensor> params;

  int params_per_member() const {
    return ensemble_members() > 1 ? static_cast<int>(params.size()) / kEnsembleSize
                                  : static_cast<int>(params.size());
  }
  int ensemble_members() const { return arch.ensemble ? kEnsembleSize : 1; }
};

inline Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : t.v) x = rng.uniform(-bound, bound);
  return t;
}

inline std::vector<Tensor> init_member(const NetworkArch& arch, uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> p;
  if (arch.kind == NetworkArch::Kind::Mlp) {
    const auto& m = arch.mlp;
    p.push_back(uniform_init({m.hidden, m.in}, m.in, rng));
    p.push_back(uniform_init({m.hidden}, m.in, rng));
    p.push_back(uniform_init({m.hidden, m.hidden}, m.hidden, rng));
    p.push_back(uniform_init({m.hidden}, m.hidden, rng));
    p.push_back(uniform_init({m.out, m.hidden}, m.hidden, rng));
    p.push_back(uniform_init({m.out}, m.hidden, rng));
  } else {
    const auto& c = arch.cnn;
    const int fan1 = c.channels * c.kernel * c.kernel;
    const int fan2 = c.conv1 * c.kernel * c.kernel;
    p.push_back(uniform_init({c.conv1, c.channels, c.kernel, c.kernel}, fan1, rng));
    p.push_back(uniform_init({c.conv1}, fan1, rng));
    p.push_back(uniform_init({c.conv2, c.conv1, c.kernel, c.kernel}, fan2, rng));
    p.push_back(uniform_init({c.conv2}, fan2, rng));
    p.push_back(uniform_init({c.out, c.flat()}, c.flat(), rng));
    p.push_back(uniform_init({c.out}, c.flat(), rng));
  }
  return p;
}

// Deterministic for a given (arch, seed); ensemble members draw from
// seed+0 .. seed+4 so they are pairwise distinct.
inline NetworkWeights init_network(const NetworkArch& arch, uint64_t seed) {
  NetworkWeights w;
  w.arch = arch;
  w.seed = seed;
  if (arch.ensemble) {
    for (int m = 0; m < kEnsembleSize; ++m) {
      auto member = init_member(arch, seed + static_cast<uint64_t>(m));
      for (auto& t : member) w.params.push_back(std::move(t));
    }
  } else {
    w.params = init_member(arch, seed);
  }
  return w;
}

// Applies one member given its parameter leaf ids on the tape.
inline int apply_member(Tape& tape, const NetworkArch& arch,
                        const std::vector<int>& param_ids, int input) {
  if (arch.kind == NetworkArch::Kind::Mlp) {
    int h = tape.relu(tape.affine(param_ids[0], param_ids[1], input));
    h = tape.relu(tape.affine(param_ids[2], param_ids[3], h));
    return tape.affine(param_ids[4], param_ids[5], h);
  }
  const auto& c = arch.cnn;
  int h = tape.relu(tape.conv2d(param_ids[0], param_ids[1], input, c.stride));
  h = tape.relu(tape.conv2d(param_ids[2], param_ids[3], h, c.stride));
  h = tape.reshape(h, {c.flat()});
  return tape.affine(param_ids[4], param_ids[5], h);
}

// ---- Adam ----

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  int64_t step_count = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  AdamHyper hyper;

  void init_like(const std::vector<Tensor>& params) {
    step_count = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.shape);
      v.emplace_back(p.shape);
    }
  }
};

// Standard Adam with bias correction; grads may contain empty tensors for
// parameters that received no gradient (treated as zero).
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                      AdamState& state) {
  if (state.m.size() != params.size()) state.init_like(params);
  state.step_count += 1;
  const auto& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    Tensor& m = state.m[pi];
    Tensor& v = state.v[pi];
    for (int i = 0; i < p.size(); ++i) {
      const double g = (pi < grads.size() && !grads[pi].v.empty()) ? grads[pi][i] : 0.0;
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

// ---- flat binary snapshots ----
// header: arch string length + bytes, seed, parameter count; then every
// value as a 64-bit little-endian double in declaration order.

inline void save_weights(const NetworkWeights& w, std::ostream& os) {
  const std::string desc = w.arch.describe();
  const uint32_t len = static_cast<uint32_t>(desc.size());
  uint64_t total = 0;
  for (const auto& p : w.params) total += static_cast<uint64_t>(p.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(desc.data(), len);
  os.write(reinterpret_cast<const char*>(&w.seed), sizeof(w.seed));
  os.write(reinterpret_cast<const char*>(&total), sizeof(total));
  for (const auto& p : w.params)
    os.write(reinterpret_cast<const char*>(p.v.data()),
             static_cast<std::streamsize>(p.v.size() * sizeof(double)));
}

// Restores values into a weight set with matching arch (shapes come from the
// existing object; the header is validated against it).
inline void load_weights(NetworkWeights& w, std::istream& is) {
  uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string desc(len, '\0');
  is.read(desc.data(), len);
  if (desc != w.arch.describe())
    throw std::runtime_error("weight snapshot arch mismatch: " + desc);
  uint64_t seed = 0, total = 0;
  is.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  is.read(reinterpret_cast<char*>(&total), sizeof(total));
  uint64_t expect = 0;
  for (const auto& p : w.params) expect += static_cast<uint64_t>(p.size());
  if (total != expect) throw std::runtime_error("weight snapshot size mismatch");
  w.seed = seed;
  for (auto& p : w.params)
    is.read(reinterpret_cast<char*>(p.v.data()),
            static_cast<std::streamsize>(p.v.size() * sizeof(double)));
  if (!is) throw std::runtime_error("weight snapshot truncated");
}

}  // namespace curio
