#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "curio/graph.hpp"

// Hand-built programs: the published curiosity algorithms expressible in the
// DSL, the discovered FAST and cycle-consistency programs, the weak baseline
// rewards, and the reward combiners.

namespace curio {

class GraphBuilder {
 public:
  explicit GraphBuilder(ProgramKind kind, std::string name) {
    g_.kind = kind;
    g_.name = std::move(name);
  }

  std::string input(const std::string& id, const std::string& source) {
    ProgramNode n;
    n.id = id;
    n.kind = NodeKind::Input;
    n.op = source;
    g_.nodes.push_back(std::move(n));
    return id;
  }

  std::string weights(const std::string& id, const std::string& role) {
    ProgramNode n;
    n.id = id;
    n.kind = NodeKind::Weights;
    n.op = role;
    g_.nodes.push_back(std::move(n));
    return id;
  }

  std::string apply(const std::string& id, const std::string& w,
                    std::vector<std::string> args) {
    ProgramNode n;
    n.id = id;
    n.kind = NodeKind::Apply;
    n.op = "nn_apply";
    n.weight = w;
    n.parents = std::move(args);
    g_.nodes.push_back(std::move(n));
    return id;
  }

  std::string op(const std::string& id, const std::string& name,
                 std::vector<std::string> args = {}) {
    ProgramNode n;
    n.id = id;
    n.kind = NodeKind::Op;
    n.op = name;
    n.parents = std::move(args);
    g_.nodes.push_back(std::move(n));
    return id;
  }

  ProgramGraph output(const std::string& id) {
    g_.output_node = id;
    return g_;
  }

 private:
  ProgramGraph g_;
};

namespace reference_detail {

// Fast Action-Space Transition: one shared state-to-action network applied to
// both states; train it to predict the taken action from the next state;
// reward the distance between the two predictions.
inline ProgramGraph build_fast() {
  GraphBuilder b(ProgramKind::Intrinsic, "fast");
  b.input("s0", "state");
  b.input("s1", "state_next");
  b.input("a0", "action");
  b.weights("w", "nn_s_to_a");
  b.apply("p1", "w", {"s1"});
  b.apply("p0", "w", {"s0"});
  b.op("l", "action_loss", {"p1", "a0"});
  b.op("m", "minimize", {"l"});
  b.op("out", "l2_distance", {"p1", "p0"});
  return b.output("out");
}

// Random network distillation: a trained embedding chases a frozen random
// one; the residual distance is the reward.
inline ProgramGraph build_rnd() {
  GraphBuilder b(ProgramKind::Intrinsic, "rnd");
  b.input("s1", "state_next");
  b.weights("w1", "nn_s_to_f_detach");
  b.weights("w2", "nn_s_to_f");
  b.apply("t", "w1", {"s1"});
  b.apply("p", "w2", {"s1"});
  b.op("d", "l2_distance", {"t", "p"});
  b.op("m", "minimize", {"d"});
  return b.output("d");
}

// Cycle-consistency: a forward-and-random embedding f, a shared backward
// network b and a frozen random target r. b(f(s)) chases r(s); b applied to a
// detached f(s') chases a detached f(s); the reward compares both round trips.
// The detach placement gives f gradients only from the first loss.
inline ProgramGraph build_cycle_consistency() {
  GraphBuilder b(ProgramKind::Intrinsic, "cycle_consistency");
  b.input("s0", "state");
  b.input("s1", "state_next");
  b.weights("w1", "nn_s_to_f_detach");  // r: frozen random embedding
  b.weights("w3", "nn_s_to_f");         // f: forward-and-random embedding
  b.weights("w2", "nn_f_f_to_f");       // b: shared backward network
  b.apply("f0", "w3", {"s0"});
  b.apply("f1", "w3", {"s1"});
  b.apply("b0", "w2", {"f0", "f0"});
  b.op("d1", "detach", {"f1"});
  b.apply("b1", "w2", {"d1", "d1"});
  b.apply("r0", "w1", {"s0"});
  b.op("l1", "l2_distance", {"b0", "r0"});
  b.op("m1", "minimize", {"l1"});
  b.op("d0", "detach", {"f0"});
  b.op("l2", "l2_distance", {"b1", "d0"});
  b.op("m2", "minimize", {"l2"});
  b.op("out", "l2_distance", {"b0", "b1"});
  return b.output("out");
}

// Inverse-features curiosity: a shared embedding is trained through an
// inverse model that predicts the taken action from consecutive embeddings;
// the reward is that prediction error.
inline ProgramGraph build_inverse_features() {
  GraphBuilder b(ProgramKind::Intrinsic, "inverse_features");
  b.input("s0", "state");
  b.input("s1", "state_next");
  b.input("a0", "action");
  b.weights("w", "nn_s_to_f");
  b.weights("wi", "nn_f_f_to_a");
  b.apply("e0", "w", {"s0"});
  b.apply("e1", "w", {"s1"});
  b.apply("p", "wi", {"e0", "e1"});
  b.op("l", "action_loss", {"p", "a0"});
  b.op("m", "minimize", {"l"});
  return b.output("l");
}

// Ensemble predictive disagreement: five forward models predict the next
// embedding from (embedding, action); their variance is the reward and their
// mean distance to the detached target is the loss.
inline ProgramGraph build_ensemble_disagreement() {
  GraphBuilder b(ProgramKind::Intrinsic, "ensemble_disagreement");
  b.input("s0", "state");
  b.input("s1", "state_next");
  b.input("a0", "action");
  b.weights("w", "nn_s_to_f");
  b.weights("we", "nn_ensemble_f_a_to_f");
  b.apply("e0", "w", {"s0"});
  b.apply("e1", "w", {"s1"});
  b.op("det", "detach", {"e1"});
  b.apply("ens", "we", {"e0", "a0"});
  b.op("d", "average_distance", {"ens", "det"});
  b.op("m", "minimize", {"d"});
  b.op("out", "variance", {"ens"});
  return b.output("out");
}

// Distillation against a frozen target with an ensemble of trained networks.
inline ProgramGraph build_rnd_ensemble_variant() {
  GraphBuilder b(ProgramKind::Intrinsic, "rnd_ensemble_variant");
  b.input("s1", "state_next");
  b.weights("wt", "nn_s_to_f_detach");
  b.weights("we", "nn_ensemble_s_to_f");
  b.apply("t", "wt", {"s1"});
  b.apply("ens", "we", {"s1"});
  b.op("d", "average_distance", {"ens", "t"});
  b.op("m", "minimize", {"d"});
  return b.output("d");
}

// The curiosity vocabulary has no literal constants, so the baseline rewards
// are built from identities: ||a-a|| gives 0, ten SubtractOneTenth steps walk
// it to -1, and sqrt(|-1|) gives 1.
inline ProgramGraph build_constant_zero() {
  GraphBuilder b(ProgramKind::Intrinsic, "constant_zero");
  b.input("a0", "action");
  b.op("z", "l2_distance", {"a0", "a0"});
  return b.output("z");
}

inline void chain_to_minus_one(GraphBuilder& b) {
  b.input("a0", "action");
  b.op("z", "l2_distance", {"a0", "a0"});
  std::string prev = "z";
  for (int i = 1; i <= 10; ++i) {
    std::string id = "c" + std::to_string(i);
    b.op(id, "subtract_one_tenth", {prev});
    prev = id;
  }
}

inline ProgramGraph build_constant_minus_one() {
  GraphBuilder b(ProgramKind::Intrinsic, "constant_minus_one");
  chain_to_minus_one(b);
  return b.output("c10");
}

inline ProgramGraph build_constant_one() {
  GraphBuilder b(ProgramKind::Intrinsic, "constant_one");
  chain_to_minus_one(b);
  b.op("one", "sqrt_abs", {"c10"});
  return b.output("one");
}

inline ProgramGraph build_gaussian_noise() {
  GraphBuilder b(ProgramKind::Intrinsic, "gaussian_noise");
  b.op("n", "normal_distribution");
  return b.output("n");
}

// r_hat = ((1 + i - t/T) * i + (t/T) * r) / (1 + i), written with a single
// WeightedNormalizedSum: |1+i-t/T| + |t/T| equals 1+i on the whole valid
// domain (i >= 0, 0 <= t/T <= 1).
inline ProgramGraph build_combiner_discovered() {
  GraphBuilder b(ProgramKind::Combiner, "combiner_discovered");
  b.input("i", "intrinsic");
  b.input("r", "reward");
  b.input("t", "time");
  b.op("c1", "const_1");
  b.op("s1", "add", {"c1", "i"});
  b.op("s2", "subtract", {"s1", "t"});
  b.op("out", "weighted_normalized_sum", {"s2", "i", "t", "r"});
  return b.output("out");
}

inline ProgramGraph build_combiner_intrinsic_only() {
  GraphBuilder b(ProgramKind::Combiner, "combiner_intrinsic_only");
  b.input("i", "intrinsic");
  return b.output("i");
}

inline ProgramGraph build_combiner_extrinsic_only() {
  GraphBuilder b(ProgramKind::Combiner, "combiner_extrinsic_only");
  b.input("r", "reward");
  return b.output("r");
}

}  // namespace reference_detail

inline std::vector<std::string> reference_program_names() {
  return {"fast",
          "cycle_consistency",
          "rnd",
          "inverse_features",
          "ensemble_disagreement",
          "rnd_ensemble_variant",
          "constant_zero",
          "constant_one",
          "constant_minus_one",
          "gaussian_noise",
          "combiner_discovered",
          "combiner_intrinsic_only",
          "combiner_extrinsic_only"};
}

inline ProgramGraph build_reference_program(const std::string& name) {
  using namespace reference_detail;
  if (name == "fast") return build_fast();
  if (name == "cycle_consistency") return build_cycle_consistency();
  if (name == "rnd") return build_rnd();
  if (name == "inverse_features") return build_inverse_features();
  if (name == "ensemble_disagreement") return build_ensemble_disagreement();
  if (name == "rnd_ensemble_variant") return build_rnd_ensemble_variant();
  if (name == "constant_zero") return build_constant_zero();
  if (name == "constant_one") return build_constant_one();
  if (name == "constant_minus_one") return build_constant_minus_one();
  if (name == "gaussian_noise") return build_gaussian_noise();
  if (name == "combiner_discovered") return build_combiner_discovered();
  if (name == "combiner_intrinsic_only") return build_combiner_intrinsic_only();
  if (name == "combiner_extrinsic_only") return build_combiner_extrinsic_only();
  throw std::invalid_argument("unknown reference program '" + name + "'");
}

}  // namespace curio
