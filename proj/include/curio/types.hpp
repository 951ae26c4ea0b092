#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "curio/nets.hpp"

// The polymorphic type lattice and the operation vocabulary of the curiosity
// DSL: real scalars, positive reals, environment state/action spaces, the
// fixed 32-d feature space, and single-level lists of any of those.

namespace curio {

enum class Ty { Real, PosReal, State, Action, Feature, VarX };

struct SemanticType {
  Ty base = Ty::Real;
  bool is_list = false;

  bool operator==(const SemanticType& o) const {
    return base == o.base && is_list == o.is_list;
  }
};

inline SemanticType t_real() { return {Ty::Real, false}; }
inline SemanticType t_pos() { return {Ty::PosReal, false}; }
inline SemanticType t_state() { return {Ty::State, false}; }
inline SemanticType t_action() { return {Ty::Action, false}; }
inline SemanticType t_feature() { return {Ty::Feature, false}; }
inline SemanticType t_x() { return {Ty::VarX, false}; }
inline SemanticType t_list(SemanticType inner) {
  if (inner.is_list) throw std::invalid_argument("lists do not nest");
  return {inner.base, true};
}

inline std::string type_name(const SemanticType& t) {
  std::string s;
  switch (t.base) {
    case Ty::Real: s = "R"; break;
    case Ty::PosReal: s = "R+"; break;
    case Ty::State: s = "S"; break;
    case Ty::Action: s = "A"; break;
    case Ty::Feature: s = "F"; break;
    case Ty::VarX: s = "X"; break;
  }
  return t.is_list ? "List[" + s + "]" : s;
}

// A scalar-valued type for runtime purposes: R+ behaves as R everywhere
// except in the triviality analysis.
inline bool is_scalar_type(const SemanticType& t) {
  return !t.is_list && (t.base == Ty::Real || t.base == Ty::PosReal);
}

struct EnvTypeBinding {
  struct StateForm {
    bool image = false;
    int channels = 0, height = 0, width = 0;  // image
    int dim = 0;                              // vector
  };
  struct ActionForm {
    bool discrete = true;
    int n = 0;    // discrete
    int dim = 0;  // continuous
  };
  StateForm state;
  ActionForm action;
  int feature_dim = kFeatureDim;

  int action_width() const { return action.discrete ? action.n : action.dim; }
  int state_width() const {
    return state.image ? state.channels * state.height * state.width : state.dim;
  }

  void check() const {
    if (feature_dim != kFeatureDim)
      throw std::invalid_argument("feature_dim must be 32");
    if (state.image) {
      if (state.channels < 1 || state.height < 1 || state.width < 1)
        throw std::invalid_argument("image dims must be positive");
    } else if (state.dim < 1) {
      throw std::invalid_argument("vector state dim must be positive");
    }
    if (action.discrete) {
      if (action.n < 2) throw std::invalid_argument("discrete actions need n >= 2");
    } else if (action.dim < 1) {
      throw std::invalid_argument("continuous action dim must be positive");
    }
  }
};

inline EnvTypeBinding image_binding(int c, int h, int w, int actions) {
  EnvTypeBinding b;
  b.state.image = true;
  b.state.channels = c;
  b.state.height = h;
  b.state.width = w;
  b.action.discrete = true;
  b.action.n = actions;
  return b;
}

inline EnvTypeBinding vector_binding(int dim, int actions) {
  EnvTypeBinding b;
  b.state.dim = dim;
  b.action.discrete = true;
  b.action.n = actions;
  return b;
}

inline EnvTypeBinding vector_continuous_binding(int dim, int action_dim) {
  EnvTypeBinding b;
  b.state.dim = dim;
  b.action.discrete = false;
  b.action.dim = action_dim;
  return b;
}

enum class Vocab { Curiosity, Combiner };

enum class OpState { None, FifoBuffer, NetworkWeights, RunningStat, NnBuffer, Adam };

struct OperationSignature {
  std::string name;
  Vocab vocabulary = Vocab::Curiosity;
  std::vector<SemanticType> inputs;
  OpState state = OpState::None;
  std::optional<SemanticType> output;
  bool is_update_module = false;
  std::vector<bool> diff_through;  // per input
  // network ops
  bool is_network = false;
  bool detach_output = false;
  bool ensemble = false;
  std::string net_in1, net_in2;  // "s", "a", "f" (second may be empty)
  std::string net_out;           // "a", "f"
  // combiner constants
  double const_value = 0.0;
  bool is_const = false;
};

namespace detail {

inline OperationSignature func_op(std::string name, std::vector<SemanticType> in,
                                  SemanticType out, std::vector<bool> diff = {}) {
  OperationSignature s;
  s.name = std::move(name);
  s.inputs = std::move(in);
  s.output = out;
  s.diff_through = diff.empty() ? std::vector<bool>(s.inputs.size(), true) : std::move(diff);
  return s;
}

inline OperationSignature net_op(std::string name, std::string in1, std::string in2,
                                 std::string out, bool detach, bool ens) {
  OperationSignature s;
  s.name = std::move(name);
  s.is_network = true;
  s.detach_output = detach;
  s.ensemble = ens;
  s.net_in1 = std::move(in1);
  s.net_in2 = std::move(in2);
  s.net_out = std::move(out);
  s.state = OpState::NetworkWeights;
  auto ty_of = [](const std::string& k) {
    if (k == "s") return t_state();
    if (k == "a") return t_action();
    return t_feature();
  };
  s.inputs.push_back(ty_of(s.net_in1));
  if (!s.net_in2.empty()) s.inputs.push_back(ty_of(s.net_in2));
  SemanticType out_t = s.net_out == "a" ? t_action() : t_feature();
  s.output = ens ? t_list(out_t) : out_t;
  s.diff_through.assign(s.inputs.size(), !detach);
  return s;
}

inline std::vector<OperationSignature> build_curiosity_ops() {
  std::vector<OperationSignature> ops;
  auto add = [&](OperationSignature s) {
    s.vocabulary = Vocab::Curiosity;
    ops.push_back(std::move(s));
  };

  add(func_op("add", {t_real(), t_real()}, t_real()));
  {
    auto s = func_op("running_norm", {t_real()}, t_real());
    s.state = OpState::RunningStat;
    add(s);
  }
  {
    auto s = func_op("variable_as_buffer", {t_x()}, t_list(t_x()), {false});
    s.state = OpState::FifoBuffer;
    s.is_update_module = true;
    add(s);
  }
  {
    auto s = func_op("knn_regressor", {t_feature(), t_feature()}, t_feature(),
                     {false, false});
    s.state = OpState::NnBuffer;
    s.is_update_module = true;
    add(s);
  }
  add(func_op("subtract_one_tenth", {t_real()}, t_real()));
  add(func_op("normal_distribution", {}, t_real()));
  add(func_op("subtract", {t_real(), t_real()}, t_real()));
  add(func_op("sqrt_abs", {t_real()}, t_pos()));

  add(net_op("nn_f_f_to_f", "f", "f", "f", false, false));
  add(net_op("nn_f_f_to_a", "f", "f", "a", false, false));
  add(net_op("nn_f_to_a", "f", "", "a", false, false));
  add(net_op("nn_a_to_f", "a", "", "f", false, false));
  add(net_op("nn_s_to_f", "s", "", "f", false, false));
  add(net_op("nn_s_to_f_detach", "s", "", "f", true, false));
  add(net_op("nn_s_to_a", "s", "", "a", false, false));
  add(net_op("nn_ensemble_s_to_f", "s", "", "f", false, true));
  add(net_op("nn_ensemble_f_to_f", "f", "", "f", false, true));
  add(net_op("nn_ensemble_f_f_to_f", "f", "f", "f", false, true));
  add(net_op("nn_ensemble_f_a_to_f", "f", "a", "f", false, true));

  {
    OperationSignature s;
    s.name = "minimize";
    s.inputs = {t_real()};
    s.state = OpState::Adam;
    s.is_update_module = true;
    s.diff_through = {true};
    add(s);
  }
  add(func_op("l2_norm", {t_x()}, t_pos()));
  add(func_op("l2_distance", {t_x(), t_x()}, t_real()));
  add(func_op("action_loss", {t_x(), t_action()}, t_pos()));
  add(func_op("dot_product", {t_x(), t_x()}, t_real()));
  add(func_op("add_vec", {t_x(), t_x()}, t_x()));
  add(func_op("detach", {t_x()}, t_x(), {false}));
  add(func_op("mean", {t_list(t_real())}, t_real()));
  add(func_op("variance", {t_list(t_x())}, t_pos()));
  add(func_op("mean_vec", {t_list(t_x())}, t_x()));
  add(func_op("mapped_l2_norm", {t_list(t_x())}, t_list(t_real())));
  add(func_op("average_distance", {t_list(t_x()), t_x()}, t_real()));
  add(func_op("minus", {t_list(t_x()), t_x()}, t_list(t_x())));
  return ops;
}

inline std::vector<OperationSignature> build_combiner_ops() {
  std::vector<OperationSignature> ops;
  auto add = [&](OperationSignature s) {
    s.vocabulary = Vocab::Combiner;
    ops.push_back(std::move(s));
  };
  auto constant = [&](std::string name, double value) {
    OperationSignature s;
    s.name = std::move(name);
    s.output = t_real();
    s.is_const = true;
    s.const_value = value;
    add(s);
  };
  constant("const_0_01", 0.01);
  constant("const_0_1", 0.1);
  constant("const_0_5", 0.5);
  constant("const_1", 1.0);
  add(func_op("normal_distribution", {}, t_real()));
  add(func_op("add", {t_real(), t_real()}, t_real()));
  add(func_op("max", {t_real(), t_real()}, t_real()));
  add(func_op("min", {t_real(), t_real()}, t_real()));
  add(func_op("weighted_normalized_sum",
              {t_real(), t_real(), t_real(), t_real()}, t_real()));
  {
    auto s = func_op("running_norm", {t_real()}, t_real());
    s.state = OpState::RunningStat;
    add(s);
  }
  {
    auto s = func_op("variable_as_buffer", {t_real()}, t_list(t_real()), {false});
    s.state = OpState::FifoBuffer;
    s.is_update_module = true;
    add(s);
  }
  add(func_op("subtract", {t_real(), t_real()}, t_real()));
  add(func_op("multiply", {t_real(), t_real()}, t_real()));
  add(func_op("sqrt_abs", {t_real()}, t_pos()));
  add(func_op("mean", {t_list(t_real())}, t_real()));
  return ops;
}

}  // namespace detail

// Complete registries in fixed, deterministic order.
inline const std::vector<OperationSignature>& list_operations(Vocab v) {
  static const std::vector<OperationSignature> curiosity = detail::build_curiosity_ops();
  static const std::vector<OperationSignature> combiner = detail::build_combiner_ops();
  return v == Vocab::Curiosity ? curiosity : combiner;
}

inline std::string state_name(OpState s) {
  switch (s) {
    case OpState::None: return "none";
    case OpState::FifoBuffer: return "fifo_buffer";
    case OpState::NetworkWeights: return "network_weights";
    case OpState::RunningStat: return "running_stat";
    case OpState::NnBuffer: return "nn_buffer";
    case OpState::Adam: return "adam";
  }
  return "?";
}

// One-line rendering used by the registry golden-file comparison.
inline std::string describe_signature(const OperationSignature& op) {
  std::string s = op.vocabulary == Vocab::Curiosity ? "curiosity " : "combiner ";
  s += op.name + " ";
  if (op.inputs.empty()) {
    s += "-";
  } else {
    for (size_t i = 0; i < op.inputs.size(); ++i) {
      if (i) s += ",";
      s += type_name(op.inputs[i]);
    }
  }
  s += " -> ";
  s += op.output ? type_name(*op.output) : "-";
  s += " state=" + state_name(op.state);
  s += " update=" + std::to_string(op.is_update_module ? 1 : 0);
  return s;
}

inline Vocab parse_vocab(const std::string& s) {
  if (s == "curiosity") return Vocab::Curiosity;
  if (s == "combiner") return Vocab::Combiner;
  throw std::invalid_argument("unknown vocabulary: " + s);
}

inline const OperationSignature* find_operation(const std::string& name, Vocab v) {
  for (const auto& op : list_operations(v))
    if (op.name == name) return &op;
  return nullptr;
}

// ---- type checking ----

struct TypeCheckResult {
  bool ok = false;
  std::string diagnostic;
  int position = -1;                  // first mismatching input
  std::optional<Ty> x_binding;        // resolved X, when the signature uses X
  SemanticType output;                // resolved output type
};

// R+ unifies where R is required (not vice versa); X binds uniformly to one
// of {F, A} across the whole signature.
inline TypeCheckResult check_types(const std::vector<SemanticType>& actual,
                                   const OperationSignature& sig) {
  TypeCheckResult r;
  if (actual.size() != sig.inputs.size()) {
    r.diagnostic = "arity mismatch for '" + sig.name + "': expected " +
                   std::to_string(sig.inputs.size()) + " inputs, got " +
                   std::to_string(actual.size());
    return r;
  }
  std::optional<Ty> x;
  for (size_t i = 0; i < actual.size(); ++i) {
    const SemanticType& want = sig.inputs[i];
    const SemanticType& got = actual[i];
    if (want.is_list != got.is_list) {
      r.position = static_cast<int>(i);
      r.diagnostic = "input " + std::to_string(i) + " of '" + sig.name +
                     "': expected " + type_name(want) + ", got " + type_name(got);
      return r;
    }
    if (want.base == Ty::VarX) {
      if (got.base != Ty::Feature && got.base != Ty::Action) {
        r.position = static_cast<int>(i);
        r.diagnostic = "input " + std::to_string(i) + " of '" + sig.name +
                       "': X must be F or A, got " + type_name(got);
        return r;
      }
      if (x && *x != got.base) {
        r.position = static_cast<int>(i);
        r.diagnostic = "input " + std::to_string(i) + " of '" + sig.name +
                       "': X must bind uniformly across the signature";
        return r;
      }
      x = got.base;
      continue;
    }
    const bool match =
        want.base == got.base ||
        (want.base == Ty::Real && got.base == Ty::PosReal);  // R+ <= R
    if (!match) {
      r.position = static_cast<int>(i);
      r.diagnostic = "input " + std::to_string(i) + " of '" + sig.name +
                     "': expected " + type_name(want) + ", got " + type_name(got);
      return r;
    }
  }
  r.ok = true;
  r.x_binding = x;
  if (sig.output) {
    r.output = *sig.output;
    if (r.output.base == Ty::VarX) {
      if (!x) {
        r.ok = false;
        r.diagnostic = "'" + sig.name + "': output X has no binding";
        return r;
      }
      r.output.base = *x;
    }
  }
  return r;
}

// ---- concrete resolution against an environment ----

struct ConcreteSignature {
  OperationSignature sig;
  NetworkArch arch;                      // for network ops
  std::vector<std::vector<int>> input_shapes;
  std::vector<int> output_shape;
  bool action_loss_discrete = false;     // softmax+NLL vs zero-pad+MSE
};

inline std::vector<int> shape_of(const SemanticType& t, const EnvTypeBinding& b) {
  switch (t.base) {
    case Ty::Real:
    case Ty::PosReal:
      return {1};
    case Ty::Feature:
    case Ty::VarX:
      return {b.feature_dim};
    case Ty::Action:
      return {b.action_width()};
    case Ty::State:
      if (b.state.image) return {b.state.channels, b.state.height, b.state.width};
      return {b.state.dim};
  }
  return {1};
}

// A pure function: NN-on-S becomes a CNN for image states and an MLP for
// vector states; ActionSpaceLoss becomes softmax+NLL for discrete actions and
// zero-pad+MSE for continuous ones.
inline ConcreteSignature resolve_signature(const OperationSignature& sig,
                                           const EnvTypeBinding& binding) {
  binding.check();
  ConcreteSignature c;
  c.sig = sig;
  for (const auto& in : sig.inputs) c.input_shapes.push_back(shape_of(in, binding));
  if (sig.output) c.output_shape = shape_of(*sig.output, binding);
  if (sig.is_network) {
    auto width = [&](const std::string& k) {
      if (k == "a") return binding.action_width();
      return binding.feature_dim;
    };
    const int out_dim = width(sig.net_out);
    if (sig.net_in1 == "s" && binding.state.image) {
      c.arch.kind = NetworkArch::Kind::Cnn;
      c.arch.cnn.channels = binding.state.channels;
      c.arch.cnn.height = binding.state.height;
      c.arch.cnn.width = binding.state.width;
      c.arch.cnn.out = out_dim;
      if (c.arch.cnn.h2() < 1 || c.arch.cnn.w2() < 1)
        throw std::invalid_argument("image too small for the CNN");
    } else {
      c.arch.kind = NetworkArch::Kind::Mlp;
      int in_dim = sig.net_in1 == "s" ? binding.state_width() : width(sig.net_in1);
      if (!sig.net_in2.empty()) in_dim += width(sig.net_in2);
      c.arch.mlp.in = in_dim;
      c.arch.mlp.out = out_dim;
    }
    c.arch.ensemble = sig.ensemble;
  }
  if (sig.name == "action_loss") c.action_loss_discrete = binding.action.discrete;
  return c;
}

// Elementwise lift: the chosen non-list input and the output become lists.
inline OperationSignature lift_to_list(const OperationSignature& sig, int input_index) {
  if (input_index < 0 || input_index >= static_cast<int>(sig.inputs.size()))
    throw std::invalid_argument("lift_to_list: no such input");
  if (sig.inputs[static_cast<size_t>(input_index)].is_list)
    throw std::invalid_argument("lift_to_list: input is already a list");
  OperationSignature lifted = sig;
  lifted.name = "mapped_" + sig.name;
  lifted.inputs[static_cast<size_t>(input_index)].is_list = true;
  if (lifted.output) {
    if (lifted.output->is_list)
      throw std::invalid_argument("lift_to_list: output is already a list");
    lifted.output->is_list = true;
  }
  return lifted;
}

}  // namespace curio
