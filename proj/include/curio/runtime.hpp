#pragma once

#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "curio/graph.hpp"
#include "curio/nets.hpp"
#include "curio/rng.hpp"
#include "curio/tensor.hpp"

// Executes curiosity and combiner programs one time-step at a time: forward
// pass over the DAG batched across rollouts, then one Adam step on the summed
// losses, then FIFO/statistic updates. Buffer and regressor reads never
// propagate gradients, so nothing backpropagates through time.

namespace curio {

struct RuntimeConfig {
  int buffer_capacity = 1000;
  int knn_k = 10;
  int knn_capacity = 1000;
  AdamHyper adam;  // curiosity-module optimizer, lr defaults to 1e-3
};

struct RunningStat {
  int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  double variance() const { return count >= 1 ? m2 / static_cast<double>(count) : 0.0; }

  void update(double x) {
    count += 1;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
};

// Normalizes by the running standard deviation (no centering). The first
// call passes through; afterwards the pre-update variance is used, floored
// at 1e-8 so constant streams stay finite.
inline double running_norm_step(RunningStat& stat, double x) {
  const double out = stat.count == 0 ? x : x / (std::sqrt(stat.variance()) + 1e-8);
  stat.update(x);
  return out;
}

// Mean of the k stored targets nearest to the query; all of them if fewer
// are stored, the zero vector if the store is empty.
inline Tensor knn_lookup(const std::deque<Tensor>& store, const Tensor& query, int k) {
  Tensor out(query.shape);
  if (store.empty()) return out;
  std::vector<std::pair<double, int>> dist;
  dist.reserve(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < query.size(); ++j) {
      const double d = store[i][j] - query[j];
      s += d * d;
    }
    dist.push_back({s, static_cast<int>(i)});
  }
  std::stable_sort(dist.begin(), dist.end());
  const int use = std::min<int>(k, static_cast<int>(dist.size()));
  for (int i = 0; i < use; ++i)
    for (int j = 0; j < out.size(); ++j)
      out[j] += store[static_cast<size_t>(dist[static_cast<size_t>(i)].second)][j];
  for (int j = 0; j < out.size(); ++j) out[j] /= use;
  return out;
}

// Lookup, then the target joins the capacity-bounded FIFO store.
inline Tensor knn_regress_step(std::deque<Tensor>& store, const Tensor& query,
                               const Tensor& target, int k, int capacity) {
  Tensor out = knn_lookup(store, query, k);
  store.push_back(target);
  while (static_cast<int>(store.size()) > capacity) store.pop_front();
  return out;
}

// (a*b + c*d) / (|a| + |c|); the denominator is raised by 1e-8 only when it
// underflows that floor, keeping the exact algebra intact elsewhere.
inline double weighted_normalized_sum(double a, double b, double c, double d) {
  double den = std::fabs(a) + std::fabs(c);
  if (den < 1e-8) den += 1e-8;
  return (a * b + c * d) / den;
}

struct Transition {
  Tensor state;
  Tensor action;  // one-hot for discrete actions, raw vector for continuous
  Tensor state_next;
  double reward = 0.0;
};

struct TransitionBatch {
  std::vector<Transition> items;
  int rollout_count() const { return static_cast<int>(items.size()); }
};

inline Tensor one_hot_action(int a, int n) {
  Tensor t({n});
  t[a] = 1.0;
  return t;
}

struct ProgramInstance {
  ProgramGraph graph;
  ValidationReport info;
  EnvTypeBinding binding;
  RuntimeConfig cfg;
  std::map<std::string, NetworkWeights> weights;
  std::map<std::string, AdamState> adam;
  std::map<std::string, std::deque<Tensor>> buffers;     // per variable_as_buffer node
  std::map<std::string, RunningStat> stats;              // per running_norm node
  std::map<std::string, std::deque<Tensor>> knn_stores;  // per knn_regressor node
  Rng rng;
  int64_t step_count = 0;
};

inline ProgramInstance instantiate(const ProgramGraph& g, const EnvTypeBinding& binding,
                                   uint64_t seed, RuntimeConfig cfg = {}) {
  ValidationReport info = validate_program(g, binding);
  if (!info.valid())
    throw std::invalid_argument(
        "program does not validate: " +
        (!info.acyclic.ok ? info.acyclic.detail
         : !info.typing.ok ? info.typing.detail
         : !info.output_scalar.ok ? info.output_scalar.detail
                                  : info.losses.detail));
  ProgramInstance inst;
  inst.graph = g;
  inst.info = std::move(info);
  inst.binding = binding;
  inst.cfg = cfg;
  inst.rng.reseed(mix_seed(seed, hash_str("rng")));
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Weights) {
      const OperationSignature* sig = find_operation(n.op, vocab_of(g.kind));
      ConcreteSignature c = resolve_signature(*sig, binding);
      inst.weights[n.id] = init_network(c.arch, mix_seed(seed, hash_str(n.id.c_str())));
      AdamState st;
      st.hyper = cfg.adam;
      st.init_like(inst.weights[n.id].params);
      inst.adam[n.id] = std::move(st);
    } else if (n.kind == NodeKind::Op) {
      if (n.op == "variable_as_buffer") inst.buffers[n.id] = {};
      else if (n.op == "running_norm") inst.stats[n.id] = {};
      else if (n.op == "knn_regressor") inst.knn_stores[n.id] = {};
    }
  }
  return inst;
}

struct StepResult {
  bool ok = true;
  std::string failed_node;
  std::vector<double> outputs;
};

namespace runtime_detail {

struct RtValue {
  bool is_list = false;
  int id = -1;
  std::vector<int> ids;
};

struct PendingUpdates {
  std::map<std::string, std::vector<double>> stat_inputs;
  std::map<std::string, std::vector<Tensor>> buffer_pushes;
  std::map<std::string, std::vector<Tensor>> knn_appends;
};

inline int pad_to(Tape& tape, int id, int width) {
  const int have = tape.value(id).size();
  if (have == width) return id;
  Tensor zeros({width - have});
  const int z = tape.leaf(zeros, false);
  return tape.concat(id, z);
}

inline int zero_width_of(const SemanticType& t, const EnvTypeBinding& b) {
  return shape_of(t, b)[0];
}

// Executes one batched step. `source_value` supplies input-module tensors per
// rollout. Returns per-rollout outputs; trains on the mean summed loss.
inline StepResult execute_step(
    ProgramInstance& inst, int rollouts,
    const std::function<Tensor(const std::string&, int)>& source_value) {
  StepResult res;
  Tape tape;
  PendingUpdates pending;

  // weight parameter leaves, shared across rollouts
  std::map<std::string, std::vector<int>> param_ids;
  for (auto& [wid, w] : inst.weights) {
    const bool trainable = inst.info.trainable_weights.count(wid)
                               ? inst.info.trainable_weights.at(wid)
                               : false;
    std::vector<int> ids;
    ids.reserve(w.params.size());
    for (auto& p : w.params) ids.push_back(tape.leaf(p, trainable));
    param_ids[wid] = std::move(ids);
  }

  std::vector<int> loss_terms;
  std::vector<double> outputs(static_cast<size_t>(rollouts), 0.0);

  auto finite_or_fail = [&](const RtValue& v, const std::string& node) {
    if (v.id >= 0 && !tape.value(v.id).finite()) return false;
    for (int id : v.ids)
      if (!tape.value(id).finite()) return false;
    (void)node;
    return true;
  };

  for (int r = 0; r < rollouts; ++r) {
    std::map<std::string, RtValue> vals;
    for (const auto& n : inst.graph.nodes) {
      RtValue v;
      if (n.kind == NodeKind::Input) {
        v.id = tape.leaf(source_value(n.op, r), false);
      } else if (n.kind == NodeKind::Weights) {
        continue;
      } else if (n.kind == NodeKind::Apply) {
        const ProgramNode* w = inst.graph.find(n.weight);
        const OperationSignature* sig = find_operation(w->op, vocab_of(inst.graph.kind));
        const NetworkWeights& net = inst.weights.at(n.weight);
        const auto& ids = param_ids.at(n.weight);
        const int per = net.params_per_member();
        int in = vals.at(n.parents[0]).id;
        if (n.parents.size() == 2) in = tape.concat(in, vals.at(n.parents[1]).id);
        if (sig->ensemble) {
          v.is_list = true;
          for (int m = 0; m < net.ensemble_members(); ++m) {
            std::vector<int> member(ids.begin() + m * per, ids.begin() + (m + 1) * per);
            v.ids.push_back(apply_member(tape, net.arch, member, in));
          }
        } else {
          int out = apply_member(tape, net.arch, ids, in);
          if (sig->detach_output) out = tape.detach(out);
          v.id = out;
        }
      } else {
        const std::string& op = n.op;
        auto in = [&](size_t i) -> const RtValue& { return vals.at(n.parents[i]); };
        if (op == "add") {
          v.id = tape.add(in(0).id, in(1).id);
        } else if (op == "subtract") {
          v.id = tape.sub(in(0).id, in(1).id);
        } else if (op == "multiply") {
          v.id = tape.mul(in(0).id, in(1).id);
        } else if (op == "max") {
          v.id = tape.maximum(in(0).id, in(1).id);
        } else if (op == "min") {
          v.id = tape.minimum(in(0).id, in(1).id);
        } else if (op == "subtract_one_tenth") {
          v.id = tape.add_scalar(in(0).id, -0.1);
        } else if (op == "sqrt_abs") {
          v.id = tape.sqrt_abs(in(0).id);
        } else if (op == "normal_distribution") {
          v.id = tape.leaf(Tensor::scalar(inst.rng.normal()), false);
        } else if (op == "running_norm") {
          const double x = tape.value(in(0).id)[0];
          const RunningStat& st = inst.stats.at(n.id);
          if (st.count == 0) {
            v.id = in(0).id;
          } else {
            v.id = tape.scale(in(0).id, 1.0 / (std::sqrt(st.variance()) + 1e-8));
          }
          pending.stat_inputs[n.id].push_back(x);
        } else if (op == "variable_as_buffer") {
          v.is_list = true;
          for (const Tensor& t : inst.buffers.at(n.id))
            v.ids.push_back(tape.leaf(t, false));
          pending.buffer_pushes[n.id].push_back(tape.value(in(0).id));
        } else if (op == "knn_regressor") {
          const Tensor& q = tape.value(in(0).id);
          const Tensor& t = tape.value(in(1).id);
          // gradient-stopped read against the pre-step store
          v.id = tape.leaf(knn_lookup(inst.knn_stores.at(n.id), q, inst.cfg.knn_k), false);
          pending.knn_appends[n.id].push_back(t);
        } else if (op == "minimize") {
          loss_terms.push_back(in(0).id);
          continue;  // no value
        } else if (op == "l2_norm") {
          v.id = tape.l2_norm(in(0).id);
        } else if (op == "l2_distance") {
          v.id = tape.l2_distance(in(0).id, in(1).id);
        } else if (op == "dot_product") {
          v.id = tape.dot(in(0).id, in(1).id);
        } else if (op == "add_vec") {
          v.id = tape.add(in(0).id, in(1).id);
        } else if (op == "detach") {
          v.id = tape.detach(in(0).id);
        } else if (op == "action_loss") {
          int pred = in(0).id;
          int target = in(1).id;
          const int width = std::max(tape.value(pred).size(), tape.value(target).size());
          pred = pad_to(tape, pred, width);
          target = pad_to(tape, target, width);
          v.id = inst.binding.action.discrete ? tape.softmax_nll(pred, target)
                                              : tape.mse(pred, target);
        } else if (op == "mean") {
          const auto& xs = in(0).ids;
          if (xs.empty()) {
            v.id = tape.constant(0.0);
          } else {
            int acc = xs[0];
            for (size_t i = 1; i < xs.size(); ++i) acc = tape.add(acc, xs[i]);
            v.id = tape.scale(acc, 1.0 / static_cast<double>(xs.size()));
          }
        } else if (op == "mean_vec") {
          const auto& xs = in(0).ids;
          if (xs.empty()) {
            const Ty xb = inst.info.x_bindings.count(n.id) ? inst.info.x_bindings.at(n.id)
                                                           : Ty::Feature;
            v.id = tape.leaf(Tensor({zero_width_of({xb, false}, inst.binding)}), false);
          } else {
            int acc = xs[0];
            for (size_t i = 1; i < xs.size(); ++i) acc = tape.add(acc, xs[i]);
            v.id = tape.scale(acc, 1.0 / static_cast<double>(xs.size()));
          }
        } else if (op == "variance") {
          const auto& xs = in(0).ids;
          if (xs.size() < 2) {
            v.id = tape.constant(0.0);
          } else {
            int acc = xs[0];
            for (size_t i = 1; i < xs.size(); ++i) acc = tape.add(acc, xs[i]);
            const int m = tape.scale(acc, 1.0 / static_cast<double>(xs.size()));
            int sq = -1;
            for (int x : xs) {
              const int d = tape.sub(x, m);
              const int dd = tape.mul(d, d);
              sq = sq < 0 ? dd : tape.add(sq, dd);
            }
            const int dim = tape.value(xs[0]).size();
            v.id = tape.scale(tape.sum(sq),
                              1.0 / (static_cast<double>(xs.size()) * dim));
          }
        } else if (op == "mapped_l2_norm") {
          v.is_list = true;
          for (int x : in(0).ids) v.ids.push_back(tape.l2_norm(x));
        } else if (op == "average_distance") {
          const auto& xs = in(0).ids;
          if (xs.empty()) {
            v.id = tape.constant(0.0);
          } else {
            int acc = -1;
            for (int x : xs) {
              const int d = tape.l2_distance(x, in(1).id);
              acc = acc < 0 ? d : tape.add(acc, d);
            }
            v.id = tape.scale(acc, 1.0 / static_cast<double>(xs.size()));
          }
        } else if (op == "minus") {
          v.is_list = true;
          for (int x : in(0).ids) v.ids.push_back(tape.sub(x, in(1).id));
        } else if (op == "weighted_normalized_sum") {
          const int num = tape.add(tape.mul(in(0).id, in(1).id),
                                   tape.mul(in(2).id, in(3).id));
          int den = tape.add(tape.abs_op(in(0).id), tape.abs_op(in(2).id));
          if (tape.value(den)[0] < 1e-8) den = tape.add_scalar(den, 1e-8);
          v.id = tape.div(num, den);
        } else if (op.rfind("const_", 0) == 0) {
          const OperationSignature* sig = find_operation(op, Vocab::Combiner);
          v.id = tape.constant(sig->const_value);
        } else {
          throw std::invalid_argument("runtime: unhandled op '" + op + "'");
        }
      }
      if (!finite_or_fail(v, n.id)) {
        res.ok = false;
        res.failed_node = n.id;
        return res;
      }
      vals[n.id] = std::move(v);
    }
    outputs[static_cast<size_t>(r)] = tape.value(vals.at(inst.graph.output_node).id)[0];
  }

  // one optimizer step on the rollout-mean of the summed losses
  if (!loss_terms.empty()) {
    int total = loss_terms[0];
    for (size_t i = 1; i < loss_terms.size(); ++i) total = tape.add(total, loss_terms[i]);
    total = tape.scale(total, 1.0 / static_cast<double>(rollouts));
    if (!tape.value(total).finite()) {
      res.ok = false;
      res.failed_node = "loss";
      return res;
    }
    tape.backward(total);
    for (auto& [wid, w] : inst.weights) {
      if (!inst.info.trainable_weights.at(wid)) continue;
      std::vector<Tensor> grads;
      grads.reserve(w.params.size());
      bool any = false;
      for (int id : param_ids.at(wid)) {
        grads.push_back(tape.grad(id));
        if (!grads.back().v.empty()) any = true;
      }
      if (!any) continue;
      adam_step(w.params, grads, inst.adam.at(wid));
      for (const auto& p : w.params)
        if (!p.finite()) {
          res.ok = false;
          res.failed_node = wid;
          return res;
        }
    }
  }

  // buffer, statistic and regressor updates happen after the batch
  for (auto& [id, xs] : pending.stat_inputs)
    for (double x : xs) inst.stats.at(id).update(x);
  for (auto& [id, ts] : pending.buffer_pushes)
    for (auto& t : ts) {
      auto& buf = inst.buffers.at(id);
      buf.push_back(std::move(t));
      while (static_cast<int>(buf.size()) > inst.cfg.buffer_capacity) buf.pop_front();
    }
  for (auto& [id, ts] : pending.knn_appends)
    for (auto& t : ts) {
      auto& store = inst.knn_stores.at(id);
      store.push_back(std::move(t));
      while (static_cast<int>(store.size()) > inst.cfg.knn_capacity) store.pop_front();
    }

  inst.step_count += 1;
  res.outputs = std::move(outputs);
  return res;
}

}  // namespace runtime_detail

// Forward + update for one time-step of experience, batched across rollouts
// but never across time. Returns the pre-update outputs.
inline StepResult step_batch(ProgramInstance& inst, const TransitionBatch& batch) {
  if (inst.graph.kind != ProgramKind::Intrinsic)
    throw std::invalid_argument("step_batch needs an intrinsic program");
  return runtime_detail::execute_step(
      inst, batch.rollout_count(), [&](const std::string& source, int r) -> Tensor {
        const Transition& t = batch.items[static_cast<size_t>(r)];
        if (source == "state") return t.state;
        if (source == "state_next") return t.state_next;
        return t.action;
      });
}

inline StepResult combiner_step_batch(ProgramInstance& inst,
                                      const std::vector<double>& intrinsic,
                                      const std::vector<double>& reward,
                                      double t_over_T) {
  if (inst.graph.kind != ProgramKind::Combiner)
    throw std::invalid_argument("combiner_step needs a combiner program");
  return runtime_detail::execute_step(
      inst, static_cast<int>(intrinsic.size()),
      [&](const std::string& source, int r) -> Tensor {
        if (source == "intrinsic") return Tensor::scalar(intrinsic[static_cast<size_t>(r)]);
        if (source == "reward") return Tensor::scalar(reward[static_cast<size_t>(r)]);
        return Tensor::scalar(t_over_T);
      });
}

inline double combiner_step(ProgramInstance& inst, double intrinsic, double reward,
                            double t_over_T) {
  StepResult r = combiner_step_batch(inst, {intrinsic}, {reward}, t_over_T);
  if (!r.ok) throw std::runtime_error("combiner evaluation failed at " + r.failed_node);
  return r.outputs[0];
}

}  // namespace curio
