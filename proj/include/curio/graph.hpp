#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curio/types.hpp"

// Curiosity and combiner programs as typed DAGs: validation, the line-based
// text format, canonical structural keys and the operation budget.

namespace curio {

enum class ProgramKind { Intrinsic, Combiner };

inline std::string kind_name(ProgramKind k) {
  return k == ProgramKind::Intrinsic ? "intrinsic" : "combiner";
}

enum class NodeKind { Input, Weights, Apply, Op };

struct ProgramNode {
  std::string id;
  NodeKind kind = NodeKind::Op;
  std::string op;       // input source / weights role / registry op name
  std::string weight;   // apply nodes: id of the weights node
  std::vector<std::string> parents;

  bool operator==(const ProgramNode& o) const {
    return id == o.id && kind == o.kind && op == o.op && weight == o.weight &&
           parents == o.parents;
  }
};

struct ProgramGraph {
  ProgramKind kind = ProgramKind::Intrinsic;
  std::string name = "prog";
  std::vector<ProgramNode> nodes;
  std::string output_node;

  bool operator==(const ProgramGraph& o) const {
    return kind == o.kind && name == o.name && nodes == o.nodes &&
           output_node == o.output_node;
  }

  const ProgramNode* find(const std::string& id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
};

inline Vocab vocab_of(ProgramKind k) {
  return k == ProgramKind::Intrinsic ? Vocab::Curiosity : Vocab::Combiner;
}

inline SemanticType input_source_type(ProgramKind kind, const std::string& source) {
  if (kind == ProgramKind::Intrinsic) {
    if (source == "state" || source == "state_next") return t_state();
    if (source == "action") return t_action();
  } else {
    if (source == "intrinsic" || source == "reward" || source == "time") return t_real();
  }
  throw std::invalid_argument("unknown input source '" + source + "' for " +
                              kind_name(kind) + " programs");
}

inline bool valid_input_source(ProgramKind kind, const std::string& source) {
  if (kind == ProgramKind::Intrinsic)
    return source == "state" || source == "state_next" || source == "action";
  return source == "intrinsic" || source == "reward" || source == "time";
}

constexpr int kIntrinsicOpBudget = 7;
constexpr int kCombinerOpBudget = 5;

inline int default_budget(ProgramKind k) {
  return k == ProgramKind::Intrinsic ? kIntrinsicOpBudget : kCombinerOpBudget;
}

// Functional and update nodes count toward the budget; inputs and weight
// modules are free.
inline int countable_ops(const ProgramGraph& g) {
  int n = 0;
  for (const auto& node : g.nodes)
    if (node.kind == NodeKind::Apply || node.kind == NodeKind::Op) ++n;
  return n;
}

inline const OperationSignature* node_signature(const ProgramGraph& g,
                                                const ProgramNode& n) {
  if (n.kind == NodeKind::Apply) {
    const ProgramNode* w = g.find(n.weight);
    if (!w) return nullptr;
    return find_operation(w->op, vocab_of(g.kind));
  }
  if (n.kind == NodeKind::Op) return find_operation(n.op, vocab_of(g.kind));
  return nullptr;
}

// ---- validation ----

struct RuleCheck {
  bool ok = true;
  std::string detail;
};

struct ValidationReport {
  RuleCheck acyclic;       // parents declared earlier, references exist
  RuleCheck typing;        // arity, types, X binding, vocabulary membership
  RuleCheck output_scalar; // single output node of scalar type
  RuleCheck losses;        // loss nodes consume a value
  int countable = 0;
  int budget = 0;
  bool within_budget = true;
  bool input_independent = false;       // output unreachable from any input
  std::vector<std::string> dead_nodes;  // not feeding the output or any update
  std::map<std::string, SemanticType> node_types;
  std::map<std::string, Ty> x_bindings;
  std::map<std::string, bool> trainable_weights;

  bool valid() const {
    return acyclic.ok && typing.ok && output_scalar.ok && losses.ok;
  }
};

namespace graph_detail {

inline std::map<std::string, int> index_of(const ProgramGraph& g) {
  std::map<std::string, int> m;
  for (size_t i = 0; i < g.nodes.size(); ++i)
    m[g.nodes[i].id] = static_cast<int>(i);
  return m;
}

// upward reachability (node plus all ancestors), following value parents and
// the apply->weights edge
inline std::set<std::string> ancestors_of(const ProgramGraph& g,
                                          const std::vector<std::string>& roots) {
  std::set<std::string> seen;
  std::vector<std::string> stack = roots;
  while (!stack.empty()) {
    std::string id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    const ProgramNode* n = g.find(id);
    if (!n) continue;
    for (const auto& p : n->parents) stack.push_back(p);
    if (!n->weight.empty()) stack.push_back(n->weight);
  }
  return seen;
}

}  // namespace graph_detail

inline ValidationReport validate_program(const ProgramGraph& g,
                                         const EnvTypeBinding& binding,
                                         int budget = -1) {
  binding.check();
  ValidationReport r;
  r.budget = budget >= 0 ? budget : default_budget(g.kind);
  r.countable = countable_ops(g);
  r.within_budget = r.countable <= r.budget;

  // structural pass: unique ids, backward references only
  std::set<std::string> declared;
  for (const auto& n : g.nodes) {
    if (!declared.insert(n.id).second) {
      r.acyclic = {false, "duplicate node id '" + n.id + "'"};
      return r;
    }
  }
  declared.clear();
  for (const auto& n : g.nodes) {
    for (const auto& p : n.parents)
      if (!declared.count(p)) {
        r.acyclic = {false, "node '" + n.id + "' references '" + p +
                                "' before its declaration"};
        return r;
      }
    if (!n.weight.empty() && !declared.count(n.weight)) {
      r.acyclic = {false, "node '" + n.id + "' references weights '" + n.weight +
                              "' before their declaration"};
      return r;
    }
    declared.insert(n.id);
  }

  // typing pass
  const Vocab vocab = vocab_of(g.kind);
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Input) {
      if (!valid_input_source(g.kind, n.op)) {
        r.typing = {false, "input source '" + n.op + "' not available to " +
                               kind_name(g.kind) + " programs"};
        return r;
      }
      r.node_types[n.id] = input_source_type(g.kind, n.op);
      continue;
    }
    if (n.kind == NodeKind::Weights) {
      const OperationSignature* sig = find_operation(n.op, vocab);
      if (!sig || !sig->is_network) {
        r.typing = {false, "unknown weights role '" + n.op + "'"};
        return r;
      }
      continue;
    }
    const OperationSignature* sig = node_signature(g, n);
    if (!sig) {
      r.typing = {false, "unknown operation '" + n.op + "' in node '" + n.id + "'"};
      return r;
    }
    if (n.kind == NodeKind::Apply) {
      const ProgramNode* w = g.find(n.weight);
      if (!w || w->kind != NodeKind::Weights) {
        r.typing = {false, "node '" + n.id + "' applies non-weights node '" +
                               n.weight + "'"};
        return r;
      }
    } else if (sig->is_network) {
      r.typing = {false, "network op '" + n.op + "' must be used via nn_apply"};
      return r;
    }
    std::vector<SemanticType> actual;
    for (const auto& p : n.parents) {
      auto it = r.node_types.find(p);
      if (it == r.node_types.end()) {
        r.typing = {false, "node '" + n.id + "' consumes '" + p +
                               "', which produces no value"};
        return r;
      }
      actual.push_back(it->second);
    }
    TypeCheckResult tc = check_types(actual, *sig);
    if (!tc.ok) {
      r.typing = {false, "node '" + n.id + "': " + tc.diagnostic};
      return r;
    }
    if (tc.x_binding) r.x_bindings[n.id] = *tc.x_binding;
    if (sig->output) r.node_types[n.id] = tc.output;
  }

  // output rule
  const ProgramNode* out = g.find(g.output_node);
  if (!out) {
    r.output_scalar = {false, "output node '" + g.output_node + "' not found"};
  } else {
    auto it = r.node_types.find(g.output_node);
    if (it == r.node_types.end() || !is_scalar_type(it->second))
      r.output_scalar = {false, "output node '" + g.output_node +
                                    "' is not a scalar real"};
  }

  // losses must consume a value (arity is covered by typing; this rejects
  // minimize nodes whose parent list is empty in hand-built graphs)
  for (const auto& n : g.nodes)
    if (n.op == "minimize" && n.parents.empty())
      r.losses = {false, "minimize node '" + n.id + "' consumes nothing"};

  // reachability flags
  if (out) {
    auto up = graph_detail::ancestors_of(g, {g.output_node});
    bool any_input = false;
    for (const auto& n : g.nodes)
      if (n.kind == NodeKind::Input && up.count(n.id)) any_input = true;
    r.input_independent = !any_input;
  }
  {
    std::vector<std::string> roots;
    if (out) roots.push_back(g.output_node);
    for (const auto& n : g.nodes) {
      const OperationSignature* sig = node_signature(g, n);
      if (sig && sig->is_update_module) roots.push_back(n.id);
    }
    auto live = graph_detail::ancestors_of(g, roots);
    for (const auto& n : g.nodes) {
      if (n.kind == NodeKind::Input) continue;
      if (!live.count(n.id)) r.dead_nodes.push_back(n.id);
    }
  }

  // derived trainability: a weight module is trainable iff some loss node is
  // reachable from one of its applies through differentiable edges
  {
    std::map<std::string, std::vector<std::pair<int, int>>> consumers;  // id -> (node idx, slot)
    for (size_t i = 0; i < g.nodes.size(); ++i)
      for (size_t s = 0; s < g.nodes[i].parents.size(); ++s)
        consumers[g.nodes[i].parents[s]].push_back(
            {static_cast<int>(i), static_cast<int>(s)});

    auto reaches_loss = [&](const std::string& start) {
      std::set<std::string> seen;
      std::vector<std::string> stack = {start};
      while (!stack.empty()) {
        std::string id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second) continue;
        const ProgramNode* n = g.find(id);
        if (n && n->op == "minimize") return true;
        for (auto [ci, slot] : consumers[id]) {
          const ProgramNode& c = g.nodes[static_cast<size_t>(ci)];
          const OperationSignature* sig = node_signature(g, c);
          if (!sig) continue;
          if (slot < static_cast<int>(sig->diff_through.size()) &&
              sig->diff_through[static_cast<size_t>(slot)])
            stack.push_back(c.id);
        }
      }
      return false;
    };

    for (const auto& n : g.nodes) {
      if (n.kind != NodeKind::Weights) continue;
      bool trainable = false;
      for (const auto& a : g.nodes) {
        if (a.kind != NodeKind::Apply || a.weight != n.id) continue;
        const OperationSignature* sig = node_signature(g, a);
        if (sig && sig->detach_output) continue;  // detached applies train nothing
        if (reaches_loss(a.id)) {
          trainable = true;
          break;
        }
      }
      r.trainable_weights[n.id] = trainable;
    }
  }

  return r;
}

// true iff no input module reaches the output node or any loss node; such
// programs are reserved as explicit baselines, never searched
inline bool prune_input_independent(const ProgramGraph& g) {
  std::vector<std::string> roots = {g.output_node};
  for (const auto& n : g.nodes)
    if (n.op == "minimize") roots.push_back(n.id);
  auto up = graph_detail::ancestors_of(g, roots);
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Input && up.count(n.id)) return false;
  return true;
}

// ---- text format ----
//   program <kind> <name>
//   node <id> = input <source> | weights <role> | nn_apply <w> <arg>*
//              | <op> <arg>*
//   output <id>

inline std::string serialize(const ProgramGraph& g) {
  std::ostringstream os;
  os << "program " << kind_name(g.kind) << " " << g.name << "\n";
  for (const auto& n : g.nodes) {
    os << "node " << n.id << " = ";
    switch (n.kind) {
      case NodeKind::Input: os << "input " << n.op; break;
      case NodeKind::Weights: os << "weights " << n.op; break;
      case NodeKind::Apply:
        os << "nn_apply " << n.weight;
        for (const auto& p : n.parents) os << " " << p;
        break;
      case NodeKind::Op:
        os << n.op;
        for (const auto& p : n.parents) os << " " << p;
        break;
    }
    os << "\n";
  }
  os << "output " << g.output_node << "\n";
  return os.str();
}

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(int line_, int col_, const std::string& msg)
      : std::runtime_error("parse error at line " + std::to_string(line_) + ", col " +
                           std::to_string(col_) + ": " + msg),
        line(line_),
        col(col_) {}
};

inline ProgramGraph deserialize(const std::string& text) {
  ProgramGraph g;
  bool saw_program = false, saw_output = false;
  std::set<std::string> declared;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    // tokens with their column positions
    std::vector<std::pair<std::string, int>> toks;
    for (size_t i = 0; i < raw.size();) {
      if (std::isspace(static_cast<unsigned char>(raw[i]))) {
        ++i;
        continue;
      }
      if (raw[i] == '#') break;
      size_t j = i;
      while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
      toks.push_back({raw.substr(i, j - i), static_cast<int>(i + 1)});
      i = j;
    }
    if (toks.empty()) continue;
    const std::string& head = toks[0].first;
    if (head == "program") {
      if (toks.size() != 3)
        throw ParseError(line_no, toks[0].second, "expected 'program <kind> <name>'");
      if (toks[1].first == "intrinsic") g.kind = ProgramKind::Intrinsic;
      else if (toks[1].first == "combiner") g.kind = ProgramKind::Combiner;
      else throw ParseError(line_no, toks[1].second,
                            "unknown program kind '" + toks[1].first + "'");
      g.name = toks[2].first;
      saw_program = true;
    } else if (head == "node") {
      if (!saw_program) throw ParseError(line_no, toks[0].second, "missing program header");
      if (toks.size() < 4 || toks[2].first != "=")
        throw ParseError(line_no, toks[0].second, "expected 'node <id> = <op> <arg>*'");
      ProgramNode n;
      n.id = toks[1].first;
      if (declared.count(n.id))
        throw ParseError(line_no, toks[1].second, "duplicate node id '" + n.id + "'");
      const std::string& op = toks[3].first;
      auto arg = [&](size_t k) -> const std::pair<std::string, int>& { return toks[3 + k]; };
      const size_t nargs = toks.size() - 4;
      if (op == "input") {
        if (nargs != 1) throw ParseError(line_no, toks[3].second, "input takes one source");
        n.kind = NodeKind::Input;
        n.op = arg(1).first;
        if (!valid_input_source(g.kind, n.op))
          throw ParseError(line_no, arg(1).second, "unknown input source '" + n.op + "'");
      } else if (op == "weights") {
        if (nargs != 1) throw ParseError(line_no, toks[3].second, "weights takes one role");
        n.kind = NodeKind::Weights;
        n.op = arg(1).first;
        const OperationSignature* sig = find_operation(n.op, vocab_of(g.kind));
        if (!sig || !sig->is_network)
          throw ParseError(line_no, arg(1).second, "unknown weights role '" + n.op + "'");
      } else if (op == "nn_apply") {
        if (nargs < 2) throw ParseError(line_no, toks[3].second,
                                        "nn_apply takes a weights node and arguments");
        n.kind = NodeKind::Apply;
        n.op = "nn_apply";
        n.weight = arg(1).first;
        if (!declared.count(n.weight))
          throw ParseError(line_no, arg(1).second,
                           "reference to undeclared node '" + n.weight + "'");
        for (size_t k = 2; k <= nargs; ++k) {
          if (!declared.count(arg(k).first))
            throw ParseError(line_no, arg(k).second,
                             "reference to undeclared node '" + arg(k).first + "'");
          n.parents.push_back(arg(k).first);
        }
      } else {
        const OperationSignature* sig = find_operation(op, vocab_of(g.kind));
        if (!sig)
          throw ParseError(line_no, toks[3].second, "unknown op '" + op + "'");
        if (sig->is_network)
          throw ParseError(line_no, toks[3].second,
                           "network op '" + op + "' must be used via nn_apply");
        n.kind = NodeKind::Op;
        n.op = op;
        for (size_t k = 1; k <= nargs; ++k) {
          if (!declared.count(arg(k).first))
            throw ParseError(line_no, arg(k).second,
                             "reference to undeclared node '" + arg(k).first + "'");
          n.parents.push_back(arg(k).first);
        }
      }
      declared.insert(n.id);
      g.nodes.push_back(std::move(n));
    } else if (head == "output") {
      if (toks.size() != 2)
        throw ParseError(line_no, toks[0].second, "expected 'output <id>'");
      if (!declared.count(toks[1].first))
        throw ParseError(line_no, toks[1].second,
                         "reference to undeclared node '" + toks[1].first + "'");
      g.output_node = toks[1].first;
      saw_output = true;
    } else {
      throw ParseError(line_no, toks[0].second, "unknown directive '" + head + "'");
    }
  }
  if (!saw_program) throw ParseError(1, 1, "missing program header");
  if (!saw_output) throw ParseError(line_no + 1, 1, "missing output directive");
  return g;
}

// ---- canonical keys ----

struct ProgramKey {
  std::string canonical;
  uint64_t hash64 = 0;

  bool operator<(const ProgramKey& o) const { return canonical < o.canonical; }
  bool operator==(const ProgramKey& o) const { return canonical == o.canonical; }
};

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace graph_detail {

inline bool commutative_op(const std::string& op) {
  return op == "add" || op == "add_vec" || op == "dot_product" ||
         op == "l2_distance" || op == "max" || op == "min" || op == "multiply";
}

struct Canonicalizer {
  const ProgramGraph& g;
  std::map<std::string, int> idx;
  std::map<std::string, std::string> tree;  // node id -> expanded tree form

  explicit Canonicalizer(const ProgramGraph& graph) : g(graph) {
    idx = index_of(g);
    for (const auto& n : g.nodes) tree[n.id] = tree_form(n);
  }

  std::string node_token(const ProgramNode& n) const {
    switch (n.kind) {
      case NodeKind::Input: return "in:" + n.op;
      case NodeKind::Weights: return "w:" + n.op;
      case NodeKind::Apply: {
        const ProgramNode* w = g.find(n.weight);
        return "ap:" + (w ? w->op : std::string("?"));
      }
      case NodeKind::Op: return "op:" + n.op;
    }
    return "?";
  }

  std::string tree_form(const ProgramNode& n) {
    auto it = tree.find(n.id);
    if (it != tree.end()) return it->second;
    std::vector<std::string> kids;
    for (const auto& p : n.parents) kids.push_back(tree_form(*g.find(p)));
    if (commutative_op(n.op) && kids.size() == 2 && kids[1] < kids[0])
      std::swap(kids[0], kids[1]);
    if (n.op == "weighted_normalized_sum" && kids.size() == 4) {
      // (a,b) and (c,d) pairs are interchangeable
      if (std::make_pair(kids[2], kids[3]) < std::make_pair(kids[0], kids[1])) {
        std::swap(kids[0], kids[2]);
        std::swap(kids[1], kids[3]);
      }
    }
    std::string s = node_token(n) + "(";
    for (size_t i = 0; i < kids.size(); ++i) {
      if (i) s += ",";
      s += kids[i];
    }
    s += ")";
    tree[n.id] = s;
    return s;
  }

  // live = ancestors of the output and of every update module
  std::set<std::string> live_set() const {
    std::vector<std::string> roots;
    if (g.find(g.output_node)) roots.push_back(g.output_node);
    for (const auto& n : g.nodes) {
      const OperationSignature* sig = node_signature(g, n);
      if (sig && sig->is_update_module) roots.push_back(n.id);
    }
    return ancestors_of(g, roots);
  }

  struct Emission {
    std::string text;
    int bits_used = 0;
  };

  // one serialization attempt under a fixed tie-break assignment; choice
  // bits flip the order of tied commutative pairs
  Emission emit(const std::vector<std::string>& roots, uint64_t choices) {
    std::map<std::string, int> number;
    std::map<std::string, int> weight_number;
    std::vector<std::string> lines;
    int bit = 0;

    std::function<int(const std::string&)> visit = [&](const std::string& id) -> int {
      auto it = number.find(id);
      if (it != number.end()) return it->second;
      const ProgramNode& n = *g.find(id);
      std::vector<std::string> kids(n.parents.begin(), n.parents.end());
      if (commutative_op(n.op) && kids.size() == 2) {
        const std::string& ta = tree.at(kids[0]);
        const std::string& tb = tree.at(kids[1]);
        bool swap_kids = tb < ta;
        if (ta == tb && kids[0] != kids[1]) {
          swap_kids = (choices >> bit) & 1u;
          ++bit;
        }
        if (swap_kids) std::swap(kids[0], kids[1]);
      }
      if (n.op == "weighted_normalized_sum" && kids.size() == 4) {
        auto pa = std::make_pair(tree.at(kids[0]), tree.at(kids[1]));
        auto pb = std::make_pair(tree.at(kids[2]), tree.at(kids[3]));
        bool swap_pairs = pb < pa;
        if (pa == pb && (kids[0] != kids[2] || kids[1] != kids[3])) {
          swap_pairs = (choices >> bit) & 1u;
          ++bit;
        }
        if (swap_pairs) {
          std::swap(kids[0], kids[2]);
          std::swap(kids[1], kids[3]);
        }
      }
      std::vector<int> kid_nums;
      for (const auto& k : kids) kid_nums.push_back(visit(k));
      int wn = -1;
      if (n.kind == NodeKind::Apply) {
        auto wit = weight_number.find(n.weight);
        if (wit == weight_number.end())
          wit = weight_number.insert({n.weight, static_cast<int>(weight_number.size())}).first;
        wn = wit->second;
      }
      const int my = static_cast<int>(lines.size());
      number[id] = my;
      std::string line = node_token(n);
      if (wn >= 0) line += "#" + std::to_string(wn);
      line += "(";
      for (size_t i = 0; i < kid_nums.size(); ++i) {
        if (i) line += ",";
        line += std::to_string(kid_nums[i]);
      }
      line += ")";
      lines.push_back(line);
      return my;
    };

    std::vector<int> root_nums;
    for (const auto& rid : roots) root_nums.push_back(visit(rid));
    std::string out = kind_name(g.kind) + "|";
    for (size_t i = 0; i < lines.size(); ++i) out += std::to_string(i) + "=" + lines[i] + ";";
    out += "out=" + std::to_string(root_nums.empty() ? -1 : root_nums[0]);
    return {out, bit};
  }

  std::string canonical() {
    auto live = live_set();
    // ordered roots: output first, then update modules sorted by tree form
    std::vector<std::string> updates;
    for (const auto& n : g.nodes) {
      const OperationSignature* sig = node_signature(g, n);
      if (sig && sig->is_update_module && live.count(n.id)) updates.push_back(n.id);
    }
    std::stable_sort(updates.begin(), updates.end(),
                     [&](const std::string& a, const std::string& b) {
                       return tree.at(a) < tree.at(b);
                     });

    // tied roots (same tree form) can be permuted; tied commutative children
    // flip via choice bits. Both spaces are tiny at an op budget of 7.
    std::vector<std::vector<std::string>> root_orders;
    {
      std::vector<std::vector<std::string>> groups;
      for (const auto& u : updates) {
        if (!groups.empty() && tree.at(groups.back().front()) == tree.at(u) &&
            groups.back().front() != u)
          groups.back().push_back(u);
        else
          groups.push_back({u});
      }
      root_orders.push_back({});
      for (auto& grp : groups) {
        std::sort(grp.begin(), grp.end());
        std::vector<std::vector<std::string>> next;
        do {
          for (const auto& prefix : root_orders) {
            auto ext = prefix;
            ext.insert(ext.end(), grp.begin(), grp.end());
            next.push_back(ext);
            if (next.size() > 64) break;
          }
          if (next.size() > 64) break;
        } while (std::next_permutation(grp.begin(), grp.end()));
        root_orders = std::move(next);
      }
    }

    std::string best;
    for (const auto& order : root_orders) {
      std::vector<std::string> roots;
      if (g.find(g.output_node)) roots.push_back(g.output_node);
      roots.insert(roots.end(), order.begin(), order.end());
      Emission first = emit(roots, 0);
      if (best.empty() || first.text < best) best = first.text;
      int bits = std::min(first.bits_used, 10);
      for (uint64_t choices = 1; choices < (1ull << bits); ++choices) {
        Emission e = emit(roots, choices);
        if (e.text < best) best = e.text;
        bits = std::min(std::max(bits, e.bits_used), 10);
      }
    }
    return best;
  }
};

}  // namespace graph_detail

// Invariant under node renaming, declaration reordering, and swapping the
// inputs of commutative operations.
inline ProgramKey canonical_key(const ProgramGraph& g) {
  graph_detail::Canonicalizer c(g);
  ProgramKey k;
  k.canonical = c.canonical();
  k.hash64 = fnv1a(k.canonical);
  return k;
}

}  // namespace curio
