#include "dln/compiler.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "dln/errors.hpp"
#include "dln/gates.hpp"

namespace dln {

namespace {

constexpr int kNotGate = 12;  // ¬a, stored with a == b

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Fixed output of a threshold on inputs restricted to [0,1], if any.
std::optional<bool> fixed_threshold(double bias, int slope_sign) {
  if (slope_sign > 0) {
    if (bias <= 0.0)
      return true;
    if (bias > 1.0)
      return false;
  } else {
    if (bias >= 1.0)
      return true;
    if (bias < 0.0)
      return false;
  }
  return std::nullopt;
}

class Builder {
 public:
  std::vector<CircuitNode> nodes;

  std::size_t constant(bool v) {
    auto& slot = v ? one_ : zero_;
    if (!slot) {
      slot = nodes.size();
      nodes.push_back(CircuitNode::constant(v));
    }
    return *slot;
  }

  std::size_t threshold(const CircuitNode& n) {
    if (auto fixed = fixed_threshold(n.bias, n.slope_sign))
      return constant(*fixed);
    auto key = std::make_tuple(n.feature, n.bias, n.slope_sign);
    auto it = thresholds_.find(key);
    if (it != thresholds_.end())
      return it->second;
    thresholds_.emplace(key, nodes.size());
    nodes.push_back(n);
    return nodes.size() - 1;
  }

  std::size_t gate(int k, std::size_t a, std::size_t b, int layer) {
    auto ca = const_value(a), cb = const_value(b);
    if (ca && cb)
      return constant(hard_gate_eval(k, *ca, *cb));
    if (ca)
      return unary(hard_gate_eval(k, *ca, false), hard_gate_eval(k, *ca, true), b, layer);
    if (cb)
      return unary(hard_gate_eval(k, false, *cb), hard_gate_eval(k, true, *cb), a, layer);
    if (a == b)
      return unary(hard_gate_eval(k, false, false), hard_gate_eval(k, true, true), a, layer);
    if (!gate_depends_on_b(k))
      return unary(hard_gate_eval(k, false, false), hard_gate_eval(k, true, false), a, layer);
    if (!gate_depends_on_a(k))
      return unary(hard_gate_eval(k, false, false), hard_gate_eval(k, false, true), b, layer);
    if (a > b) {
      k = gate_swap_operands(k);
      std::swap(a, b);
    }
    return intern(k, a, b, layer);
  }

  bool is_constant(std::size_t id, bool v) const {
    auto c = const_value(id);
    return c && *c == v;
  }

 private:
  std::optional<std::size_t> zero_, one_;
  std::map<std::tuple<std::size_t, double, int>, std::size_t> thresholds_;
  std::map<std::tuple<int, std::size_t, std::size_t>, std::size_t> gates_;

  std::optional<bool> const_value(std::size_t id) const {
    if (nodes[id].kind == NodeKind::constant)
      return nodes[id].value;
    return std::nullopt;
  }

  // Function of one input given by its values at 0 and 1.
  std::size_t unary(bool at0, bool at1, std::size_t x, int layer) {
    if (at0 == at1)
      return constant(at0);
    if (at1)
      return x;
    const auto& n = nodes[x];
    if (n.kind == NodeKind::gate && n.gate == kNotGate && n.a == n.b)
      return n.a;
    return intern(kNotGate, x, x, layer);
  }

  std::size_t intern(int k, std::size_t a, std::size_t b, int layer) {
    auto key = std::make_tuple(k, a, b);
    auto it = gates_.find(key);
    if (it != gates_.end())
      return it->second;
    gates_.emplace(key, nodes.size());
    nodes.push_back(CircuitNode::gate_of(k, a, b, layer));
    return nodes.size() - 1;
  }
};

// Drops nodes unreachable from the sum links and renumbers the rest in order.
HardCircuit remove_dead(const HardCircuit& c) {
  std::vector<bool> live(c.nodes.size(), false);
  for (const auto& link : c.links)
    live[link.node] = true;
  for (std::size_t i = c.nodes.size(); i-- > 0;) {
    if (!live[i] || c.nodes[i].kind != NodeKind::gate)
      continue;
    live[c.nodes[i].a] = true;
    live[c.nodes[i].b] = true;
  }
  HardCircuit out = c;
  out.nodes.clear();
  std::vector<std::size_t> remap(c.nodes.size(), 0);
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    if (!live[i])
      continue;
    CircuitNode n = c.nodes[i];
    if (n.kind == NodeKind::gate) {
      n.a = remap[n.a];
      n.b = remap[n.b];
    }
    remap[i] = out.nodes.size();
    out.nodes.push_back(n);
  }
  for (auto& link : out.links)
    link.node = remap[link.node];
  return out;
}

HardCircuit simplify_once(const HardCircuit& c) {
  Builder builder;
  std::vector<std::size_t> ref(c.nodes.size());
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const auto& n = c.nodes[i];
    switch (n.kind) {
      case NodeKind::constant:
        ref[i] = builder.constant(n.value);
        break;
      case NodeKind::threshold:
        ref[i] = builder.threshold(n);
        break;
      case NodeKind::gate:
        ref[i] = builder.gate(n.gate, ref[n.a], ref[n.b], n.layer);
        break;
    }
  }
  HardCircuit out = c;
  out.links.clear();
  for (const auto& link : c.links) {
    // A link to constant 0 adds an exact zero; dropping it keeps the sum.
    if (builder.is_constant(ref[link.node], false))
      continue;
    out.links.push_back({ref[link.node], link.coefficient, link.index});
  }
  out.nodes = std::move(builder.nodes);
  return remove_dead(out);
}

bool same_structure(const HardCircuit& x, const HardCircuit& y) {
  return x.nodes == y.nodes && x.links == y.links;
}

}  // namespace

HardCircuit fold_constant_thresholds(HardCircuit circuit) {
  for (auto& n : circuit.nodes) {
    if (n.kind != NodeKind::threshold)
      continue;
    if (auto fixed = fixed_threshold(n.bias, n.slope_sign))
      n = CircuitNode::constant(*fixed, n.layer);
  }
  return circuit;
}

HardCircuit discretize(const NetworkParams& params, double tau_final) {
  params.validate();
  HardCircuit c;
  c.n_features = params.n_features;
  c.meta.widths = params.widths();
  c.meta.tau_final = tau_final;

  const auto& thr = params.threshold;
  std::vector<std::size_t> thr_nodes(thr.size());
  for (std::size_t t = 0; t < thr.size(); ++t) {
    thr_nodes[t] = c.nodes.size();
    if (thr.slope[t] == 0.0)
      c.nodes.push_back(CircuitNode::constant(true));
    else
      c.nodes.push_back(
          CircuitNode::threshold(thr.source_feature[t], thr.bias[t], thr.slope[t] > 0.0 ? 1 : -1));
  }

  std::vector<std::size_t> inputs = thr_nodes;
  for (std::size_t l = 0; l < params.logic.size(); ++l) {
    const auto& layer = params.logic[l];
    if (l > 0 && params.concat_inputs)
      inputs.insert(inputs.end(), thr_nodes.begin(), thr_nodes.end());
    std::vector<std::size_t> outputs(layer.out_dim);
    for (std::size_t i = 0; i < layer.out_dim; ++i) {
      outputs[i] = c.nodes.size();
      c.nodes.push_back(CircuitNode::gate_of(layer.selected_gate(i), inputs[layer.selected_link_a(i)],
                                             inputs[layer.selected_link_b(i)],
                                             static_cast<int>(l) + 1));
    }
    inputs = std::move(outputs);
  }

  for (std::size_t j = 0; j < params.sum.size(); ++j)
    if (sum_link_retained(params.sum, j, tau_final))
      c.links.push_back({inputs[j], params.sum.coefficients[j], j});

  c = fold_constant_thresholds(std::move(c));
  c.validate();
  return c;
}

HardCircuit simplify(const HardCircuit& circuit) {
  circuit.validate();
  HardCircuit current = simplify_once(circuit);
  for (int round = 0; round < 64; ++round) {
    HardCircuit next = simplify_once(current);
    if (same_structure(next, current))
      break;
    current = std::move(next);
  }
  current.validate();
  return current;
}

HardCircuit compile_model(const Model& model, bool simplified) {
  HardCircuit c = discretize(model.params, model.tau_final);
  if (model.schema.has_target()) {
    c.target_mean = model.schema.target().target_mean;
    c.target_std = model.schema.target().target_std;
  }
  c.schema = model.schema;
  c.meta.seed = model.config.seed;
  c.meta.config_digest = model.config.digest();
  return simplified ? simplify(c) : c;
}

// ----------------------------------------------------------------------------
// Rules

namespace {

class RuleBuilder {
 public:
  explicit RuleBuilder(RuleSet& rs) : rs_(rs) {}

  std::size_t constant(bool v) { return push({ExprOp::constant, v, 0, 0, 0}); }
  std::size_t atom(std::size_t a) { return push({ExprOp::atom, false, a, 0, 0}); }
  std::size_t op_not(std::size_t x) {
    if (rs_.exprs[x].op == ExprOp::op_not)
      return rs_.exprs[x].lhs;
    return push({ExprOp::op_not, false, 0, x, x});
  }
  std::size_t binary(ExprOp op, std::size_t x, std::size_t y) { return push({op, false, 0, x, y}); }

  // Gate k over operand expressions, written with AND/OR/XOR/NOT.
  std::size_t gate(int k, std::size_t a, std::size_t b) {
    switch (k) {
      case 0: return constant(false);
      case 1: return binary(ExprOp::op_and, a, b);
      case 2: return binary(ExprOp::op_and, a, op_not(b));
      case 3: return a;
      case 4: return binary(ExprOp::op_and, op_not(a), b);
      case 5: return b;
      case 6: return binary(ExprOp::op_xor, a, b);
      case 7: return binary(ExprOp::op_or, a, b);
      case 8: return op_not(binary(ExprOp::op_or, a, b));
      case 9: return op_not(binary(ExprOp::op_xor, a, b));
      case 10: return op_not(b);
      case 11: return binary(ExprOp::op_or, a, op_not(b));
      case 12: return op_not(a);
      case 13: return binary(ExprOp::op_or, op_not(a), b);
      case 14: return op_not(binary(ExprOp::op_and, a, b));
      case 15: return constant(true);
      default: throw std::out_of_range("gate index");
    }
  }

 private:
  RuleSet& rs_;
  std::size_t push(Expr e) {
    rs_.exprs.push_back(e);
    return rs_.exprs.size() - 1;
  }
};

std::string atom_label(const HardCircuit& c, const CircuitNode& n) {
  const std::string name = c.feature_name(n.feature);
  if (c.schema) {
    auto infos = c.schema->features();
    if (n.feature < infos.size() && infos[n.feature].category) {
      // One-hot input: the node tests the indicator itself or its negation.
      return n.slope_sign > 0 ? name : "NOT " + name;
    }
    const double cut = c.schema->raw_cut(n.feature, n.bias);
    return name + (n.slope_sign > 0 ? " ≥ " : " ≤ ") + format_number(cut);
  }
  return name + (n.slope_sign > 0 ? " ≥ " : " ≤ ") + format_number(n.bias);
}

}  // namespace

RuleSet extract_rules(const HardCircuit& circuit) {
  circuit.validate();
  RuleSet rs;
  rs.intercept = circuit.target_mean;
  rs.target_std = circuit.target_std;
  rs.n_features = circuit.n_features;
  RuleBuilder b(rs);
  std::vector<std::size_t> expr_of(circuit.nodes.size());
  for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
    const auto& n = circuit.nodes[i];
    switch (n.kind) {
      case NodeKind::constant:
        expr_of[i] = b.constant(n.value);
        break;
      case NodeKind::threshold:
        rs.atoms.push_back({n.feature, n.bias, n.slope_sign});
        rs.atom_text.push_back(atom_label(circuit, n));
        expr_of[i] = b.atom(rs.atoms.size() - 1);
        break;
      case NodeKind::gate:
        expr_of[i] = b.gate(n.gate, expr_of[n.a], expr_of[n.b]);
        break;
    }
  }
  for (const auto& link : circuit.links)
    rs.rules.push_back(
        {expr_of[link.node], link.coefficient, link.coefficient * circuit.target_std, link.index});
  return rs;
}

bool RuleSet::eval_expr(std::size_t e, std::span<const double> features) const {
  const Expr& x = exprs.at(e);
  switch (x.op) {
    case ExprOp::constant:
      return x.value;
    case ExprOp::atom: {
      const Atom& a = atoms.at(x.atom);
      return static_cast<double>(a.slope_sign) * (features[a.feature] - a.bias) >= 0.0;
    }
    case ExprOp::op_not:
      return !eval_expr(x.lhs, features);
    case ExprOp::op_and:
      return eval_expr(x.lhs, features) && eval_expr(x.rhs, features);
    case ExprOp::op_or:
      return eval_expr(x.lhs, features) || eval_expr(x.rhs, features);
    case ExprOp::op_xor:
      return eval_expr(x.lhs, features) != eval_expr(x.rhs, features);
  }
  return false;
}

double RuleSet::evaluate(std::span<const double> features) const {
  if (features.size() != n_features)
    throw ShapeError("feature vector width mismatch");
  double y = 0.0;
  for (const auto& r : rules)
    y += r.coefficient * (eval_expr(r.root, features) ? 1.0 : 0.0);
  return intercept + target_std * y;
}

std::string RuleSet::expr_text(std::size_t e) const {
  const Expr& x = exprs.at(e);
  switch (x.op) {
    case ExprOp::constant:
      return x.value ? "TRUE" : "FALSE";
    case ExprOp::atom:
      return "(" + atom_text.at(x.atom) + ")";
    case ExprOp::op_not:
      return "NOT " + expr_text(x.lhs);
    case ExprOp::op_and:
      return "(" + expr_text(x.lhs) + " AND " + expr_text(x.rhs) + ")";
    case ExprOp::op_or:
      return "(" + expr_text(x.lhs) + " OR " + expr_text(x.rhs) + ")";
    case ExprOp::op_xor:
      return "(" + expr_text(x.lhs) + " XOR " + expr_text(x.rhs) + ")";
  }
  return {};
}

std::string RuleSet::text() const {
  std::ostringstream out;
  out << "intercept : " << format_number(intercept) << '\n';
  for (const auto& r : rules)
    out << expr_text(r.root) << " : weight " << format_number(r.weight) << '\n';
  return out.str();
}

// ----------------------------------------------------------------------------
// DOT

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\')
      out += '\\';
    out += ch;
  }
  return out;
}

}  // namespace

std::string export_dot(const HardCircuit& circuit) {
  std::ostringstream out;
  out << "digraph circuit {\n  rankdir=LR;\n";
  out << "  out [shape=doublecircle, label=\"Σ\"];\n";
  for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
    const auto& n = circuit.nodes[i];
    out << "  n" << i << " [";
    switch (n.kind) {
      case NodeKind::constant:
        out << "shape=plaintext, label=\"" << (n.value ? "TRUE" : "FALSE") << "\"";
        break;
      case NodeKind::threshold:
        out << "shape=box, style=filled, fillcolor=yellow, label=\"" << dot_escape(atom_label(circuit, n))
            << "\"";
        break;
      case NodeKind::gate:
        out << "shape=diamond, label=\"" << gate_name(n.gate) << "\"";
        break;
    }
    out << "];\n";
  }
  for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
    const auto& n = circuit.nodes[i];
    if (n.kind != NodeKind::gate)
      continue;
    out << "  n" << n.a << " -> n" << i << ";\n";
    if (n.b != n.a)
      out << "  n" << n.b << " -> n" << i << ";\n";
  }
  for (const auto& link : circuit.links)
    out << "  n" << link.node << " -> out [label=\"" << format_number(link.coefficient * circuit.target_std)
        << "\"];\n";
  out << "}\n";
  return out.str();
}

}  // namespace dln
