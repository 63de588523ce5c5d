#include "dln/circuit.hpp"

#include <algorithm>

#include "dln/errors.hpp"
#include "dln/gates.hpp"

namespace dln {

CircuitNode CircuitNode::constant(bool v, int layer) {
  CircuitNode n;
  n.kind = NodeKind::constant;
  n.value = v;
  n.layer = layer;
  return n;
}

CircuitNode CircuitNode::threshold(std::size_t feature, double bias, int slope_sign) {
  CircuitNode n;
  n.kind = NodeKind::threshold;
  n.feature = feature;
  n.bias = bias;
  n.slope_sign = slope_sign >= 0 ? 1 : -1;
  return n;
}

CircuitNode CircuitNode::gate_of(int k, std::size_t a, std::size_t b, int layer) {
  CircuitNode n;
  n.kind = NodeKind::gate;
  n.gate = k;
  n.a = a;
  n.b = b;
  n.layer = layer;
  return n;
}

void HardCircuit::validate() const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.kind == NodeKind::threshold && n.feature >= n_features)
      throw ShapeError("threshold node " + std::to_string(i) + " reads a missing feature");
    if (n.kind == NodeKind::gate) {
      if (n.gate < 0 || n.gate >= kGateCount)
        throw ShapeError("gate node " + std::to_string(i) + " has an invalid gate");
      if (n.a >= i || n.b >= i)
        throw ShapeError("gate node " + std::to_string(i) + " is not topologically ordered");
    }
  }
  for (std::size_t j = 0; j < links.size(); ++j) {
    if (links[j].node >= nodes.size())
      throw ShapeError("sum link references a missing node");
    if (j > 0 && links[j].index <= links[j - 1].index)
      throw ShapeError("sum links are not in ascending order");
  }
}

std::string HardCircuit::feature_name(std::size_t feature) const {
  if (schema) {
    auto infos = schema->features();
    if (feature < infos.size())
      return infos[feature].name;
  }
  return "f" + std::to_string(feature);
}

std::size_t HardCircuit::gate_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const CircuitNode& n) { return n.kind == NodeKind::gate; }));
}

std::size_t HardCircuit::threshold_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const CircuitNode& n) {
    return n.kind == NodeKind::threshold;
  }));
}

std::vector<std::uint8_t> evaluate_nodes(const HardCircuit& circuit,
                                         std::span<const double> features) {
  if (features.size() != circuit.n_features)
    throw ShapeError("feature vector width mismatch");
  std::vector<std::uint8_t> v(circuit.nodes.size());
  for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
    const auto& n = circuit.nodes[i];
    switch (n.kind) {
      case NodeKind::constant:
        v[i] = n.value;
        break;
      case NodeKind::threshold:
        v[i] = static_cast<double>(n.slope_sign) * (features[n.feature] - n.bias) >= 0.0;
        break;
      case NodeKind::gate:
        v[i] = hard_gate_eval(n.gate, v[n.a] != 0, v[n.b] != 0);
        break;
    }
  }
  return v;
}

double evaluate_circuit(const HardCircuit& circuit, std::span<const double> features) {
  auto v = evaluate_nodes(circuit, features);
  double y = 0.0;
  for (const auto& link : circuit.links)
    y += link.coefficient * (v[link.node] ? 1.0 : 0.0);
  return y;
}

double predict(const HardCircuit& circuit, std::span<const double> features) {
  return circuit.target_mean + circuit.target_std * evaluate_circuit(circuit, features);
}

std::vector<double> predict_standardized(const HardCircuit& circuit, const Dataset& data) {
  std::vector<double> out(data.n_rows);
  for (std::size_t i = 0; i < data.n_rows; ++i)
    out[i] = evaluate_circuit(circuit, data.row(i));
  return out;
}

}  // namespace dln
