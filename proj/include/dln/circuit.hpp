#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dln/data.hpp"

namespace dln {

enum class NodeKind : std::uint8_t { constant, threshold, gate };

/// One node of a discretized network. Nodes only reference earlier nodes.
struct CircuitNode {
  NodeKind kind = NodeKind::constant;
  bool value = false;        // constant
  std::size_t feature = 0;   // threshold: fires iff slope_sign * (x[feature] - bias) >= 0
  double bias = 0.0;
  int slope_sign = 1;
  int gate = 0;              // gate: gate(node a, node b)
  std::size_t a = 0;
  std::size_t b = 0;
  int layer = 0;             // 0 for thresholds/constants, 1.. for logic layers

  static CircuitNode constant(bool v, int layer = 0);
  static CircuitNode threshold(std::size_t feature, double bias, int slope_sign);
  static CircuitNode gate_of(int k, std::size_t a, std::size_t b, int layer);

  bool operator==(const CircuitNode&) const = default;
};

/// Retained SumLayer link. `index` is the position of the link in the trained
/// layer; links are kept and summed in ascending `index` order.
struct SumLink {
  std::size_t node = 0;
  double coefficient = 0.0;
  std::size_t index = 0;

  bool operator==(const SumLink&) const = default;
};

struct CircuitMetadata {
  std::vector<std::size_t> widths;
  std::uint64_t seed = 0;
  std::string config_digest;
  double tau_final = 1.0;

  bool operator==(const CircuitMetadata&) const = default;
};

struct HardCircuit {
  std::size_t n_features = 0;
  std::vector<CircuitNode> nodes;
  std::vector<SumLink> links;
  double target_mean = 0.0;
  double target_std = 1.0;
  CircuitMetadata meta;
  // Preprocessing schema, present when the circuit came from a trained model;
  // used to name features and to score raw CSV rows.
  std::optional<Schema> schema;

  /// Throws ShapeError unless nodes are topologically ordered and every
  /// reference is in range.
  void validate() const;
  std::string feature_name(std::size_t feature) const;
  std::size_t gate_count() const;
  std::size_t threshold_count() const;
};

/// Node values for one input row.
std::vector<std::uint8_t> evaluate_nodes(const HardCircuit& circuit,
                                         std::span<const double> features);
/// Prediction in standardized target units.
double evaluate_circuit(const HardCircuit& circuit, std::span<const double> features);
/// Prediction in original target units.
double predict(const HardCircuit& circuit, std::span<const double> features);
std::vector<double> predict_standardized(const HardCircuit& circuit, const Dataset& data);

}  // namespace dln
