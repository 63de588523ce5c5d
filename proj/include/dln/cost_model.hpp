#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dln/circuit.hpp"

namespace dln {

/// Component inventory of a gate-level datapath.
struct Datapath {
  std::int64_t and_gates = 0;
  std::int64_t or_gates = 0;
  std::int64_t xor_gates = 0;
  std::int64_t not_gates = 0;
  std::int64_t half_adders = 0;  // XOR + AND
  std::int64_t full_adders = 0;  // 2 XOR + 2 AND + OR
  std::int64_t muxes = 0;        // 2:1, two AND + OR + NOT
};

/// Significand array multiplier built from rows of ripple adders:
/// n*(n-2) full adders, n half adders and n*n partial-product ANDs.
Datapath array_multiplier(int bits);
/// Half-precision datapaths (1 sign, 5 exponent, 10 fraction bits) without
/// special-value handling; round-to-nearest by increment.
Datapath fp16_adder();
Datapath fp16_multiplier();
Datapath fp16_comparator();

struct CostTable {
  std::int64_t and_op = 1;
  std::int64_t or_op = 1;
  std::int64_t nand_op = 1;
  std::int64_t nor_op = 1;
  std::int64_t xor_op = 3;
  std::int64_t xnor_op = 3;
  std::int64_t not_op = 0;
  std::int64_t fp16_add = 0;
  std::int64_t fp16_mul = 0;
  std::int64_t fp16_compare = 0;

  /// OPs of two-input gate k; composite gates cost the sum of their parts.
  std::int64_t gate_cost(int k) const;
  std::int64_t datapath_cost(const Datapath& d) const;
  bool operator==(const CostTable&) const = default;
};

/// Gate costs with fp16 costs derived from the datapaths above.
CostTable default_cost_table();

/// Applies overrides keyed by and, or, nand, nor, xor, xnor, not, fp16_add,
/// fp16_mul, fp16_compare. Unknown keys or negative values raise ConfigError.
CostTable set_cost_table(const std::map<std::string, std::int64_t>& overrides);

struct LayerCost {
  int layer = 0;
  std::int64_t nodes = 0;
  std::int64_t ops = 0;
};

struct CostReport {
  std::int64_t threshold_ops = 0;
  std::int64_t logic_ops = 0;
  std::int64_t sum_ops = 0;
  std::int64_t total_ops = 0;
  std::int64_t n_thresholds = 0;
  std::int64_t n_gates = 0;
  std::int64_t n_links = 0;
  std::vector<LayerCost> layers;  // ascending layer; 0 is the threshold layer
};

CostReport count_ops(const HardCircuit& circuit, const CostTable& table);

}  // namespace dln
