#include "dln/cost_model.hpp"

#include <stdexcept>

#include "dln/errors.hpp"

namespace dln {

namespace {

Datapath& operator+=(Datapath& x, const Datapath& y) {
  x.and_gates += y.and_gates;
  x.or_gates += y.or_gates;
  x.xor_gates += y.xor_gates;
  x.not_gates += y.not_gates;
  x.half_adders += y.half_adders;
  x.full_adders += y.full_adders;
  x.muxes += y.muxes;
  return x;
}

Datapath ripple_adder(int bits) {
  Datapath d;
  d.full_adders = bits;
  return d;
}

Datapath subtractor(int bits) {
  Datapath d = ripple_adder(bits);
  d.not_gates = bits;
  return d;
}

Datapath incrementer(int bits) {
  Datapath d;
  d.half_adders = bits;
  return d;
}

Datapath barrel_shifter(int bits, int stages) {
  Datapath d;
  d.muxes = static_cast<std::int64_t>(bits) * stages;
  return d;
}

}  // namespace

Datapath array_multiplier(int bits) {
  Datapath d;
  const std::int64_t n = bits;
  d.and_gates = n * n;
  d.full_adders = n * (n - 2);
  d.half_adders = n;
  return d;
}

Datapath fp16_adder() {
  Datapath d;
  d += subtractor(5);          // exponent difference
  d.muxes += 2 * 11 + 5;       // operand swap and exponent select
  d += barrel_shifter(11, 4);  // alignment
  d.xor_gates += 11;           // conditional complement for subtraction
  d += ripple_adder(12);       // significand add with guard bit
  d.or_gates += 12;            // leading-zero detection
  d.and_gates += 12;
  d += barrel_shifter(12, 4);  // normalization
  d += subtractor(5);          // exponent adjust
  d += incrementer(11);        // rounding
  d.muxes += 1;                // result sign
  return d;
}

Datapath fp16_multiplier() {
  Datapath d;
  d.xor_gates += 1;             // sign
  d += array_multiplier(11);    // significands with hidden bit
  d += ripple_adder(5);         // exponent sum
  d += ripple_adder(5);         // bias removal
  d += barrel_shifter(11, 1);   // one-place normalization
  d += incrementer(5);          // exponent bump
  d += incrementer(11);         // rounding
  return d;
}

Datapath fp16_comparator() {
  Datapath d;
  // Borrow chain over the 15 magnitude bits: majority(¬a, b, borrow).
  d.and_gates += 3 * 15;
  d.or_gates += 2 * 15;
  d.not_gates += 15;
  d.xor_gates += 1;  // sign disagreement
  d.muxes += 1;      // pick the magnitude or the sign ordering
  return d;
}

std::int64_t CostTable::gate_cost(int k) const {
  switch (k) {
    case 0:   // FALSE
    case 3:   // A
    case 5:   // B
    case 15:  // TRUE
      return 0;
    case 1: return and_op;
    case 2: return and_op + not_op;  // a AND NOT b
    case 4: return and_op + not_op;
    case 6: return xor_op;
    case 7: return or_op;
    case 8: return nor_op;
    case 9: return xnor_op;
    case 10: return not_op;
    case 11: return or_op + not_op;  // a OR NOT b
    case 12: return not_op;
    case 13: return or_op + not_op;
    case 14: return nand_op;
    default: throw std::out_of_range("gate index " + std::to_string(k));
  }
}

std::int64_t CostTable::datapath_cost(const Datapath& d) const {
  const std::int64_t half = xor_op + and_op;
  const std::int64_t full = 2 * xor_op + 2 * and_op + or_op;
  const std::int64_t mux = 2 * and_op + or_op + not_op;
  return d.and_gates * and_op + d.or_gates * or_op + d.xor_gates * xor_op +
         d.not_gates * not_op + d.half_adders * half + d.full_adders * full + d.muxes * mux;
}

CostTable default_cost_table() {
  CostTable t;
  t.fp16_add = t.datapath_cost(fp16_adder());
  t.fp16_mul = t.datapath_cost(fp16_multiplier());
  t.fp16_compare = t.datapath_cost(fp16_comparator());
  return t;
}

CostTable set_cost_table(const std::map<std::string, std::int64_t>& overrides) {
  CostTable t = default_cost_table();
  const std::map<std::string, std::int64_t CostTable::*> fields = {
      {"and", &CostTable::and_op},     {"or", &CostTable::or_op},
      {"nand", &CostTable::nand_op},   {"nor", &CostTable::nor_op},
      {"xor", &CostTable::xor_op},     {"xnor", &CostTable::xnor_op},
      {"not", &CostTable::not_op},     {"fp16_add", &CostTable::fp16_add},
      {"fp16_mul", &CostTable::fp16_mul}, {"fp16_compare", &CostTable::fp16_compare}};
  for (const auto& [key, value] : overrides) {
    auto it = fields.find(key);
    if (it == fields.end())
      throw ConfigError("unknown cost key '" + key + "'");
    if (value < 0)
      throw ConfigError("cost '" + key + "' must be non-negative");
    t.*(it->second) = value;
  }
  return t;
}

CostReport count_ops(const HardCircuit& circuit, const CostTable& table) {
  CostReport r;
  std::map<int, LayerCost> layers;
  layers[0].layer = 0;
  for (const auto& n : circuit.nodes) {
    switch (n.kind) {
      case NodeKind::constant:
        break;
      case NodeKind::threshold: {
        r.threshold_ops += table.fp16_compare;
        ++r.n_thresholds;
        auto& l = layers[0];
        ++l.nodes;
        l.ops += table.fp16_compare;
        break;
      }
      case NodeKind::gate: {
        const auto ops = table.gate_cost(n.gate);
        r.logic_ops += ops;
        ++r.n_gates;
        auto& l = layers[n.layer];
        l.layer = n.layer;
        ++l.nodes;
        l.ops += ops;
        break;
      }
    }
  }
  r.n_links = static_cast<std::int64_t>(circuit.links.size());
  if (r.n_links > 0) {
    r.sum_ops = r.n_links * table.fp16_mul + (r.n_links - 1) * table.fp16_add;
    r.sum_ops += table.fp16_mul + table.fp16_add;  // de-standardization
  }
  r.total_ops = r.threshold_ops + r.logic_ops + r.sum_ops;
  for (auto& [_, l] : layers)
    r.layers.push_back(l);
  return r;
}

}  // namespace dln
