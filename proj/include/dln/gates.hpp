#pragma once

#include <array>
#include <string_view>

namespace dln {

inline constexpr int kGateCount = 16;

// Gate indices. Ordering follows the usual two-input truth-table enumeration:
// bit (3 - (2a + b)) of the index is the gate output on (a, b).
enum GateId : int {
  kFalse = 0,
  kAnd = 1,
  kAndNotB = 2,
  kPassA = 3,
  kNotAAndB = 4,
  kPassB = 5,
  kXor = 6,
  kOr = 7,
  kNor = 8,
  kXnor = 9,
  kNotB = 10,
  kOrNotB = 11,
  kNotA = 12,
  kNotAOrB = 13,
  kNand = 14,
  kTrue = 15,
};

/// Every relaxed gate is multilinear: value = c0 + c1*a + c2*b + c3*a*b.
/// Mixtures of gates therefore stay multilinear, which the network exploits
/// by folding softmax-weighted gate choices into one coefficient vector.
using GateCoefficients = std::array<double, 4>;

const GateCoefficients& gate_coefficients(int k);

double soft_gate_eval(int k, double a, double b);
double soft_gate_da(int k, double a, double b);
double soft_gate_db(int k, double a, double b);
bool hard_gate_eval(int k, bool a, bool b);

std::string_view gate_name(int k);
// Infix template used when rendering rules, e.g. "{a} AND NOT {b}".
std::string_view gate_pattern(int k);

/// Gates whose output ignores b (a-only) or a (b-only).
bool gate_depends_on_a(int k);
bool gate_depends_on_b(int k);
bool gate_is_symmetric(int k);
/// Index of the gate computing g(b, a) when g is gate k.
int gate_swap_operands(int k);

}  // namespace dln
