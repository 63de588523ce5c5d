#include "dln/gates.hpp"

#include <stdexcept>
#include <string>

namespace dln {

namespace {

void check_gate(int k) {
  if (k < 0 || k >= kGateCount)
    throw std::out_of_range("gate index " + std::to_string(k) + " outside 0..15");
}

// c0 + c1 a + c2 b + c3 ab
constexpr std::array<GateCoefficients, kGateCount> kCoefficients = {{
    {0, 0, 0, 0},     // false
    {0, 0, 0, 1},     // a and b
    {0, 1, 0, -1},    // a and not b
    {0, 1, 0, 0},     // a
    {0, 0, 1, -1},    // not a and b
    {0, 0, 1, 0},     // b
    {0, 1, 1, -2},    // a xor b
    {0, 1, 1, -1},    // a or b
    {1, -1, -1, 1},   // nor
    {1, -1, -1, 2},   // xnor
    {1, 0, -1, 0},    // not b
    {1, 0, -1, 1},    // a or not b
    {1, -1, 0, 0},    // not a
    {1, -1, 0, 1},    // not a or b
    {1, 0, 0, -1},    // nand
    {1, 0, 0, 0},     // true
}};

constexpr std::array<std::string_view, kGateCount> kNames = {
    "FALSE", "AND",  "A_AND_NOT_B", "A",    "NOT_A_AND_B", "B",    "XOR",  "OR",
    "NOR",   "XNOR", "NOT_B",       "A_OR_NOT_B", "NOT_A", "NOT_A_OR_B", "NAND", "TRUE"};

constexpr std::array<std::string_view, kGateCount> kPatterns = {
    "FALSE",
    "{a} AND {b}",
    "{a} AND NOT {b}",
    "{a}",
    "NOT {a} AND {b}",
    "{b}",
    "{a} XOR {b}",
    "{a} OR {b}",
    "NOT ({a} OR {b})",
    "NOT ({a} XOR {b})",
    "NOT {b}",
    "{a} OR NOT {b}",
    "NOT {a}",
    "NOT {a} OR {b}",
    "NOT ({a} AND {b})",
    "TRUE",
};

}  // namespace

const GateCoefficients& gate_coefficients(int k) {
  check_gate(k);
  return kCoefficients[static_cast<std::size_t>(k)];
}

double soft_gate_eval(int k, double a, double b) {
  const auto& c = gate_coefficients(k);
  return c[0] + c[1] * a + c[2] * b + c[3] * a * b;
}

double soft_gate_da(int k, double /*a*/, double b) {
  const auto& c = gate_coefficients(k);
  return c[1] + c[3] * b;
}

double soft_gate_db(int k, double a, double /*b*/) {
  const auto& c = gate_coefficients(k);
  return c[2] + c[3] * a;
}

bool hard_gate_eval(int k, bool a, bool b) {
  switch (k) {
    case kFalse: return false;
    case kAnd: return a && b;
    case kAndNotB: return a && !b;
    case kPassA: return a;
    case kNotAAndB: return !a && b;
    case kPassB: return b;
    case kXor: return a != b;
    case kOr: return a || b;
    case kNor: return !(a || b);
    case kXnor: return a == b;
    case kNotB: return !b;
    case kOrNotB: return a || !b;
    case kNotA: return !a;
    case kNotAOrB: return !a || b;
    case kNand: return !(a && b);
    case kTrue: return true;
    default: break;
  }
  check_gate(k);
  return false;
}

std::string_view gate_name(int k) {
  check_gate(k);
  return kNames[static_cast<std::size_t>(k)];
}

std::string_view gate_pattern(int k) {
  check_gate(k);
  return kPatterns[static_cast<std::size_t>(k)];
}

bool gate_depends_on_a(int k) {
  return hard_gate_eval(k, false, false) != hard_gate_eval(k, true, false) ||
         hard_gate_eval(k, false, true) != hard_gate_eval(k, true, true);
}

bool gate_depends_on_b(int k) {
  return hard_gate_eval(k, false, false) != hard_gate_eval(k, false, true) ||
         hard_gate_eval(k, true, false) != hard_gate_eval(k, true, true);
}

bool gate_is_symmetric(int k) {
  return gate_swap_operands(k) == k;
}

int gate_swap_operands(int k) {
  check_gate(k);
  // Swapping operands exchanges the truth-table bits for (0,1) and (1,0).
  int mid = (k >> 1) & 1;  // output on (1,0)
  int low = (k >> 2) & 1;  // output on (0,1)
  return (k & ~0b0110) | (mid << 2) | (low << 1);
}

}  // namespace dln
