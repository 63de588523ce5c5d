#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dln/circuit.hpp"
#include "dln/network.hpp"
#include "dln/trainer.hpp"

namespace dln {

/// A trained network together with everything needed to score raw rows.
struct Model {
  Schema schema;
  NetworkParams params;
  double tau_final = 1.0;
  TrainConfig config;
};

/// Hard circuit of a trained network. Thresholds that cannot change on [0,1]
/// inputs become constants, logic neurons keep their argmax gate and links,
/// and sum links survive iff sigmoid(S/tau_final) >= the layer threshold.
/// Target transform and metadata are left at their defaults.
HardCircuit discretize(const NetworkParams& params, double tau_final);

/// Replaces threshold nodes whose output is fixed on [0,1] by constants.
/// Applied by discretize; a fixpoint on its output.
HardCircuit fold_constant_thresholds(HardCircuit circuit);

/// Constant folding, identity absorption, structural sharing and dead-node
/// removal, repeated until nothing changes. Preserves the prediction exactly.
HardCircuit simplify(const HardCircuit& circuit);

/// discretize + target transform + schema + metadata, optionally simplified.
HardCircuit compile_model(const Model& model, bool simplified = true);

// ----------------------------------------------------------------------------
// Rules

enum class ExprOp { constant, atom, op_not, op_and, op_or, op_xor };

struct Atom {
  std::size_t feature = 0;
  double bias = 0.0;  // scaled units
  int slope_sign = 1;
};

struct Expr {
  ExprOp op = ExprOp::constant;
  bool value = false;
  std::size_t atom = 0;      // index into RuleSet::atoms
  std::size_t lhs = 0, rhs = 0;  // indices into RuleSet::exprs
};

struct Rule {
  std::size_t root = 0;      // expression index
  double coefficient = 0.0;  // standardized-unit weight
  double weight = 0.0;       // coefficient * target std
  std::size_t link_index = 0;
};

struct RuleSet {
  std::vector<Atom> atoms;
  std::vector<Expr> exprs;  // children precede parents
  std::vector<Rule> rules;  // ascending link index
  double intercept = 0.0;   // target mean
  double target_std = 1.0;
  std::size_t n_features = 0;
  std::vector<std::string> atom_text;

  bool eval_expr(std::size_t e, std::span<const double> features) const;
  /// Prediction in original target units.
  double evaluate(std::span<const double> features) const;
  std::string expr_text(std::size_t e) const;
  std::string text() const;
};

RuleSet extract_rules(const HardCircuit& circuit);

std::string export_dot(const HardCircuit& circuit);

}  // namespace dln
