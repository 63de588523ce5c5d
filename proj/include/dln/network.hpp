#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dln/gates.hpp"

namespace dln {

/// Straight-through switches. Each site computes its forward value with the
/// discrete decision and its backward pass with the relaxed derivative.
struct SteConfig {
  bool threshold = true;    // Heaviside forward in the ThresholdLayer
  bool gate_select = true;  // one-hot argmax over gate logits
  bool link_select = true;  // one-hot argmax over link logits
  bool sum_gate = false;    // indicator(sigmoid(S/tau) >= threshold) in the SumLayer

  static SteConfig none() { return {false, false, false, false}; }
  static SteConfig all() { return {true, true, true, true}; }
  bool operator==(const SteConfig&) const = default;
};

struct ThresholdLayer {
  std::vector<std::size_t> source_feature;
  std::vector<double> bias;
  std::vector<double> slope;

  std::size_t size() const { return bias.size(); }
};

/// One layer of two-input logic neurons.
///
/// Every neuron only chooses among a fixed candidate subset of gates and of
/// inputs for each link. Logits are stored for the candidates alone, aligned
/// with the (ascending) subset index lists; entries outside a subset behave
/// as -inf logits and never receive probability mass or gradient.
struct LogicLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t gate_choices = 0;  // candidates per neuron (<= 16)
  std::size_t link_choices = 0;  // candidates per neuron and link (<= in_dim)

  std::vector<std::uint8_t> gate_subset;    // [out_dim * gate_choices]
  std::vector<std::uint32_t> link_subset_a; // [out_dim * link_choices]
  std::vector<std::uint32_t> link_subset_b;
  std::vector<double> gate_logits;    // W, aligned with gate_subset
  std::vector<double> link_a_logits;  // U, aligned with link_subset_a
  std::vector<double> link_b_logits;  // V, aligned with link_subset_b

  std::span<const double> gate_row(std::size_t i) const {
    return {gate_logits.data() + i * gate_choices, gate_choices};
  }
  std::span<const double> link_a_row(std::size_t i) const {
    return {link_a_logits.data() + i * link_choices, link_choices};
  }
  std::span<const double> link_b_row(std::size_t i) const {
    return {link_b_logits.data() + i * link_choices, link_choices};
  }

  /// Full 16-wide gate logits of a neuron with -inf outside its subset.
  std::vector<double> dense_gate_logits(std::size_t neuron) const;

  /// Argmax selections, lowest original index on ties.
  int selected_gate(std::size_t neuron) const;
  std::size_t selected_link_a(std::size_t neuron) const;
  std::size_t selected_link_b(std::size_t neuron) const;
};

struct SumLayer {
  std::vector<double> link_logits;   // S
  std::vector<double> coefficients;  // C
  double threshold = 0.8;            // retention cut on sigmoid(S/tau)

  std::size_t size() const { return coefficients.size(); }
};

struct NetworkParams {
  std::size_t n_features = 0;
  bool concat_inputs = true;
  ThresholdLayer threshold;
  std::vector<LogicLayer> logic;
  SumLayer sum;
  // Bumped whenever trainable values change; tapes remember the revision they
  // were recorded against.
  std::uint64_t revision = 0;

  std::vector<std::size_t> widths() const;
  std::size_t sum_in_dim() const;
  /// Throws ShapeError if the layer dimensions are inconsistent.
  void validate() const;
};

/// Gradients (or any other per-parameter quantity) shaped like the trainable
/// tensors of a network.
struct ParamTensors {
  std::vector<double> bias;
  std::vector<double> slope;
  struct Logic {
    std::vector<double> gate;
    std::vector<double> link_a;
    std::vector<double> link_b;
  };
  std::vector<Logic> logic;
  std::vector<double> sum_link;
  std::vector<double> sum_coef;

  static ParamTensors zeros_like(const NetworkParams& params);
  double max_abs() const;
};

enum class ParamGroup { bias, slope, gate, link_a, link_b, sum_link, sum_coef };
inline constexpr int kParamGroupCount = 7;
const char* to_string(ParamGroup group);

struct TensorRef {
  ParamGroup group;
  std::span<double> values;
};

/// The trainable tensors of `params` in a fixed order.
std::vector<TensorRef> trainable_tensors(NetworkParams& params);
std::vector<TensorRef> tensor_views(ParamTensors& tensors);

// ----------------------------------------------------------------------------
// Layer-level forward passes.

std::vector<double> threshold_forward_soft(std::span<const double> features,
                                           const ThresholdLayer& layer, double tau, bool ste);
std::vector<std::uint8_t> threshold_forward_hard(std::span<const double> features,
                                                 const ThresholdLayer& layer);

std::vector<double> logic_forward_soft(std::span<const double> x, const LogicLayer& layer,
                                       double tau, bool ste_select);
std::vector<std::uint8_t> logic_forward_hard(std::span<const std::uint8_t> x,
                                             const LogicLayer& layer);

double sum_forward_soft(std::span<const double> x, const SumLayer& layer, double tau);
double sum_forward_hard(std::span<const std::uint8_t> x, const SumLayer& layer, double tau_final);

/// Whether sum link j survives discretization at temperature `tau`.
bool sum_link_retained(const SumLayer& layer, std::size_t j, double tau);

// ----------------------------------------------------------------------------
// Whole-network passes.

/// Activations recorded by a soft forward pass, consumed by the backward pass.
struct Tape {
  std::vector<double> features;
  std::vector<double> threshold_soft;  // sigmoid values
  std::vector<double> threshold_out;   // forwarded values (Heaviside under STE)
  struct LogicRecord {
    std::vector<double> input;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> out;
  };
  std::vector<LogicRecord> logic;
  double prediction = 0.0;

  std::uint64_t revision = 0;
  const void* owner = nullptr;  // the SoftPass that recorded it
};

class GradientAccumulator;

/// Softmax/sigmoid state for a fixed (params, tau, ste) triple. Building it
/// once per mini-batch keeps per-sample work to the activation arithmetic.
class SoftPass {
 public:
  SoftPass(const NetworkParams& params, double tau, SteConfig ste);
  ~SoftPass();
  SoftPass(const SoftPass&) = delete;
  SoftPass& operator=(const SoftPass&) = delete;

  double forward(std::span<const double> features, Tape& tape) const;
  /// Adds d(loss)/d(activations) contributions of one sample.
  void backward(const Tape& tape, double d_prediction, GradientAccumulator& acc) const;
  /// Converts accumulated activation-level gradients into parameter gradients.
  ParamTensors gradients(const GradientAccumulator& acc) const;

  std::unique_ptr<GradientAccumulator> make_accumulator() const;
  double tau() const { return tau_; }

 private:
  struct Impl;
  const NetworkParams& params_;
  double tau_;
  SteConfig ste_;
  std::unique_ptr<Impl> impl_;
};

class GradientAccumulator {
 public:
  void clear();

 private:
  friend class SoftPass;
  std::vector<double> bias, slope;
  struct Logic {
    std::vector<double> moments;  // [out * 4]: sum of dy * (1, a, b, ab)
    std::vector<double> prob_a;   // [out * link_choices]
    std::vector<double> prob_b;
  };
  std::vector<Logic> logic;
  std::vector<double> sum_gate;  // d/d sigmoid(S/tau)
  std::vector<double> sum_coef;
};

/// Single-sample convenience wrappers around SoftPass.
struct SoftResult {
  double prediction;
  Tape tape;
  std::shared_ptr<const SoftPass> pass;
};
SoftResult network_forward_soft(std::span<const double> features, const NetworkParams& params,
                                double tau, SteConfig ste);
ParamTensors network_backward(const NetworkParams& params, const SoftResult& forward,
                              double d_prediction);

/// Discrete evaluation straight from the trained parameters (threshold
/// Heaviside, argmax gates and links, thresholded sum links).
double network_forward_hard_params(std::span<const double> features, const NetworkParams& params,
                                   double tau_final);

double sigmoid(double z);

}  // namespace dln
