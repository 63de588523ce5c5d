#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dln/circuit.hpp"
#include "dln/data.hpp"
#include "dln/network.hpp"

namespace dln {

enum class DecayGranularity { per_batch, per_epoch };

struct TrainConfig {
  double tau_init = 1.0;
  double gamma = 0.95;
  double tau_min = 0.05;
  // When false the temperature stays at 1 for the whole run (no annealing).
  bool tau_schedule = true;
  DecayGranularity decay = DecayGranularity::per_epoch;

  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.01;

  std::vector<std::size_t> widths = {64, 64};  // one entry per LogicLayer
  int thresholds_per_feature = 6;
  int subspace_size = 8;
  bool concat_inputs = true;
  bool two_phase = false;
  SteConfig ste;
  double sum_threshold = 0.8;

  std::uint64_t seed = 0;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
  /// Stable short fingerprint of every field, for circuit metadata.
  std::string digest() const;
};

struct LossReport {
  std::vector<double> epoch_mse;  // training loss of the relaxed network
  std::vector<double> tau;        // temperature at the end of each epoch
  std::optional<double> validation_mse;  // discretized network, standardized units
};

struct TrainResult {
  NetworkParams params;
  LossReport report;
  double tau_final = 1.0;
};

struct EpochProgress {
  int epoch;
  double mse;
  double tau;
};
using ProgressFn = std::function<void(const EpochProgress&)>;

/// Split points of a one-dimensional variance-reduction regression tree grown
/// best-first to at most `max_leaves` leaves, in the order they were chosen.
std::vector<double> tree_split_points(std::span<const double> x, std::span<const double> y,
                                      std::size_t max_leaves);

NetworkParams init_params(const Dataset& data, const TrainConfig& config);

double mse_loss(std::span<const double> predictions, std::span<const double> targets);
double decay_temperature(double tau, double gamma, double tau_min);

/// Adaptive-moment optimizer (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(const NetworkParams& params, double learning_rate);
  /// Applies one update to every tensor whose group is enabled in `groups`
  /// (bit i corresponds to ParamGroup i).
  void step(NetworkParams& params, ParamTensors& grads, unsigned groups = 0x7f);

 private:
  double lr_;
  std::uint64_t t_ = 0;
  ParamTensors m_, v_;
};

TrainResult train(const Dataset& data, const TrainConfig& config,
                  const Dataset* validation = nullptr, const ProgressFn& progress = {});

struct Metrics {
  std::optional<double> r2;  // undefined when the target has zero variance
  double rmse = 0.0;
  double mae = 0.0;
};

/// Metrics over predictions and targets given in the same units.
Metrics regression_metrics(std::span<const double> predictions, std::span<const double> targets);

/// Scores standardized predictions in original target units. Throws
/// MetricError when R² is undefined.
Metrics evaluate_predictions(std::span<const double> predictions_std, const Dataset& data);
Metrics evaluate(const HardCircuit& circuit, const Dataset& data);
Metrics evaluate(const NetworkParams& params, double tau_final, const Dataset& data);

}  // namespace dln
