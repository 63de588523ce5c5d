#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dln/data.hpp"
#include "dln/trainer.hpp"

namespace dln {

/// Candidate grids. A sampled configuration takes one value from each grid;
/// all other TrainConfig fields come from the base configuration.
struct SearchSpace {
  std::vector<double> tau_init = {0.5, 1.0, 2.0};
  std::vector<double> gamma = {0.9, 0.95, 0.98};
  std::vector<double> tau_min = {0.01, 0.05, 0.1};
  std::vector<double> learning_rate = {0.003, 0.01, 0.03};
  std::vector<int> epochs = {50, 100, 200};
  std::vector<std::size_t> width = {16, 32, 64};
  std::vector<int> n_logic_layers = {1, 2, 3};
  std::vector<int> thresholds_per_feature = {6, 10};
  std::vector<int> subspace_size = {4, 8, 16};

  /// Throws ConfigError if a grid is empty or a combination can violate the
  /// TrainConfig invariants.
  void validate(const TrainConfig& base) const;
  std::uint64_t size() const;  // number of distinct combinations
};

/// Grid coordinates of one sampled configuration, in SearchSpace field order.
using GridPoint = std::vector<std::size_t>;

/// The first min(budget, size) distinct points of the seeded uniform stream.
/// A smaller budget always yields a prefix of a larger one.
std::vector<GridPoint> sample_grid(const SearchSpace& space, std::size_t budget, std::uint64_t seed);
TrainConfig materialize(const SearchSpace& space, const GridPoint& point, const TrainConfig& base);

struct TrialResult {
  std::size_t index = 0;
  TrainConfig config;
  double mean_mse = 0.0;  // +inf when a fold diverged
  std::vector<double> fold_mse;
  double seconds = 0.0;
  std::string error;  // non-empty when the trial diverged
};

struct SearchResult {
  std::size_t best = 0;
  std::vector<TrialResult> trials;  // in trial order
  int n_folds = 0;

  const TrialResult& best_trial() const { return trials.at(best); }
};

/// Called once per trial, strictly in trial order.
using TrialCallback = std::function<void(const TrialResult&)>;

/// Mean hard-prediction MSE of `config` over the folds of `plan`.
TrialResult cross_validate(const Dataset& data, const TrainConfig& config, const FoldPlan& plan);

/// Random search. Trials are scored by k-fold CV MSE; the lowest mean wins,
/// the earliest trial on ties. `threads` = 0 uses the hardware concurrency.
/// Every trial trains with `seed`, so results do not depend on scheduling.
SearchResult run_search(const Dataset& data, const SearchSpace& space, std::size_t budget,
                        std::uint64_t seed, const TrainConfig& base = {}, unsigned threads = 1,
                        const TrialCallback& on_trial = {});

/// Retrains the winning configuration on the whole training split.
TrainResult final_fit(const Dataset& data, TrainConfig config, std::uint64_t seed,
                      const ProgressFn& progress = {});

}  // namespace dln
