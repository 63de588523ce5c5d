#include "dln/hpo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "dln/errors.hpp"

namespace dln {

namespace {

constexpr std::size_t kDims = 9;

std::vector<std::size_t> grid_sizes(const SearchSpace& s) {
  return {s.tau_init.size(),      s.gamma.size(),          s.tau_min.size(),
          s.learning_rate.size(), s.epochs.size(),         s.width.size(),
          s.n_logic_layers.size(), s.thresholds_per_feature.size(), s.subspace_size.size()};
}

}  // namespace

void SearchSpace::validate(const TrainConfig& base) const {
  for (auto n : grid_sizes(*this))
    if (n == 0)
      throw ConfigError("search grids must be nonempty");
  const double max_tau_min = *std::max_element(tau_min.begin(), tau_min.end());
  const double min_tau = *std::min_element(tau_init.begin(), tau_init.end());
  if (max_tau_min > min_tau)
    throw ConfigError("search grid allows tau_min above tau");
  for (int l : n_logic_layers)
    if (l < 0)
      throw ConfigError("logic layer count must be non-negative");
  // Every grid value must pass the single-config checks on its own.
  for (std::size_t d = 0; d < kDims; ++d) {
    for (std::size_t i = 0; i < grid_sizes(*this)[d]; ++i) {
      GridPoint p(kDims, 0);
      p[d] = i;
      TrainConfig c = materialize(*this, p, base);
      c.tau_min = std::min(c.tau_min, c.tau_init);
      c.validate();
    }
  }
}

std::uint64_t SearchSpace::size() const {
  std::uint64_t total = 1;
  for (auto n : grid_sizes(*this)) {
    if (n != 0 && total > std::numeric_limits<std::uint64_t>::max() / n)
      return std::numeric_limits<std::uint64_t>::max();
    total *= n;
  }
  return total;
}

std::vector<GridPoint> sample_grid(const SearchSpace& space, std::size_t budget, std::uint64_t seed) {
  const auto sizes = grid_sizes(space);
  const std::uint64_t total = space.size();
  const std::size_t wanted = static_cast<std::size_t>(std::min<std::uint64_t>(budget, total));
  std::mt19937_64 rng(seed);
  std::set<GridPoint> seen;
  std::vector<GridPoint> out;
  while (out.size() < wanted) {
    GridPoint p(kDims);
    for (std::size_t d = 0; d < kDims; ++d)
      p[d] = std::uniform_int_distribution<std::size_t>(0, sizes[d] - 1)(rng);
    if (seen.insert(p).second)
      out.push_back(std::move(p));
  }
  return out;
}

TrainConfig materialize(const SearchSpace& s, const GridPoint& p, const TrainConfig& base) {
  if (p.size() != kDims)
    throw ConfigError("grid point has the wrong dimension");
  TrainConfig c = base;
  c.tau_init = s.tau_init.at(p[0]);
  c.gamma = s.gamma.at(p[1]);
  c.tau_min = s.tau_min.at(p[2]);
  c.learning_rate = s.learning_rate.at(p[3]);
  c.epochs = s.epochs.at(p[4]);
  c.widths.assign(static_cast<std::size_t>(s.n_logic_layers.at(p[6])), s.width.at(p[5]));
  c.thresholds_per_feature = s.thresholds_per_feature.at(p[7]);
  c.subspace_size = s.subspace_size.at(p[8]);
  return c;
}

TrialResult cross_validate(const Dataset& data, const TrainConfig& config, const FoldPlan& plan) {
  TrialResult r;
  r.config = config;
  const auto start = std::chrono::steady_clock::now();
  try {
    for (int f = 0; f < plan.n_folds; ++f) {
      auto fit_rows = plan.rows_outside(f);
      auto held_rows = plan.rows_in(f);
      Dataset fit = subset(data, fit_rows);
      Dataset held = subset(data, held_rows);
      auto trained = train(fit, config, &held);
      r.fold_mse.push_back(*trained.report.validation_mse);
    }
    double total = 0.0;
    for (double m : r.fold_mse)
      total += m;
    r.mean_mse = total / static_cast<double>(r.fold_mse.size());
  } catch (const DivergenceError& e) {
    r.mean_mse = std::numeric_limits<double>::infinity();
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

SearchResult run_search(const Dataset& data, const SearchSpace& space, std::size_t budget,
                        std::uint64_t seed, const TrainConfig& base, unsigned threads,
                        const TrialCallback& on_trial) {
  if (budget < 1)
    throw ConfigError("search budget must be at least 1");
  space.validate(base);
  if (data.n_rows < 2)
    throw DataError("cross-validation needs at least two rows");

  SearchResult result;
  result.n_folds = std::min<int>(default_fold_count(data.n_rows), static_cast<int>(data.n_rows));
  const FoldPlan plan = make_folds(data.n_rows, result.n_folds, seed);
  const auto points = sample_grid(space, budget, seed);
  result.trials.resize(points.size());

  if (threads == 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(points.size()));

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::vector<bool> done(points.size(), false);
  std::size_t emitted = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size())
        return;
      {
        std::lock_guard lock(mu);
        if (failure)
          return;
      }
      try {
        TrainConfig config = materialize(space, points[i], base);
        config.seed = seed;
        TrialResult r = cross_validate(data, config, plan);
        r.index = i;
        std::lock_guard lock(mu);
        result.trials[i] = std::move(r);
        done[i] = true;
        while (emitted < done.size() && done[emitted]) {
          if (on_trial)
            on_trial(result.trials[emitted]);
          ++emitted;
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure)
          failure = std::current_exception();
        return;
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(worker);
    for (auto& th : pool)
      th.join();
  }
  if (failure)
    std::rethrow_exception(failure);

  for (std::size_t i = 1; i < result.trials.size(); ++i)
    if (result.trials[i].mean_mse < result.trials[result.best].mean_mse)
      result.best = i;
  return result;
}

TrainResult final_fit(const Dataset& data, TrainConfig config, std::uint64_t seed,
                      const ProgressFn& progress) {
  config.seed = seed;
  return train(data, config, nullptr, progress);
}

}  // namespace dln
