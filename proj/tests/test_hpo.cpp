#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dln/errors.hpp"
#include "dln/hpo.hpp"
#include "support.hpp"

using namespace dln;

namespace {

SearchSpace tiny_space() {
  SearchSpace s;
  s.epochs = {2, 4};
  s.width = {4, 8};
  s.n_logic_layers = {1};
  s.thresholds_per_feature = {2, 3};
  s.subspace_size = {4};
  return s;
}

std::vector<double> flatten(NetworkParams p) {
  std::vector<double> out;
  for (auto& t : trainable_tensors(p))
    out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

}  // namespace

TEST_CASE("sampling: smaller budgets are prefixes and points are distinct") {
  SearchSpace s;
  auto small = sample_grid(s, 32, 5);
  auto large = sample_grid(s, 128, 5);
  REQUIRE(small.size() == 32);
  REQUIRE(large.size() == 128);
  CHECK(std::equal(small.begin(), small.end(), large.begin()));
  CHECK(std::set<GridPoint>(large.begin(), large.end()).size() == 128);
  CHECK(sample_grid(s, 32, 6) != small);
  CHECK(sample_grid(s, 32, 5) == small);
  for (const auto& p : large)
    CHECK_NOTHROW(materialize(s, p, {}).validate());
}

TEST_CASE("sampling: a budget beyond the grid enumerates it once") {
  SearchSpace s = tiny_space();
  s.tau_init = {1.0};
  s.gamma = {0.9};
  s.tau_min = {0.05};
  s.learning_rate = {0.01};
  CHECK(s.size() == 8);
  auto all = sample_grid(s, 100, 1);
  CHECK(all.size() == 8);
  CHECK(std::set<GridPoint>(all.begin(), all.end()).size() == 8);
}

TEST_CASE("materialize fills the sampled fields only") {
  SearchSpace s;
  TrainConfig base;
  base.batch_size = 17;
  base.two_phase = true;
  GridPoint p = {2, 0, 1, 2, 0, 1, 2, 1, 0};
  auto c = materialize(s, p, base);
  CHECK(c.tau_init == 2.0);
  CHECK(c.gamma == 0.9);
  CHECK(c.tau_min == 0.05);
  CHECK(c.learning_rate == 0.03);
  CHECK(c.epochs == 50);
  CHECK(c.widths == std::vector<std::size_t>{32, 32, 32});
  CHECK(c.thresholds_per_feature == 10);
  CHECK(c.subspace_size == 4);
  CHECK(c.batch_size == 17);
  CHECK(c.two_phase);
  CHECK_THROWS_AS(materialize(s, {0, 0}, base), ConfigError);
}

TEST_CASE("search space validation") {
  SearchSpace s;
  CHECK_NOTHROW(s.validate({}));
  s.gamma.clear();
  CHECK_THROWS_AS(s.validate({}), ConfigError);
  SearchSpace t;
  t.tau_min = {0.5};
  t.tau_init = {0.1, 1.0};
  CHECK_THROWS_AS(t.validate({}), ConfigError);
  SearchSpace u;
  u.subspace_size = {3};
  CHECK_THROWS_AS(u.validate({}), ConfigError);
}

TEST_CASE("cross-validation averages hard-prediction fold losses") {
  std::mt19937_64 rng(51);
  Dataset d = testing::random_dataset(rng, 60, 3);
  TrainConfig c;
  c.widths = {4};
  c.epochs = 2;
  c.thresholds_per_feature = 2;
  FoldPlan plan = make_folds(d.n_rows, 3, 7);
  auto r = cross_validate(d, c, plan);
  REQUIRE(r.fold_mse.size() == 3);
  CHECK(r.mean_mse == doctest::Approx((r.fold_mse[0] + r.fold_mse[1] + r.fold_mse[2]) / 3.0));
  // Fold 0 by hand.
  auto fit = subset(d, plan.rows_outside(0));
  auto held = subset(d, plan.rows_in(0));
  auto trained = train(fit, c);
  std::vector<double> pred(held.n_rows);
  for (std::size_t i = 0; i < held.n_rows; ++i)
    pred[i] = network_forward_hard_params(held.row(i), trained.params, trained.tau_final);
  CHECK(r.fold_mse[0] == mse_loss(pred, held.target));
}

TEST_CASE("search: budget one, best is minimal, callbacks arrive in order") {
  Dataset d = testing::step_dataset(80, 0.5, 3);
  auto one = run_search(d, tiny_space(), 1, 9);
  REQUIRE(one.trials.size() == 1);
  CHECK(one.best == 0);
  CHECK(one.n_folds == 4);

  std::vector<std::size_t> order;
  auto r = run_search(d, tiny_space(), 6, 9, {}, 1, [&](const TrialResult& t) { order.push_back(t.index); });
  CHECK(order == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  for (const auto& t : r.trials) {
    CHECK(r.best_trial().mean_mse <= t.mean_mse);
    double sum = 0.0;
    for (double m : t.fold_mse)
      sum += m;
    CHECK(t.mean_mse == doctest::Approx(sum / static_cast<double>(t.fold_mse.size())));
    CHECK(t.config.seed == 9);
  }
  // The first trial of the larger search is the budget-one trial.
  CHECK(r.trials[0].mean_mse == one.trials[0].mean_mse);
  CHECK_THROWS_AS(run_search(d, tiny_space(), 0, 9), ConfigError);
}

TEST_CASE("search: ties go to the earliest trial") {
  Dataset d = testing::step_dataset(60, 0.5, 4);
  SearchSpace s = tiny_space();
  // Every grid point materializes to the same configuration.
  s.tau_init = {1.0, 1.0};
  s.gamma = {0.9};
  s.tau_min = {0.05};
  s.learning_rate = {0.01};
  s.epochs = {2};
  s.width = {4};
  s.thresholds_per_feature = {2};
  auto r = run_search(d, s, 2, 3);
  REQUIRE(r.trials.size() == 2);
  CHECK(r.trials[0].mean_mse == r.trials[1].mean_mse);
  CHECK(r.best == 0);
}

TEST_CASE("search results do not depend on the thread count") {
  Dataset d = testing::step_dataset(80, 0.3, 5);
  auto a = run_search(d, tiny_space(), 5, 11, {}, 1);
  auto b = run_search(d, tiny_space(), 5, 11, {}, 3);
  REQUIRE(a.trials.size() == b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].fold_mse == b.trials[i].fold_mse);
    CHECK(a.trials[i].config.digest() == b.trials[i].config.digest());
  }
  CHECK(a.best == b.best);
}

TEST_CASE("final fit delegates to the trainer") {
  Dataset d = testing::step_dataset(64, 0.5, 6);
  TrainConfig c;
  c.widths = {4};
  c.epochs = 1;
  c.thresholds_per_feature = 2;
  auto f = final_fit(d, c, 13);
  c.seed = 13;
  auto direct = train(d, c);
  CHECK(flatten(f.params) == flatten(direct.params));
  CHECK(f.report.epoch_mse.size() == 1);
}

TEST_CASE("test rows never influence the search") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::string csv = "a,b,y\n";
  for (int i = 0; i < 80; ++i) {
    const double a = u(rng), b = u(rng);
    csv += std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(a > 5 ? 3.0 + b : b) + "\n";
  }
  auto raw = make_raw_table(parse_csv(csv), {{"y", ColumnKind::target}}, TargetPolicy::required);
  auto parts = split(raw, 0.25, 17);

  // Corrupt every test row and split again with the same seed.
  auto damaged = raw;
  auto& ycol = damaged.columns[*damaged.target_index()];
  for (auto r : parts.test.source_rows)
    ycol.numbers[r] = 1e6;
  auto parts2 = split(damaged, 0.25, 17);
  CHECK(parts2.train.features == parts.train.features);
  CHECK(parts2.train.target == parts.train.target);

  auto s1 = run_search(parts.train, tiny_space(), 3, 2);
  auto s2 = run_search(parts2.train, tiny_space(), 3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(s1.trials[i].fold_mse == s2.trials[i].fold_mse);
}
