#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "dln/data.hpp"
#include "dln/errors.hpp"

namespace dln {

namespace {

const RawColumn& require_column(const RawTable& raw, const ColumnSchema& col) {
  const RawColumn* found = raw.find(col.name);
  if (!found)
    throw DataError("input is missing column '" + col.name + "'");
  bool raw_categorical = found->kind == ColumnKind::categorical;
  bool want_categorical = col.kind == ColumnKind::categorical;
  if (raw_categorical != want_categorical)
    throw DataError("column '" + col.name + "' is " + to_string(found->kind) + ", model expects " +
                    to_string(col.kind));
  return *found;
}

double scale(double value, double lo, double hi) {
  if (hi <= lo)
    return 0.0;
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

}  // namespace

std::size_t Schema::feature_count() const {
  std::size_t n = 0;
  for (const auto& col : columns) {
    if (col.kind == ColumnKind::continuous)
      ++n;
    else if (col.kind == ColumnKind::categorical)
      n += col.categories.size();
  }
  return n;
}

std::vector<FeatureInfo> Schema::features() const {
  std::vector<FeatureInfo> out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c];
    if (col.kind == ColumnKind::continuous) {
      out.push_back({col.name, c, std::nullopt, col.min, col.max});
    } else if (col.kind == ColumnKind::categorical) {
      for (std::size_t k = 0; k < col.categories.size(); ++k)
        out.push_back({col.name + "=" + col.categories[k], c, k, 0.0, 1.0});
    }
  }
  return out;
}

bool Schema::has_target() const {
  return std::any_of(columns.begin(), columns.end(),
                     [](const ColumnSchema& c) { return c.kind == ColumnKind::target; });
}

const ColumnSchema& Schema::target() const {
  for (const auto& col : columns)
    if (col.kind == ColumnKind::target)
      return col;
  throw DataError("schema has no target column");
}

double Schema::standardize(double y) const {
  const auto& t = target();
  return (y - t.target_mean) / t.target_std;
}

double Schema::destandardize(double y) const {
  const auto& t = target();
  return t.target_mean + t.target_std * y;
}

double Schema::raw_cut(std::size_t feature, double scaled) const {
  auto info = features().at(feature);
  if (info.category)
    return scaled;
  return info.min + scaled * (info.max - info.min);
}

std::vector<double> Schema::encode(const RawTable& raw, std::span<const std::size_t> rows) const {
  const std::size_t width = feature_count();
  std::vector<double> out(rows.size() * width, 0.0);
  std::size_t offset = 0;
  for (const auto& col : columns) {
    if (col.kind == ColumnKind::target)
      continue;
    const RawColumn& src = require_column(raw, col);
    if (col.kind == ColumnKind::continuous) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& cell = src.numbers.at(rows[r]);
        if (!cell)
          throw DataError("missing value in column '" + col.name + "'");
        out[r * width + offset] = scale(*cell, col.min, col.max);
      }
      ++offset;
    } else {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& cell = src.labels.at(rows[r]);
        if (!cell)
          throw DataError("missing value in column '" + col.name + "'");
        auto it = std::lower_bound(col.categories.begin(), col.categories.end(), *cell);
        // Unseen categories encode as all zeros.
        if (it != col.categories.end() && *it == *cell)
          out[r * width + offset + static_cast<std::size_t>(it - col.categories.begin())] = 1.0;
      }
      offset += col.categories.size();
    }
  }
  return out;
}

std::vector<double> Schema::encode_target(const RawTable& raw,
                                          std::span<const std::size_t> rows) const {
  const auto& t = target();
  const RawColumn* src = raw.find(t.name);
  if (!src)
    throw DataError("input is missing target column '" + t.name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) {
    const auto& cell = src->numbers.at(r);
    if (!cell)
      throw DataError("missing target value");
    out.push_back((*cell - t.target_mean) / t.target_std);
  }
  return out;
}

std::vector<std::size_t> complete_rows(const RawTable& raw) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < raw.n_rows; ++r) {
    bool ok = std::none_of(raw.columns.begin(), raw.columns.end(),
                           [r](const RawColumn& c) { return c.missing(r); });
    if (ok)
      rows.push_back(r);
  }
  return rows;
}

Dataset preprocess(const RawTable& raw, const std::vector<bool>& train_mask) {
  if (train_mask.size() != raw.n_rows)
    throw DataError("train mask length does not match the table");
  auto target_col = raw.target_index();
  if (!target_col)
    throw DataError("target column absent");

  std::vector<std::size_t> rows = complete_rows(raw);
  if (rows.empty())
    throw DataError("no rows left after removing rows with missing values");
  std::vector<std::size_t> train_rows;
  for (auto r : rows)
    if (train_mask[r])
      train_rows.push_back(r);
  if (train_rows.size() < 2)
    throw DataError("need at least two complete training rows");

  Schema schema;
  for (const auto& src : raw.columns) {
    ColumnSchema col;
    col.name = src.name;
    col.kind = src.kind;
    if (src.kind == ColumnKind::categorical) {
      std::set<std::string> cats;
      for (auto r : train_rows)
        cats.insert(*src.labels[r]);
      col.categories.assign(cats.begin(), cats.end());
    } else if (src.kind == ColumnKind::continuous) {
      col.min = col.max = *src.numbers[train_rows.front()];
      for (auto r : train_rows) {
        col.min = std::min(col.min, *src.numbers[r]);
        col.max = std::max(col.max, *src.numbers[r]);
      }
    } else {
      double sum = 0.0;
      for (auto r : train_rows)
        sum += *src.numbers[r];
      double mean = sum / static_cast<double>(train_rows.size());
      double ss = 0.0;
      for (auto r : train_rows) {
        double d = *src.numbers[r] - mean;
        ss += d * d;
      }
      // Population standard deviation.
      double sd = std::sqrt(ss / static_cast<double>(train_rows.size()));
      if (!(sd > 0.0))
        throw DataError("target is constant on the training rows");
      col.target_mean = mean;
      col.target_std = sd;
    }
    schema.columns.push_back(std::move(col));
  }

  Dataset out;
  out.n_rows = rows.size();
  out.n_features = schema.feature_count();
  out.features = schema.encode(raw, rows);
  out.target = schema.encode_target(raw, rows);
  for (const auto& info : schema.features())
    out.feature_origin.push_back(info.source);
  out.source_rows = rows;
  out.schema = std::move(schema);
  return out;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.n_rows = rows.size();
  out.n_features = data.n_features;
  out.schema = data.schema;
  out.feature_origin = data.feature_origin;
  out.features.reserve(rows.size() * data.n_features);
  out.target.reserve(rows.size());
  out.source_rows.reserve(rows.size());
  for (auto r : rows) {
    if (r >= data.n_rows)
      throw DataError("row index out of range");
    auto x = data.row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.target.push_back(data.target[r]);
    out.source_rows.push_back(data.source_rows.empty() ? r : data.source_rows[r]);
  }
  return out;
}

Dataset make_dataset(std::size_t n_features, std::vector<double> features,
                     std::vector<double> target) {
  if (n_features == 0 || features.size() != n_features * target.size())
    throw ShapeError("feature matrix does not match the target length");
  Dataset out;
  out.n_rows = target.size();
  out.n_features = n_features;
  for (std::size_t f = 0; f < n_features; ++f) {
    ColumnSchema c;
    c.name = "f" + std::to_string(f);
    c.min = 0.0;
    c.max = 1.0;
    out.schema.columns.push_back(std::move(c));
    out.feature_origin.push_back(f);
  }
  ColumnSchema y;
  y.name = "y";
  y.kind = ColumnKind::target;
  out.schema.columns.push_back(std::move(y));
  out.features = std::move(features);
  out.target = std::move(target);
  out.source_rows.resize(out.n_rows);
  std::iota(out.source_rows.begin(), out.source_rows.end(), std::size_t{0});
  return out;
}

SplitResult split(const RawTable& raw, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  std::vector<std::size_t> rows = complete_rows(raw);
  const auto n = rows.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n)
    throw DataError("split of " + std::to_string(n) + " rows would leave an empty part");

  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::vector<bool> train_mask(raw.n_rows, false);
  std::vector<bool> is_test(raw.n_rows, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_test)
      is_test[rows[i]] = true;
    else
      train_mask[rows[i]] = true;
  }

  Dataset all = preprocess(raw, train_mask);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < all.n_rows; ++i)
    (is_test[all.source_rows[i]] ? test_idx : train_idx).push_back(i);
  return {subset(all, train_idx), subset(all, test_idx)};
}

std::vector<std::size_t> FoldPlan::rows_in(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold)
      out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::rows_outside(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold)
      out.push_back(i);
  return out;
}

int default_fold_count(std::size_t n_rows) {
  if (n_rows < 1000)
    return 4;
  if (n_rows <= 5000)
    return 3;
  return 2;
}

FoldPlan make_folds(std::size_t n_rows, int n_folds, std::uint64_t seed) {
  if (n_folds < 2 || n_folds > 4)
    throw ConfigError("fold count must be between 2 and 4");
  if (n_rows < static_cast<std::size_t>(n_folds))
    throw DataError("fewer rows than folds");
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.assignments.assign(n_rows, 0);
  for (std::size_t i = 0; i < n_rows; ++i)
    plan.assignments[order[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  return plan;
}

}  // namespace dln
