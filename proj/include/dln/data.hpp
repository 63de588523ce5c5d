#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dln {

enum class ColumnKind { continuous, categorical, target };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& text);

/// Column-name -> kind overrides. Columns without a hint are inferred:
/// continuous when every non-missing cell parses as a number, otherwise
/// categorical. Exactly one column must carry the `target` kind unless the
/// table is loaded for prediction.
using ColumnHints = std::map<std::string, ColumnKind>;

struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  // Populated for continuous and target columns.
  std::vector<std::optional<double>> numbers;
  // Populated for categorical columns.
  std::vector<std::optional<std::string>> labels;

  bool missing(std::size_t row) const;
};

struct RawTable {
  std::vector<RawColumn> columns;
  std::size_t n_rows = 0;

  const RawColumn* find(const std::string& name) const;
  std::optional<std::size_t> target_index() const;
};

struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
CsvDocument parse_csv(const std::string& text);
std::string format_csv_field(const std::string& field);

enum class TargetPolicy { required, optional };

RawTable load_csv(const std::filesystem::path& path, const ColumnHints& hints,
                  TargetPolicy target = TargetPolicy::required);
RawTable make_raw_table(const CsvDocument& doc, const ColumnHints& hints,
                        TargetPolicy target = TargetPolicy::required);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> categories;  // categorical only, sorted
  double min = 0.0;                     // continuous only
  double max = 0.0;
  double target_mean = 0.0;  // target only
  double target_std = 1.0;
};

/// Where a post-encoding feature column comes from.
struct FeatureInfo {
  std::string name;         // "age" or "region=north"
  std::size_t source = 0;   // index into Schema::columns
  std::optional<std::size_t> category;
  double min = 0.0;  // raw-unit range used by min-max scaling
  double max = 1.0;
};

class Schema {
 public:
  std::vector<ColumnSchema> columns;

  std::size_t feature_count() const;
  std::vector<FeatureInfo> features() const;
  const ColumnSchema& target() const;
  bool has_target() const;

  double standardize(double y) const;
  double destandardize(double y) const;
  /// Maps a scaled threshold back to the raw units of its source column.
  double raw_cut(std::size_t feature, double scaled) const;

  /// Encodes `raw` rows with the fitted transforms. Rows containing a missing
  /// value are rejected; callers drop them first.
  std::vector<double> encode(const RawTable& raw, std::span<const std::size_t> rows) const;
  std::vector<double> encode_target(const RawTable& raw,
                                    std::span<const std::size_t> rows) const;
};

struct Dataset {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major, every entry in [0,1]
  std::vector<double> target;    // standardized
  Schema schema;
  std::vector<std::size_t> feature_origin;  // feature column -> schema column
  std::vector<std::size_t> source_rows;     // dataset row -> raw table row

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
  bool empty() const { return n_rows == 0; }
};

/// Rows of `raw` with no missing cell, in ascending order.
std::vector<std::size_t> complete_rows(const RawTable& raw);

/// Drops incomplete rows, fits one-hot / min-max / target standardization on
/// the rows flagged in `train_mask`, and encodes every surviving row.
Dataset preprocess(const RawTable& raw, const std::vector<bool>& train_mask);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

/// Wraps already-scaled features (row-major, values in [0,1]) and a
/// standardized target. Columns are named f0, f1, ... with an identity
/// transform; the target column is "y" with mean 0 and std 1.
Dataset make_dataset(std::size_t n_features, std::vector<double> features,
                     std::vector<double> target);

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Shuffled split of the complete rows; transforms are fit on the training
/// part only. round(test_fraction * n) rows go to the test part.
SplitResult split(const RawTable& raw, double test_fraction, std::uint64_t seed);

struct FoldPlan {
  int n_folds = 0;
  std::vector<int> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> rows_in(int fold) const;
  std::vector<std::size_t> rows_outside(int fold) const;
};

int default_fold_count(std::size_t n_rows);
FoldPlan make_folds(std::size_t n_rows, int n_folds, std::uint64_t seed);

}  // namespace dln
