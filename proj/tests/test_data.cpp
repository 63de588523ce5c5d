#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "dln/data.hpp"
#include "dln/errors.hpp"

using namespace dln;

namespace {

RawTable table_from(const std::string& text, const ColumnHints& hints = {},
                    TargetPolicy policy = TargetPolicy::required) {
  return make_raw_table(parse_csv(text), hints, policy);
}

std::vector<bool> all_rows(std::size_t n) {
  return std::vector<bool>(n, true);
}

}  // namespace

TEST_CASE("parse_csv handles quoting, CRLF and a byte-order mark") {
  auto doc = parse_csv("\xEF\xBB\xBF" "a,\"b,c\",y\r\n1,\"say \"\"hi\"\"\",3\r\n");
  REQUIRE(doc.header == std::vector<std::string>{"a", "b,c", "y"});
  REQUIRE(doc.rows.size() == 1);
  CHECK(doc.rows[0][1] == "say \"hi\"");
  CHECK(format_csv_field("x,y") == "\"x,y\"");
  CHECK(format_csv_field("plain") == "plain");
}

TEST_CASE("parse_csv rejects arity mismatches and unterminated quotes") {
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n\"1,2\n"), DataError);
  CHECK_THROWS_AS(parse_csv(""), DataError);
}

TEST_CASE("load: header a,b,y with two rows gives two rows and three columns") {
  auto t = table_from("a,b,y\n1,2,3\n4,5,6\n", {{"y", ColumnKind::target}});
  CHECK(t.n_rows == 2);
  CHECK(t.columns.size() == 3);
  CHECK(t.target_index() == 2u);
}

TEST_CASE("load: empty and unparsable continuous cells are missing") {
  auto t = table_from("a,b,y\n,2,3\n4,NA,6\n7,8,9\n",
                      {{"y", ColumnKind::target}, {"a", ColumnKind::continuous}});
  CHECK(t.find("a")->missing(0));
  CHECK(t.find("b")->missing(1));
  CHECK(complete_rows(t) == std::vector<std::size_t>{2});

  auto forced = table_from("a,y\nfoo,1\n2,3\n", {{"y", ColumnKind::target}, {"a", ColumnKind::continuous}});
  CHECK(forced.find("a")->missing(0));
  CHECK_FALSE(forced.find("a")->missing(1));
}

TEST_CASE("load: header-only file yields zero rows and fitting fails later") {
  auto t = table_from("a,y\n", {{"y", ColumnKind::target}});
  CHECK(t.n_rows == 0);
  CHECK_THROWS_AS(preprocess(t, {}), DataError);
}

TEST_CASE("load: target column absent is an error unless optional") {
  CHECK_THROWS_AS(table_from("a,b\n1,2\n", {{"y", ColumnKind::target}}), DataError);
  auto t = table_from("a,b\n1,2\n", {{"y", ColumnKind::target}}, TargetPolicy::optional);
  CHECK_FALSE(t.target_index().has_value());
  CHECK_THROWS_AS(table_from("a,b\n1,2\n", {{"zz", ColumnKind::continuous}, {"b", ColumnKind::target}}),
                  DataError);
}

TEST_CASE("load_csv reports unreadable files as IO errors") {
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", {}), IoError);
}

TEST_CASE("text columns are inferred as categorical") {
  auto t = table_from("c,y\nred,1\nblue,2\n", {{"y", ColumnKind::target}});
  CHECK(t.find("c")->kind == ColumnKind::categorical);
}

TEST_CASE("preprocess: min-max midpoint, one-hot and population standardization") {
  // Rows 0-2 train, row 3 test.
  auto t = table_from("x,c,y\n2,red,1\n4,blue,2\n6,red,3\n4,blue,10\n", {{"y", ColumnKind::target}});
  Dataset d = preprocess(t, {true, true, true, false});
  REQUIRE(d.n_features == 3);  // x, c=blue, c=red
  auto infos = d.schema.features();
  CHECK(infos[1].name == "c=blue");
  CHECK(infos[2].name == "c=red");
  CHECK(d.row(3)[0] == doctest::Approx(0.5));
  CHECK(d.row(3)[1] == 1.0);  // blue -> (1, 0) with sorted categories
  CHECK(d.row(3)[2] == 0.0);
  // Target {1,2,3}: mean 2, population std sqrt(2/3).
  const double sd = std::sqrt(2.0 / 3.0);
  CHECK(d.target[0] == doctest::Approx((1.0 - 2.0) / sd).epsilon(1e-12));
  CHECK(d.target[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(d.target[1] == doctest::Approx(0.0));
  CHECK(d.target[2] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("preprocess: unseen test category maps to all zeros, out-of-range values clip") {
  auto t = table_from("x,c,y\n0,a,1\n10,b,2\n20,a,3\n-5,z,1\n", {{"y", ColumnKind::target}});
  Dataset d = preprocess(t, {true, true, true, false});
  CHECK(d.row(3)[0] == 0.0);
  CHECK(d.row(3)[1] == 0.0);
  CHECK(d.row(3)[2] == 0.0);
}

TEST_CASE("preprocess: constant column maps to 0; constant target is an error") {
  auto t = table_from("x,k,y\n1,5,1\n2,5,2\n3,5,4\n", {{"y", ColumnKind::target}});
  Dataset d = preprocess(t, all_rows(3));
  for (std::size_t r = 0; r < 3; ++r)
    CHECK(d.row(r)[1] == 0.0);
  auto flat = table_from("x,y\n1,3\n2,3\n", {{"y", ColumnKind::target}});
  CHECK_THROWS_AS(preprocess(flat, all_rows(2)), DataError);
}

TEST_CASE("preprocess invariants on a random table") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::string csv = "p,q,cat,y\n";
  const char* cats[] = {"a", "b", "c", "d"};
  for (int i = 0; i < 200; ++i)
    csv += std::to_string(u(rng)) + "," + std::to_string(u(rng)) + "," + cats[rng() % 4] + "," +
           std::to_string(u(rng)) + "\n";
  auto t = table_from(csv, {{"y", ColumnKind::target}});
  std::vector<bool> mask(200);
  for (int i = 0; i < 200; ++i)
    mask[i] = i % 4 != 0;
  Dataset d = preprocess(t, mask);

  double mean = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < d.n_rows; ++r) {
    for (double v : d.row(r)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    double onehot = d.row(r)[2] + d.row(r)[3] + d.row(r)[4] + d.row(r)[5];
    CHECK((onehot == 0.0 || onehot == 1.0));
    if (mask[d.source_rows[r]]) {
      CHECK(onehot == 1.0);
      mean += d.target[r];
      sq += d.target[r] * d.target[r];
      ++n;
    }
  }
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(sq / static_cast<double>(n) - mean * mean) - 1.0) < 1e-9);

  // Stored transforms reproduce the matrix bit-exactly.
  auto again = d.schema.encode(t, d.source_rows);
  CHECK(again == d.features);

  // Scaling is monotone within a column.
  for (std::size_t a = 0; a < d.n_rows; ++a)
    for (std::size_t b = 0; b < d.n_rows; ++b) {
      auto pa = *t.find("p")->numbers[d.source_rows[a]];
      auto pb = *t.find("p")->numbers[d.source_rows[b]];
      if (pa < pb)
        CHECK(d.row(a)[0] <= d.row(b)[0]);
    }
}

TEST_CASE("split: 75/25 sizes, determinism and fit on the training part") {
  std::string csv = "x,y\n";
  for (int i = 0; i < 100; ++i)
    csv += std::to_string(i) + "," + std::to_string(i % 7) + "\n";
  auto t = table_from(csv, {{"y", ColumnKind::target}});
  auto a = split(t, 0.25, 11);
  CHECK(a.train.n_rows == 75);
  CHECK(a.test.n_rows == 25);
  auto b = split(t, 0.25, 11);
  CHECK(a.train.source_rows == b.train.source_rows);
  auto c = split(t, 0.25, 12);
  CHECK(c.train.n_rows == 75);
  CHECK(c.train.source_rows != a.train.source_rows);

  std::set<std::size_t> train(a.train.source_rows.begin(), a.train.source_rows.end());
  for (auto r : a.test.source_rows)
    CHECK(train.count(r) == 0);
  double lo = 1e9, hi = -1e9;
  for (auto r : a.train.source_rows) {
    lo = std::min(lo, static_cast<double>(r));
    hi = std::max(hi, static_cast<double>(r));
  }
  CHECK(a.train.schema.columns[0].min == lo);
  CHECK(a.train.schema.columns[0].max == hi);

  CHECK_THROWS_AS(split(t, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split(t, 1.0, 1), ConfigError);
  auto tiny = table_from("x,y\n1,2\n2,3\n", {{"y", ColumnKind::target}});
  CHECK_THROWS_AS(split(tiny, 0.1, 1), DataError);
}

TEST_CASE("folds: balanced partition and default policy") {
  auto sizes = [](const FoldPlan& p) {
    std::vector<std::size_t> s;
    for (int f = 0; f < p.n_folds; ++f)
      s.push_back(p.rows_in(f).size());
    std::sort(s.begin(), s.end());
    return s;
  };
  CHECK(sizes(make_folds(10, 2, 1)) == std::vector<std::size_t>{5, 5});
  CHECK(sizes(make_folds(11, 4, 1)) == std::vector<std::size_t>{2, 3, 3, 3});

  CHECK(default_fold_count(763) == 4);
  CHECK(default_fold_count(999) == 4);
  CHECK(default_fold_count(1000) == 3);
  CHECK(default_fold_count(5000) == 3);
  CHECK(default_fold_count(5001) == 2);

  auto p = make_folds(37, 3, 9);
  std::vector<int> seen(37, 0);
  for (int f = 0; f < 3; ++f) {
    for (auto r : p.rows_in(f))
      ++seen[r];
    CHECK(p.rows_in(f).size() + p.rows_outside(f).size() == 37);
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));

  CHECK_THROWS_AS(make_folds(10, 1, 0), ConfigError);
  CHECK_THROWS_AS(make_folds(10, 5, 0), ConfigError);
  CHECK_THROWS_AS(make_folds(3, 4, 0), DataError);
}

TEST_CASE("make_dataset wraps scaled features") {
  auto d = make_dataset(2, {0.1, 0.2, 0.3, 0.4}, {1.0, -1.0});
  CHECK(d.n_rows == 2);
  CHECK(d.schema.feature_count() == 2);
  CHECK(d.schema.destandardize(0.5) == 0.5);
  CHECK_THROWS_AS(make_dataset(3, {0.1, 0.2}, {1.0}), ShapeError);
}
