#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "doctest.h"
#include "mbt/dataset.hpp"
#include "mbt/design.hpp"
#include "mbt/errors.hpp"
#include "mbt/rng.hpp"

using namespace mbt;

namespace {

Dataset random_table(Rng& rng, std::size_t n) {
  std::vector<Column> cols;
  Column a{"a", ColumnKind::numeric(), {}};
  Column b{"b", ColumnKind::binary(), {}};
  Column c{"c", ColumnKind::categorical({"lo", "mid", "hi, quoted"}), {}};
  Column d{"d", ColumnKind::numeric(), {}};
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    a.values.push_back(rng.normal(0.0, 1e3));
    b.values.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    c.values.push_back(static_cast<double>(rng.index(3)));
    d.values.push_back(rng.uniform(-1e-7, 1e-7));
    y.push_back(rng.normal());
  }
  cols = {a, b, c, d};
  return Dataset(std::move(cols), std::move(y));
}

Schema schema_of(const Dataset& ds) {
  Schema s;
  for (const auto& c : ds.columns()) s.emplace_back(c.name, c.kind);
  return s;
}

}  // namespace

TEST_SUITE("tabular") {

TEST_CASE("three-row file parses with target") {
  const std::string text = "x1,x3,y\n0.5,1,2\n-1,0,3\n2.25,1,4\n";
  Schema s{{"x1", ColumnKind::numeric()}, {"x3", ColumnKind::binary()}};
  Dataset ds = parse_csv(text, s, "y");
  CHECK(ds.n_rows() == 3);
  CHECK(ds.has_target());
  CHECK(ds.column("x1").values == std::vector<double>{0.5, -1, 2.25});
  CHECK(ds.target() == std::vector<double>{2, 3, 4});
}

TEST_CASE("binary column with value 2 is rejected") {
  const std::string text = "x1,x3,y\n0.5,1,2\n-1,2,3\n";
  Schema s{{"x1", ColumnKind::numeric()}, {"x3", ColumnKind::binary()}};
  try {
    parse_csv(text, s, "y");
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("binary column x3 has value 2 at row") != std::string::npos);
  }
}

TEST_CASE("missing cells and unknown levels are rejected") {
  Schema s{{"x", ColumnKind::categorical({"a", "b"})}};
  CHECK_THROWS_AS(parse_csv("x,y\na,1\n,2\n", s, "y"), MissingValueError);
  CHECK_THROWS_AS(parse_csv("x,y\na,1\nc,2\n", s, "y"), DomainError);
  Dataset ext = parse_csv("x,y\na,1\nc,2\n", s, "y", CsvOptions{true});
  CHECK(ext.column("x").kind.levels == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("csv round trip on random tables") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset ds = random_table(rng, 1 + rng.index(60));
    const Dataset back = parse_csv(to_csv(ds), schema_of(ds), "y");
    CHECK(back == ds);
  }
}

TEST_CASE("split sizes") {
  auto [tr, te] = split_indices(1500, 2.0 / 3.0, 5);
  CHECK(tr.size() == 1000);
  CHECK(te.size() == 500);
  auto [a, b] = split_indices(2, 0.5, 5);
  CHECK(a.size() == 1);
  CHECK(b.size() == 1);
}

TEST_CASE("split is reproducible and recovers the row multiset") {
  auto s1 = split_indices(300, 0.6, 42);
  auto s2 = split_indices(300, 0.6, 42);
  auto s3 = split_indices(300, 0.6, 43);
  CHECK(s1 == s2);
  CHECK(s1 != s3);
  std::vector<std::size_t> all = s1.first;
  all.insert(all.end(), s1.second.begin(), s1.second.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(300);
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  CHECK(all == expect);

  Rng rng(3);
  const Dataset ds = random_table(rng, 90);
  auto [train, test] = train_test_split(ds, 2.0 / 3.0, 9);
  std::multiset<double> in(ds.column("a").values.begin(), ds.column("a").values.end());
  std::multiset<double> out(train.column("a").values.begin(), train.column("a").values.end());
  out.insert(test.column("a").values.begin(), test.column("a").values.end());
  CHECK(in == out);
}

TEST_CASE("design: numeric, categorical and spline columns") {
  Column x{"x", ColumnKind::numeric(), {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}};
  Column c{"c", ColumnKind::categorical({"a", "b", "c"}), {0, 1, 2, 0, 1, 2}};
  Dataset ds({x, c});

  Design d1 = build_design(ds, FeatureRoles({{true, true}, {false, true}}));
  REQUIRE(d1.X.cols() == 2);
  CHECK(d1.layout.columns()[0].term == Term::kIntercept);
  CHECK(d1.X.col(1)(3) == 3.0);

  Design d2 = build_design(ds, FeatureRoles({{false, true}, {true, true}}));
  REQUIRE(d2.X.cols() == 3);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(d2.X(i, 1) == (c.values[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0));
    CHECK(d2.X(i, 2) == (c.values[static_cast<std::size_t>(i)] == 2 ? 1.0 : 0.0));
    CHECK(d2.X(i, 1) + d2.X(i, 2) <= 1.0);
  }

  Design d3 = build_design(ds, FeatureRoles({{true, true}, {false, true}}),
                           BasisSpec{Expansion::kBSpline, 5});
  CHECK(d3.X.cols() == 6);
  for (std::size_t k = 1; k < d3.layout.columns().size(); ++k) {
    CHECK(d3.layout.columns()[k].feature == 0);
    CHECK(d3.layout.columns()[k].term == Term::kSpline);
  }
}

TEST_CASE("design provenance covers every column") {
  Rng rng(5);
  const Dataset ds = random_table(rng, 50);
  Design d = build_design(ds, FeatureRoles::all(ds.n_features()));
  CHECK(static_cast<std::size_t>(d.X.cols()) == d.layout.size());
  for (std::size_t k = 1; k < d.layout.size(); ++k) {
    const int f = d.layout.columns()[k].feature;
    CHECK(f >= 0);
    CHECK(f < static_cast<int>(ds.n_features()));
  }
}

TEST_CASE("single observed level drops the feature") {
  Column c{"c", ColumnKind::categorical({"a", "b"}), {0, 0, 0}};
  Column x{"x", ColumnKind::numeric(), {1, 2, 3}};
  Design d = build_design(Dataset({c, x}), FeatureRoles::all(2));
  CHECK(d.X.cols() == 2);
  CHECK(d.layout.dropped_features() == std::vector<std::string>{"c"});
}

}  // TEST_SUITE
