#pragma once

// Brute-force split search used to check the incremental sweep.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "mbt/rng.hpp"
#include "mbt/tree.hpp"
#include "oracles.hpp"

namespace sweep_oracle {

using namespace mbt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Random node data: two numeric features (one heavily tied), one
// four-level categorical, and a nonlinear target.
inline Dataset random_node_data(Rng& rng, std::size_t n) {
  Column a{"a", ColumnKind::numeric(), {}};
  Column b{"b", ColumnKind::numeric(), {}};
  Column c{"c", ColumnKind::categorical({"p", "q", "r", "s"}), {}};
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    a.values.push_back(rng.uniform(-1, 1));
    b.values.push_back(std::round(rng.uniform(0, 6)));
    c.values.push_back(static_cast<double>(rng.index(4)));
    const double bump = a.values.back() > 0.2 ? 2.0 * a.values.back() : -a.values.back();
    y.push_back(bump + 0.5 * b.values.back() * (c.values.back() == 1 ? 1 : -1) + rng.normal());
  }
  return Dataset({a, b, c}, y);
}

struct Fixture {
  Dataset ds;
  DesignLayout layout;
  MatrixXd X;
  std::vector<double> y;

  explicit Fixture(Dataset d) : ds(std::move(d)), y(ds.target()) {
    layout = make_layout(ds, FeatureRoles::all(ds.n_features()), BasisSpec{});
    X = layout.matrix(ds);
  }
  NodeView view() const {
    std::vector<std::size_t> rows(ds.n_rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return NodeView{&ds, &X, &y, rows};
  }
};

inline double rows_sse(const Fixture& f, const std::vector<std::size_t>& rows) {
  MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), f.X.cols());
  VectorXd ys(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Xs.row(static_cast<Eigen::Index>(k)) = f.X.row(static_cast<Eigen::Index>(rows[k]));
    ys(static_cast<Eigen::Index>(k)) = f.y[rows[k]];
  }
  return oracle::refit_sse(Xs, ys);
}

// Minimal child SSE over every admissible split of one feature, each
// candidate refit from scratch.
inline double naive_best(const Fixture& f, std::size_t feature, std::size_t min_node) {
  const Column& col = f.ds.column(feature);
  const std::size_t n = f.ds.n_rows();
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](auto&& goes_left) {
    std::vector<std::size_t> l;
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < n; ++i) (goes_left(i) ? l : r).push_back(i);
    if (l.size() < min_node || r.size() < min_node) return;
    best = std::min(best, rows_sse(f, l) + rows_sse(f, r));
  };
  if (col.kind.is_categorical()) {
    std::vector<int> seen;
    for (double v : col.values) seen.push_back(static_cast<int>(v));
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    const std::size_t L = seen.size();
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << L); ++mask) {
      std::set<int> left;
      for (std::size_t s = 0; s < L; ++s) {
        if (mask >> s & 1) left.insert(seen[s]);
      }
      consider([&](std::size_t i) { return left.count(static_cast<int>(col.values[i])) > 0; });
    }
  } else {
    std::vector<double> v = col.values;
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double t = 0.5 * (v[k] + v[k + 1]);
      consider([&](std::size_t i) { return col.values[i] <= t; });
    }
  }
  return best;
}

}  // namespace sweep_oracle
