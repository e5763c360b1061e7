#include "mbt/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mbt/errors.hpp"

namespace mbt {

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = h - static_cast<double>(lo);
  if (w == 0.0) return sorted[lo];
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

HatBasis::HatBasis(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw DataError("degenerate spline feature");
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1])) {
      throw DataError("spline knots must be strictly increasing");
    }
  }
}

HatBasis HatBasis::from_quantiles(std::span<const double> x, int n_knots) {
  if (n_knots < 2) throw ConfigError("a spline basis needs at least 2 knots");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty() || sorted.front() == sorted.back()) {
    throw DataError("degenerate spline feature");
  }
  std::vector<double> knots;
  for (int j = 0; j < n_knots; ++j) {
    const double p = static_cast<double>(j) / (n_knots - 1);
    const double q = j == n_knots - 1 ? sorted.back()
                                      : quantile_sorted(sorted, p);
    if (knots.empty() || q > knots.back()) knots.push_back(q);
  }
  return HatBasis(std::move(knots));
}

void HatBasis::evaluate(double x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t m = knots_.size();
  // Segment [knots[s], knots[s+1]] containing x; boundary segments extend.
  std::size_t s;
  if (x <= knots_[1]) {
    s = 0;
  } else if (x >= knots_[m - 2]) {
    s = m - 2;
  } else {
    s = static_cast<std::size_t>(
            std::upper_bound(knots_.begin(), knots_.end(), x) -
            knots_.begin()) - 1;
  }
  const double t = (x - knots_[s]) / (knots_[s + 1] - knots_[s]);
  out[s] = 1.0 - t;
  out[s + 1] = t;
}

Eigen::MatrixXd HatBasis::evaluate(std::span<const double> x) const {
  Eigen::MatrixXd B(static_cast<Eigen::Index>(x.size()),
                    static_cast<Eigen::Index>(knots_.size()));
  std::vector<double> row(knots_.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    evaluate(x[i], row);
    for (std::size_t j = 0; j < row.size(); ++j) {
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return B;
}

Eigen::MatrixXd bspline_basis(std::span<const double> x, int n_knots) {
  return HatBasis::from_quantiles(x, n_knots).evaluate(x);
}

const char* term_name(Term term) {
  switch (term) {
    case Term::kIntercept:
      return "intercept";
    case Term::kLinear:
      return "linear";
    case Term::kDummy:
      return "dummy";
    case Term::kSpline:
      return "spline";
    case Term::kSquare:
      return "square";
  }
  return "?";
}

DesignLayout::DesignLayout(std::vector<FeatureBasis> bases,
                           std::vector<std::string> dropped_features)
    : bases_(std::move(bases)), dropped_(std::move(dropped_features)) {
  columns_.push_back({-1, Term::kIntercept, 0, "(intercept)"});
  for (const auto& b : bases_) {
    if (b.kind == Kind::kCategorical) {
      for (std::size_t l = 1; l < b.levels.size(); ++l) {
        columns_.push_back({b.feature, Term::kDummy, static_cast<int>(l),
                            b.name + "=" + b.levels[l]});
      }
    } else if (!b.knots.empty()) {
      for (std::size_t k = 0; k < b.knots.size(); ++k) {
        columns_.push_back({b.feature, Term::kSpline, static_cast<int>(k),
                            b.name + ".bs" + std::to_string(k)});
      }
    } else {
      columns_.push_back({b.feature, Term::kLinear, 0, b.name});
      if (b.square) {
        columns_.push_back({b.feature, Term::kSquare, 0, b.name + "^2"});
      }
    }
  }
}

Eigen::MatrixXd DesignLayout::matrix(const Dataset& ds) const {
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(columns_.size()));
  X.col(0).setOnes();
  Eigen::Index c = 1;
  for (const auto& b : bases_) {
    const Column& col = ds.column(b.name);
    if (b.kind == Kind::kCategorical) {
      if (!col.kind.is_categorical()) {
        throw SchemaError("column " + b.name + " must be categorical");
      }
      // Map the dataset's level codes to layout dummy positions.
      std::vector<int> dummy_of(col.kind.levels.size(), -1);
      for (std::size_t l = 0; l < col.kind.levels.size(); ++l) {
        auto it = std::find(b.levels.begin(), b.levels.end(),
                            col.kind.levels[l]);
        if (it != b.levels.end() && it != b.levels.begin()) {
          dummy_of[l] = static_cast<int>(it - b.levels.begin()) - 1;
        }
      }
      const auto width = static_cast<Eigen::Index>(b.levels.size() - 1);
      X.middleCols(c, width).setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const int d = dummy_of[static_cast<std::size_t>(col.values[i])];
        if (d >= 0) X(i, c + d) = 1.0;
      }
      c += width;
    } else if (!b.knots.empty()) {
      if (col.kind.is_categorical()) {
        throw SchemaError("column " + b.name + " must be numeric");
      }
      HatBasis basis(b.knots);
      const auto width = static_cast<Eigen::Index>(b.knots.size());
      X.middleCols(c, width) = basis.evaluate(col.values);
      c += width;
    } else {
      if (col.kind.is_categorical()) {
        throw SchemaError("column " + b.name + " must be numeric");
      }
      for (Eigen::Index i = 0; i < n; ++i) X(i, c) = col.values[i];
      ++c;
      if (b.square) {
        for (Eigen::Index i = 0; i < n; ++i) {
          X(i, c) = col.values[i] * col.values[i];
        }
        ++c;
      }
    }
  }
  return X;
}

DesignLayout make_layout(const Dataset& ds, const FeatureRoles& roles,
                         const BasisSpec& spec) {
  if (roles.size() != ds.n_features()) {
    throw ConfigError("feature roles do not match the dataset");
  }
  std::vector<FeatureBasis> bases;
  std::vector<std::string> dropped;
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    if (!roles[j].regression) continue;
    const Column& col = ds.column(j);
    FeatureBasis b;
    b.feature = static_cast<int>(j);
    b.name = col.name;
    b.kind = col.kind.kind;
    if (col.kind.is_categorical()) {
      std::set<double> observed(col.values.begin(), col.values.end());
      if (observed.size() < 2) {
        dropped.push_back(col.name);
        continue;
      }
      b.levels = col.kind.levels;
    } else if (col.kind.kind == Kind::kNumeric) {
      if (spec.expansion == Expansion::kBSpline) {
        b.knots = HatBasis::from_quantiles(col.values, spec.n_knots).knots();
      } else if (spec.expansion == Expansion::kPolynomial) {
        b.square = true;
      }
    }
    bases.push_back(std::move(b));
  }
  return DesignLayout(std::move(bases), std::move(dropped));
}

Design build_design(const Dataset& ds, const FeatureRoles& roles,
                    const BasisSpec& spec) {
  bool any = false;
  for (const auto& r : roles.roles()) any = any || r.regression;
  if (!any) throw ConfigError("no regression-usable feature");
  DesignLayout layout = make_layout(ds, roles, spec);
  Eigen::MatrixXd X = layout.matrix(ds);
  return {std::move(X), std::move(layout)};
}

}  // namespace mbt
