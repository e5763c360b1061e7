#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mbt/dataset.hpp"

namespace mbt {

// Degree-1 B-spline (hat function) basis on a fixed knot sequence. Outside
// [first knot, last knot] the two boundary hats extend linearly, so the basis
// still sums to one.
class HatBasis {
 public:
  HatBasis() = default;
  explicit HatBasis(std::vector<double> knots);

  // Knots at equidistant empirical quantiles of `x`, min and max included.
  // Coinciding quantiles are merged, so tied data can yield fewer knots.
  static HatBasis from_quantiles(std::span<const double> x, int n_knots);

  const std::vector<double>& knots() const { return knots_; }
  std::size_t size() const { return knots_.size(); }

  void evaluate(double x, std::span<double> out) const;
  Eigen::MatrixXd evaluate(std::span<const double> x) const;

 private:
  std::vector<double> knots_;
};

Eigen::MatrixXd bspline_basis(std::span<const double> x, int n_knots);

// Empirical quantile with linear interpolation between order statistics.
double quantile_sorted(std::span<const double> sorted, double prob);

enum class Term { kIntercept, kLinear, kDummy, kSpline, kSquare };

const char* term_name(Term term);

// Provenance of one design column.
struct DesignColumn {
  int feature = -1;  // index into the source dataset, -1 for the intercept
  Term term = Term::kIntercept;
  int index = 0;     // dummy: level code; spline: basis index
  std::string label;

  bool operator==(const DesignColumn&) const = default;
};

enum class Expansion { kLinear, kBSpline, kPolynomial };

struct BasisSpec {
  Expansion expansion = Expansion::kLinear;
  int n_knots = 5;
};

// How a single regressor is expanded into design columns. Kept with the
// layout so new data (prediction, child nodes) is encoded identically.
struct FeatureBasis {
  int feature = -1;
  std::string name;
  Kind kind = Kind::kNumeric;
  std::vector<std::string> levels;  // categorical: every declared level
  std::vector<double> knots;        // spline knots when expanded
  bool square = false;              // polynomial expansion adds x^2

  bool operator==(const FeatureBasis&) const = default;
};

class DesignLayout {
 public:
  DesignLayout() = default;
  DesignLayout(std::vector<FeatureBasis> bases,
               std::vector<std::string> dropped_features);

  const std::vector<DesignColumn>& columns() const { return columns_; }
  const std::vector<FeatureBasis>& bases() const { return bases_; }
  const std::vector<std::string>& dropped_features() const {
    return dropped_;
  }
  std::size_t size() const { return columns_.size(); }

  // Encodes `ds` by feature name. Categorical levels are matched by name;
  // a level the layout has never seen gets all-zero dummies.
  Eigen::MatrixXd matrix(const Dataset& ds) const;

  bool operator==(const DesignLayout&) const = default;

 private:
  std::vector<FeatureBasis> bases_;
  std::vector<std::string> dropped_;
  std::vector<DesignColumn> columns_;
};

DesignLayout make_layout(const Dataset& ds, const FeatureRoles& roles,
                         const BasisSpec& spec);

struct Design {
  Eigen::MatrixXd X;
  DesignLayout layout;
};

// Intercept first, then each regression-usable feature in declaration order:
// numeric/binary raw (or expanded), categorical as reference-coded dummies
// against the first declared level. A categorical feature with a single
// observed level contributes no columns and is listed in
// `dropped_features()`.
Design build_design(const Dataset& ds, const FeatureRoles& roles,
                    const BasisSpec& spec = {});

}  // namespace mbt
