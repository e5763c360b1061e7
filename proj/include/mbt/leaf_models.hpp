#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mbt/design.hpp"

namespace mbt {

enum class LeafKind { kOls, kRidge, kLassoBic, kBSplineLinear, kPolyLasso };

const char* leaf_kind_name(LeafKind kind);
LeafKind parse_leaf_kind(const std::string& name);

struct LeafModelSpec {
  LeafKind kind = LeafKind::kOls;
  double lambda = 0.0;           // ridge penalty
  std::optional<int> df_cap;     // lasso: cap on effective df (intercept counts)
  int knots_per_feature = 5;     // B-spline knots
  int degree = 2;                // polynomial degree (only 2 supported)

  static LeafModelSpec ols() { return {}; }
  static LeafModelSpec ridge(double lambda);
  static LeafModelSpec lasso_bic(std::optional<int> df_cap = std::nullopt);
  static LeafModelSpec bspline(int knots);
  static LeafModelSpec poly_lasso(std::optional<int> df_cap = std::nullopt);

  void validate() const;
  BasisSpec basis() const;
  bool is_lasso() const {
    return kind == LeafKind::kLassoBic || kind == LeafKind::kPolyLasso;
  }

  bool operator==(const LeafModelSpec&) const = default;
};

struct FittedLeafModel {
  LeafModelSpec spec;
  Eigen::VectorXd coefficients;  // one per design column, 0 where dropped
  std::vector<bool> active;      // design columns kept after the rank check
  double sse = 0.0;
  std::size_t n_obs = 0;
  double effective_df = 1.0;
  std::vector<DesignColumn> provenance;  // empty when fit on a bare matrix

  std::size_t n_active() const;
};

// Least squares by Householder QR. Columns that are (numerically) linear
// combinations of columns to their left are dropped and get coefficient 0.
FittedLeafModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Minimizes SSE + lambda * |theta|^2 over every column that is not constant;
// a constant column (the intercept) is never penalized.
FittedLeafModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double lambda);

// Lasso at a single penalty (objective SSE/(2n) + lambda*|theta|_1 on
// standardized columns), solved by coordinate descent from zero.
FittedLeafModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double lambda);

// Lasso path with BIC selection. Each path point is scored by the
// least-squares refit on its active set, and that refit is returned. When
// `df_cap` is set the returned model has effective_df (intercept included)
// no larger than the cap.
FittedLeafModel fit_lasso_bic(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y,
                              std::optional<int> df_cap = std::nullopt);

// Dispatches on `spec`. X must already be expanded for spline/poly kinds.
FittedLeafModel fit_leaf(const LeafModelSpec& spec, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y);

Eigen::VectorXd predict(const FittedLeafModel& model, const Eigen::MatrixXd& X);

double sum_squared_residuals(const FittedLeafModel& model,
                             const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y);

// Per-observation scores (y_i - yhat_i) * X_i restricted to the model's
// active design columns. `columns` lists their design indices.
struct ScoreMatrix {
  Eigen::MatrixXd scores;
  std::vector<int> columns;
  std::vector<DesignColumn> provenance;
};

ScoreMatrix score_matrix(const FittedLeafModel& model, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y);

// Moment sums of (shifted design row z, target y) for a set of rows. Enough
// to solve least squares, ridge and lasso without touching the rows again,
// which is what makes threshold sweeps incremental.
class SufficientStats {
 public:
  SufficientStats() = default;
  explicit SufficientStats(Eigen::Index q);

  void add(const double* z, double y);
  void remove(const double* z, double y);
  SufficientStats& operator+=(const SufficientStats& other);
  SufficientStats& operator-=(const SufficientStats& other);

  Eigen::Index dim() const { return sum_z_.size(); }
  double n() const { return n_; }
  const Eigen::VectorXd& sum_z() const { return sum_z_; }
  const Eigen::MatrixXd& zz() const { return zz_; }
  const Eigen::VectorXd& zy() const { return zy_; }
  double sum_y() const { return sum_y_; }
  double yy() const { return yy_; }

 private:
  double n_ = 0;
  Eigen::VectorXd sum_z_;
  Eigen::MatrixXd zz_;  // lower triangle maintained, mirrored on demand
  Eigen::VectorXd zy_;
  double sum_y_ = 0;
  double yy_ = 0;
};

// Result of a moment-based fit on design columns 1..q-1 plus an intercept
// (column 0 of the shifted design is the constant 1).
struct MomentFit {
  Eigen::VectorXd slopes;  // coefficients on the shifted columns 1..q-1
  double intercept = 0.0;  // on the shifted design
  std::vector<bool> active;
  double sse = 0.0;
  double effective_df = 1.0;
};

MomentFit fit_moments(const LeafModelSpec& spec, const SufficientStats& stats);

}  // namespace mbt
