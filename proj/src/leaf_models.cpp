#include "mbt/leaf_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mbt/errors.hpp"

namespace mbt {
namespace {

// Column j is dropped when its residual norm after projection onto the kept
// columns is below this fraction of its own norm. The moment solver uses the
// square of it on squared norms.
constexpr double kDropTol = 1e-6;
constexpr double kDropTolSq = kDropTol * kDropTol;

constexpr int kLassoPathLength = 100;
constexpr double kLassoPathFloor = 1e-4;
constexpr double kLassoTol = 1e-7;
constexpr int kLassoMaxSweeps = 100000;

// Left-to-right rank screen by two-pass Gram-Schmidt.
std::vector<bool> screen_columns(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  std::vector<bool> keep(static_cast<std::size_t>(q), false);
  Eigen::MatrixXd Q(n, q);
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < q; ++j) {
    Eigen::VectorXd v = X.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (rank > 0) {
        v -= Q.leftCols(rank) * (Q.leftCols(rank).transpose() * v);
      }
    }
    const double norm = v.norm();
    if (norm <= kDropTol * norm0) continue;
    Q.col(rank++) = v / norm;
    keep[static_cast<std::size_t>(j)] = true;
  }
  return keep;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X,
                               const std::vector<bool>& keep) {
  Eigen::Index k = 0;
  for (bool b : keep) k += b ? 1 : 0;
  Eigen::MatrixXd out(X.rows(), k);
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (keep[static_cast<std::size_t>(j)]) out.col(c++) = X.col(j);
  }
  return out;
}

Eigen::VectorXd scatter(const Eigen::VectorXd& packed,
                        const std::vector<bool>& keep) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keep.size()));
  Eigen::Index c = 0;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) out(static_cast<Eigen::Index>(j)) = packed(c++);
  }
  return out;
}

bool is_constant_column(const Eigen::MatrixXd& X, Eigen::Index j) {
  if (X.rows() == 0) return true;
  return (X.col(j).array() == X(0, j)).all();
}

void require_observations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() < 1) throw NumericalError("cannot fit a model on zero rows");
  if (X.rows() != y.size()) {
    throw ConfigError("design and target lengths differ");
  }
}

void require_intercept(const Eigen::MatrixXd& X) {
  if (X.cols() < 1 || !(X.col(0).array() == 1.0).all()) {
    throw ConfigError("lasso fits expect an intercept in design column 0");
  }
}

FittedLeafModel finish(LeafModelSpec spec, Eigen::VectorXd coef,
                       std::vector<bool> active, double effective_df,
                       const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  FittedLeafModel m;
  m.spec = spec;
  m.coefficients = std::move(coef);
  m.active = std::move(active);
  m.n_obs = static_cast<std::size_t>(X.rows());
  m.effective_df = effective_df;
  m.sse = (y - X * m.coefficients).squaredNorm();
  return m;
}

// Centered moments on the non-intercept columns of a shifted design.
struct Centered {
  Eigen::MatrixXd C;   // (q-1) x (q-1)
  Eigen::VectorXd Cy;  // q-1
  Eigen::VectorXd mean;
  Eigen::VectorXd raw_diag;  // uncentered diagonal, scale for the rank check
  double syy = 0;
  double ybar = 0;
  double n = 0;
};

Centered center(const SufficientStats& s) {
  Centered c;
  const Eigen::Index p = s.dim() - 1;
  c.n = s.n();
  c.mean = s.sum_z().tail(p) / c.n;
  c.ybar = s.sum_y() / c.n;
  Eigen::MatrixXd zz = s.zz().selfadjointView<Eigen::Lower>();
  c.C = zz.bottomRightCorner(p, p) - c.n * c.mean * c.mean.transpose();
  c.Cy = s.zy().tail(p) - c.n * c.mean * c.ybar;
  c.raw_diag = zz.diagonal().tail(p);
  c.syy = s.yy() - c.n * c.ybar * c.ybar;
  return c;
}

// Left-to-right screen on centered moments: column j is kept when its
// Schur complement against earlier kept columns stays above tolerance.
std::vector<bool> screen_moments(const Centered& c) {
  const Eigen::Index p = c.C.rows();
  std::vector<bool> keep(static_cast<std::size_t>(p), false);
  std::vector<Eigen::Index> kept;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double diag = c.C(j, j);
    const double scale = std::max(c.raw_diag(j), diag);
    if (!(diag > 0.0) || scale <= 0.0) continue;
    const auto r = static_cast<Eigen::Index>(kept.size());
    Eigen::VectorXd l(r);
    for (Eigen::Index a = 0; a < r; ++a) {
      double v = c.C(j, kept[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < a; ++b) v -= L(a, b) * l(b);
      l(a) = v / L(a, a);
    }
    const double d = diag - l.squaredNorm();
    if (d <= kDropTolSq * scale) continue;
    for (Eigen::Index b = 0; b < r; ++b) L(r, b) = l(b);
    L(r, r) = std::sqrt(d);
    kept.push_back(j);
    keep[static_cast<std::size_t>(j)] = true;
  }
  return keep;
}

Eigen::MatrixXd sub_matrix(const Eigen::MatrixXd& A,
                           const std::vector<Eigen::Index>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      out(a, b) = A(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

Eigen::VectorXd sub_vector(const Eigen::VectorXd& v,
                           const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(idx[a]);
  return out;
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

// Coordinate descent on a unit-diagonal Gram matrix R with right-hand side r,
// warm-started from beta.
void lasso_cd(const Eigen::MatrixXd& R, const Eigen::VectorXd& r, double lambda,
              Eigen::VectorXd& beta) {
  const Eigen::Index p = R.rows();
  Eigen::VectorXd grad = r - R * beta;
  for (int sweep = 0; sweep < kLassoMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = beta(j);
      const double updated = soft_threshold(grad(j) + R(j, j) * old, lambda) / R(j, j);
      const double delta = updated - old;
      if (delta != 0.0) {
        beta(j) = updated;
        grad -= R.col(j) * delta;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < kLassoTol) return;
  }
}

struct LassoProblem {
  std::vector<Eigen::Index> idx;  // kept centered columns
  Eigen::MatrixXd C;              // centered moments on idx
  Eigen::VectorXd Cy;
  Eigen::VectorXd scale;          // column standard deviations
  Eigen::MatrixXd R;              // standardized Gram / n
  Eigen::VectorXd r;
};

LassoProblem make_lasso_problem(const Centered& c, const std::vector<bool>& keep) {
  LassoProblem lp;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) lp.idx.push_back(static_cast<Eigen::Index>(j));
  }
  lp.C = sub_matrix(c.C, lp.idx);
  lp.Cy = sub_vector(c.Cy, lp.idx);
  lp.scale = (lp.C.diagonal() / c.n).array().sqrt();
  const Eigen::VectorXd inv = lp.scale.cwiseInverse();
  lp.R = inv.asDiagonal() * lp.C * inv.asDiagonal() / c.n;
  lp.r = inv.asDiagonal() * lp.Cy / c.n;
  return lp;
}

double moment_sse(const LassoProblem& lp, const Centered& c,
                  const Eigen::VectorXd& b) {
  const double sse = c.syy - 2.0 * b.dot(lp.Cy) + b.dot(lp.C * b);
  return std::max(sse, 0.0);
}

MomentFit assemble(const Centered& c, const std::vector<Eigen::Index>& idx,
                   const Eigen::VectorXd& b, double sse, double df) {
  MomentFit f;
  const Eigen::Index p = c.C.rows();
  f.slopes = Eigen::VectorXd::Zero(p);
  f.active.assign(static_cast<std::size_t>(p + 1), false);
  f.active[0] = true;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    f.slopes(idx[a]) = b(static_cast<Eigen::Index>(a));
    f.active[static_cast<std::size_t>(idx[a] + 1)] = true;
  }
  f.intercept = c.ybar - c.mean.dot(f.slopes);
  f.sse = sse;
  f.effective_df = df;
  return f;
}

// Least-squares coefficients (raw scale) on the non-zero entries of `beta`.
Eigen::VectorXd refit_support(const LassoProblem& lp, const Eigen::VectorXd& beta) {
  std::vector<Eigen::Index> on;
  for (Eigen::Index a = 0; a < beta.size(); ++a) {
    if (beta(a) != 0.0) on.push_back(a);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(beta.size());
  if (on.empty()) return out;
  const Eigen::MatrixXd C = sub_matrix(lp.C, on);
  const Eigen::VectorXd Cy = sub_vector(lp.Cy, on);
  const Eigen::VectorXd b = C.ldlt().solve(Cy);
  for (std::size_t k = 0; k < on.size(); ++k) out(on[k]) = b(static_cast<Eigen::Index>(k));
  return out;
}

MomentFit solve_lasso_path(const Centered& c, const std::vector<bool>& keep,
                           std::optional<int> df_cap,
                           std::optional<double> fixed_lambda) {
  LassoProblem lp = make_lasso_problem(c, keep);
  const auto p = static_cast<Eigen::Index>(lp.idx.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto to_raw = [&](const Eigen::VectorXd& bt) {
    return Eigen::VectorXd(bt.cwiseQuotient(lp.scale));
  };
  auto nnz = [](const Eigen::VectorXd& v) {
    return static_cast<int>((v.array() != 0.0).count());
  };
  if (fixed_lambda) {
    if (p > 0) lasso_cd(lp.R, lp.r, *fixed_lambda, beta);
    Eigen::VectorXd b = to_raw(beta);
    // Report only the coefficients the penalty left non-zero as active.
    std::vector<Eigen::Index> idx;
    Eigen::VectorXd packed(p);
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < p; ++a) {
      if (b(a) != 0.0) {
        idx.push_back(lp.idx[static_cast<std::size_t>(a)]);
        packed(k++) = b(a);
      }
    }
    return assemble(c, idx, packed.head(k), moment_sse(lp, c, b), 1.0 + k);
  }

  const double lambda_max = p > 0 ? lp.r.cwiseAbs().maxCoeff() : 0.0;
  const double log_n = std::log(c.n);
  const double sse_floor = 1e-300 + 1e-20 * std::max(c.syy, 0.0);
  double best_bic = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(p);
  bool found = false;
  const int steps = lambda_max > 0.0 ? kLassoPathLength : 1;
  for (int s = 0; s < steps; ++s) {
    double lambda = 0.0;
    if (lambda_max > 0.0) {
      const double frac = static_cast<double>(s) / (kLassoPathLength - 1);
      lambda = lambda_max * std::pow(kLassoPathFloor, frac);
      if (s == 0) {
        beta.setZero();  // exact zero at lambda_max by construction
      } else {
        lasso_cd(lp.R, lp.r, lambda, beta);
      }
    }
    const int df = 1 + nnz(beta);
    if (df_cap && df > *df_cap) continue;
    // Scored and returned as the least-squares refit on the active set.
    const Eigen::VectorXd refit = refit_support(lp, beta);
    const double sse = std::max(moment_sse(lp, c, refit), sse_floor);
    const double bic = c.n * std::log(sse / c.n) + df * log_n;
    if (!found || bic < best_bic) {
      best_bic = bic;
      best = refit;
      found = true;
    }
  }
  if (!found) best.setZero();
  const Eigen::VectorXd& b = best;
  std::vector<Eigen::Index> idx;
  Eigen::VectorXd packed(p);
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < p; ++a) {
    if (b(a) != 0.0) {
      idx.push_back(lp.idx[static_cast<std::size_t>(a)]);
      packed(k++) = b(a);
    }
  }
  return assemble(c, idx, packed.head(k), moment_sse(lp, c, b), 1.0 + k);
}

SufficientStats stats_of(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y) {
  SufficientStats s(Z.cols());
  Eigen::VectorXd row(Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    row = Z.row(i).transpose();
    s.add(row.data(), y(i));
  }
  return s;
}

// Lasso fits go through the moment solver on a design shifted by column means.
FittedLeafModel fit_lasso_impl(const LeafModelSpec& spec,
                               const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y,
                               std::optional<double> fixed_lambda) {
  require_observations(X, y);
  require_intercept(X);
  if (X.rows() < 3) throw NumericalError("lasso fits need more than 2 rows");
  Eigen::VectorXd mu = X.colwise().mean().transpose();
  mu(0) = 0.0;
  const double y_shift = y.mean();
  Eigen::MatrixXd Z = X.rowwise() - mu.transpose();
  Eigen::VectorXd ys = y.array() - y_shift;
  const SufficientStats stats = stats_of(Z, ys);
  const Centered c = center(stats);
  const std::vector<bool> keep = screen_moments(c);
  MomentFit f = solve_lasso_path(c, keep, spec.df_cap, fixed_lambda);
  Eigen::VectorXd coef(X.cols());
  coef(0) = y_shift + f.intercept - mu.tail(X.cols() - 1).dot(f.slopes);
  coef.tail(X.cols() - 1) = f.slopes;
  return finish(spec, std::move(coef), std::move(f.active), f.effective_df, X, y);
}

}  // namespace

const char* leaf_kind_name(LeafKind kind) {
  switch (kind) {
    case LeafKind::kOls:
      return "ols";
    case LeafKind::kRidge:
      return "ridge";
    case LeafKind::kLassoBic:
      return "lasso_bic";
    case LeafKind::kBSplineLinear:
      return "bspline";
    case LeafKind::kPolyLasso:
      return "poly_lasso";
  }
  return "?";
}

LeafKind parse_leaf_kind(const std::string& name) {
  if (name == "ols") return LeafKind::kOls;
  if (name == "ridge") return LeafKind::kRidge;
  if (name == "lasso_bic" || name == "lasso") return LeafKind::kLassoBic;
  if (name == "bspline") return LeafKind::kBSplineLinear;
  if (name == "poly_lasso") return LeafKind::kPolyLasso;
  throw ConfigError("unknown leaf model '" + name + "'");
}

LeafModelSpec LeafModelSpec::ridge(double lambda) {
  LeafModelSpec s;
  s.kind = LeafKind::kRidge;
  s.lambda = lambda;
  s.validate();
  return s;
}

LeafModelSpec LeafModelSpec::lasso_bic(std::optional<int> df_cap) {
  LeafModelSpec s;
  s.kind = LeafKind::kLassoBic;
  s.df_cap = df_cap;
  s.validate();
  return s;
}

LeafModelSpec LeafModelSpec::bspline(int knots) {
  LeafModelSpec s;
  s.kind = LeafKind::kBSplineLinear;
  s.knots_per_feature = knots;
  s.validate();
  return s;
}

LeafModelSpec LeafModelSpec::poly_lasso(std::optional<int> df_cap) {
  LeafModelSpec s;
  s.kind = LeafKind::kPolyLasso;
  s.df_cap = df_cap;
  s.validate();
  return s;
}

void LeafModelSpec::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("ridge lambda must be >= 0");
  if (df_cap && *df_cap < 1) throw ConfigError("lasso df cap must be >= 1");
  if (knots_per_feature < 2) {
    throw ConfigError("B-spline leaves need at least 2 knots per feature");
  }
  if (degree != 2) throw ConfigError("only degree-2 polynomials are supported");
}

BasisSpec LeafModelSpec::basis() const {
  switch (kind) {
    case LeafKind::kBSplineLinear:
      return {Expansion::kBSpline, knots_per_feature};
    case LeafKind::kPolyLasso:
      return {Expansion::kPolynomial, knots_per_feature};
    default:
      return {Expansion::kLinear, knots_per_feature};
  }
}

std::size_t FittedLeafModel::n_active() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

FittedLeafModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require_observations(X, y);
  std::vector<bool> keep = screen_columns(X);
  Eigen::MatrixXd Xk = select_columns(X, keep);
  Eigen::VectorXd packed = Eigen::VectorXd::Zero(Xk.cols());
  if (Xk.cols() > 0) packed = Xk.householderQr().solve(y);
  const double df = static_cast<double>(Xk.cols());
  return finish(LeafModelSpec::ols(), scatter(packed, keep), keep, df, X, y);
}

FittedLeafModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("ridge lambda must be >= 0");
  if (lambda == 0.0) {
    FittedLeafModel m = fit_linear(X, y);
    m.spec = LeafModelSpec::ridge(0.0);
    return m;
  }
  require_observations(X, y);
  std::vector<bool> keep = screen_columns(X);
  Eigen::MatrixXd Xk = select_columns(X, keep);
  const Eigen::Index n = Xk.rows();
  const Eigen::Index k = Xk.cols();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + k, k);
  A.topRows(n) = Xk;
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!keep[static_cast<std::size_t>(j)]) continue;
    if (!is_constant_column(X, j)) A(n + c, c) = std::sqrt(lambda);
    ++c;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + k);
  rhs.head(n) = y;
  Eigen::VectorXd packed = Eigen::VectorXd::Zero(k);
  double df = 0.0;
  if (k > 0) {
    packed = A.householderQr().solve(rhs);
    // Hat-matrix trace: tr(Xk (A'A)^{-1} Xk').
    Eigen::MatrixXd AtA = A.transpose() * A;
    Eigen::MatrixXd G = Xk.transpose() * Xk;
    df = AtA.ldlt().solve(G).trace();
  }
  return finish(LeafModelSpec::ridge(lambda), scatter(packed, keep), keep, df,
                X, y);
}

FittedLeafModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lasso lambda must be >= 0");
  return fit_lasso_impl(LeafModelSpec::lasso_bic(), X, y, lambda);
}

FittedLeafModel fit_lasso_bic(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y,
                              std::optional<int> df_cap) {
  return fit_lasso_impl(LeafModelSpec::lasso_bic(df_cap), X, y, std::nullopt);
}

FittedLeafModel fit_leaf(const LeafModelSpec& spec, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y) {
  spec.validate();
  FittedLeafModel m;
  switch (spec.kind) {
    case LeafKind::kOls:
    case LeafKind::kBSplineLinear:
      m = fit_linear(X, y);
      break;
    case LeafKind::kRidge:
      m = fit_ridge(X, y, spec.lambda);
      break;
    case LeafKind::kLassoBic:
    case LeafKind::kPolyLasso:
      m = fit_lasso_impl(spec, X, y, std::nullopt);
      break;
  }
  m.spec = spec;
  return m;
}

Eigen::VectorXd predict(const FittedLeafModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.coefficients.size()) {
    throw SchemaError("design has " + std::to_string(X.cols()) +
                      " columns, model expects " +
                      std::to_string(model.coefficients.size()));
  }
  return X * model.coefficients;
}

double sum_squared_residuals(const FittedLeafModel& model,
                             const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y) {
  return (y - predict(model, X)).squaredNorm();
}

ScoreMatrix score_matrix(const FittedLeafModel& model, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y) {
  const Eigen::VectorXd r = y - predict(model, X);
  ScoreMatrix out;
  for (std::size_t j = 0; j < model.active.size(); ++j) {
    if (!model.active[j]) continue;
    out.columns.push_back(static_cast<int>(j));
    if (j < model.provenance.size()) out.provenance.push_back(model.provenance[j]);
  }
  out.scores.resize(X.rows(), static_cast<Eigen::Index>(out.columns.size()));
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    out.scores.col(static_cast<Eigen::Index>(c)) =
        r.cwiseProduct(X.col(out.columns[c]));
  }
  return out;
}

SufficientStats::SufficientStats(Eigen::Index q)
    : sum_z_(Eigen::VectorXd::Zero(q)),
      zz_(Eigen::MatrixXd::Zero(q, q)),
      zy_(Eigen::VectorXd::Zero(q)) {}

void SufficientStats::add(const double* z, double y) {
  const Eigen::Index q = sum_z_.size();
  Eigen::Map<const Eigen::VectorXd> v(z, q);
  n_ += 1.0;
  sum_z_ += v;
  zz_.selfadjointView<Eigen::Lower>().rankUpdate(v, 1.0);
  zy_ += v * y;
  sum_y_ += y;
  yy_ += y * y;
}

void SufficientStats::remove(const double* z, double y) {
  const Eigen::Index q = sum_z_.size();
  Eigen::Map<const Eigen::VectorXd> v(z, q);
  n_ -= 1.0;
  sum_z_ -= v;
  zz_.selfadjointView<Eigen::Lower>().rankUpdate(v, -1.0);
  zy_ -= v * y;
  sum_y_ -= y;
  yy_ -= y * y;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& o) {
  n_ += o.n_;
  sum_z_ += o.sum_z_;
  zz_ += o.zz_;
  zy_ += o.zy_;
  sum_y_ += o.sum_y_;
  yy_ += o.yy_;
  return *this;
}

SufficientStats& SufficientStats::operator-=(const SufficientStats& o) {
  n_ -= o.n_;
  sum_z_ -= o.sum_z_;
  zz_ -= o.zz_;
  zy_ -= o.zy_;
  sum_y_ -= o.sum_y_;
  yy_ -= o.yy_;
  return *this;
}

MomentFit fit_moments(const LeafModelSpec& spec, const SufficientStats& stats) {
  if (stats.n() < 1) throw NumericalError("cannot fit a model on zero rows");
  const Centered c = center(stats);
  const std::vector<bool> keep = screen_moments(c);
  if (spec.is_lasso()) {
    if (c.n < 3) throw NumericalError("lasso fits need more than 2 rows");
    return solve_lasso_path(c, keep, spec.df_cap, std::nullopt);
  }
  std::vector<Eigen::Index> idx;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) idx.push_back(static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd C = sub_matrix(c.C, idx);
  const Eigen::VectorXd Cy = sub_vector(c.Cy, idx);
  const double lambda = spec.kind == LeafKind::kRidge ? spec.lambda : 0.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(C.rows());
  double df = 1.0 + static_cast<double>(idx.size());
  double sse = c.syy;
  if (C.rows() > 0) {
    Eigen::MatrixXd A = C;
    A.diagonal().array() += lambda;
    auto llt = A.llt();
    b = llt.solve(Cy);
    if (lambda > 0.0) {
      df = 1.0 + llt.solve(C).trace();
      sse = c.syy - 2.0 * b.dot(Cy) + b.dot(C * b);
    } else {
      sse = c.syy - b.dot(Cy);
    }
  }
  return assemble(c, idx, b, std::max(sse, 0.0), df);
}

}  // namespace mbt
