#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mbt/dataset.hpp"

namespace mbt {

enum class TestKind { kSupLM, kChi2Fluctuation, kQuadAssociation, kCurvature, kInteraction };

const char* test_kind_name(TestKind kind);

struct TestResult {
  double statistic = 0.0;
  double df = 1.0;
  double p_value = 1.0;
  // Natural log of p_value, kept separately so that tiny p-values still
  // order correctly after underflow.
  double log_p = 0.0;
  TestKind kind = TestKind::kChi2Fluctuation;

  static TestResult degenerate(TestKind kind, double df = 1.0);
};

// Upper tail of the chi-square distribution.
double chi2_sf(double x, double df);
double chi2_logsf(double x, double df);

// Regularized upper incomplete gamma Q(a, x), returned as log Q.
double log_gamma_q(double a, double x);

class ContingencyTable {
 public:
  ContingencyTable(Eigen::Index rows, Eigen::Index cols);
  explicit ContingencyTable(Eigen::MatrixXd counts);

  void add(Eigen::Index r, Eigen::Index c, double w = 1.0) { counts_(r, c) += w; }
  const Eigen::MatrixXd& counts() const { return counts_; }
  double total() const { return counts_.sum(); }

 private:
  Eigen::MatrixXd counts_;
};

// Pearson independence test; all-zero rows and columns are removed first.
TestResult pearson_chi2(const ContingencyTable& table,
                        TestKind kind = TestKind::kCurvature);

// Asymptotic p-value of the supLM statistic for a k-dimensional process
// over break fractions in [lo, hi].
double suplm_pvalue(double statistic, int k, double lo = 0.1, double hi = 0.9);
double suplm_logp(double statistic, int k, double lo = 0.1, double hi = 0.9);

// Same, for a maximum taken over the n equally spaced break points of a
// sample rather than over the continuum (discrete-monitoring barrier shift).
double suplm_logp_sampled(double statistic, int k, std::size_t n, double lo = 0.1,
                          double hi = 0.9);

struct FluctuationOptions {
  double lo = 0.1;
  double hi = 0.9;
};

// Parameter-instability test of a score matrix along one feature. Numeric and
// binary features order the rows (ties by row index) and use supLM; a
// categorical feature uses the decorrelated per-level score-sum statistic.
TestResult fluctuation_test(const Eigen::MatrixXd& scores,
                            std::span<const double> feature, Kind kind,
                            const FluctuationOptions& options = {});

// Quadratic-form linear association test with permutation moments.
TestResult quad_association_test(const Eigen::MatrixXd& h, const Eigen::MatrixXd& g);

// Standardized two-sample statistic for a left group given by
// `sum_left` (sum of h over its rows) and `n_left`, under the permutation
// null for h with mean `mean_h` and pseudo-inverse covariance `vinv`.
double two_sample_statistic(const Eigen::VectorXd& sum_left, double n_left, double n,
                            const Eigen::VectorXd& mean_h, const Eigen::MatrixXd& vinv);

// Moore-Penrose style pseudo-inverse of a symmetric matrix; `rank` receives
// the number of eigenvalues above tolerance.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& sym, Eigen::Index* rank = nullptr);

double bonferroni(double p, int m);
double bonferroni_log(double log_p, int m);

}  // namespace mbt
