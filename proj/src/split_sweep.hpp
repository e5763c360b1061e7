#pragma once

// Candidate enumeration shared by the SSE search and the CTree split point.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mbt/tree.hpp"

namespace mbt::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kMaxSubsetLevels = 12;

struct FeatureLevels {
  std::vector<int> codes;  // observed level codes, ascending
  std::vector<int> slot;   // code -> position in `codes`, -1 if absent
  std::vector<int> local;  // per node row: position in `codes`
};

FeatureLevels observed_levels(const NodeView& node, int feature);

SplitRule threshold_rule(const Column& col, int feature, double t);
SplitRule subset_rule(const Column& col, int feature, const std::vector<int>& codes,
                      const std::vector<bool>& left);

// Node design shifted by its column means (intercept column kept at 1) and
// target shifted by its mean; improves conditioning of moment updates.
struct ShiftedDesign {
  RowMatrix Z;
  Eigen::VectorXd y;
};

ShiftedDesign shifted_design(const NodeView& node);

class MomentAcc {
 public:
  MomentAcc(const RowMatrix* Z, const Eigen::VectorXd* y);
  void add(std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    stats.add(Z_->row(r).data(), (*y_)(r));
  }
  MomentAcc& operator+=(const MomentAcc& o) {
    stats += o.stats;
    return *this;
  }

 private:
  const RowMatrix* Z_;
  const Eigen::VectorXd* y_;

 public:
  SufficientStats stats;
};

class SumAcc {
 public:
  explicit SumAcc(const RowMatrix* H) : H_(H), sum(Eigen::VectorXd::Zero(H->cols())) {}
  void add(std::size_t i) {
    sum += H_->row(static_cast<Eigen::Index>(i)).transpose();
    n += 1.0;
  }
  SumAcc& operator+=(const SumAcc& o) {
    sum += o.sum;
    n += o.n;
    return *this;
  }

 private:
  const RowMatrix* H_;

 public:
  Eigen::VectorXd sum;
  double n = 0.0;
};

// Calls visit(n_left, left_acc, total_acc, make_rule) for every admissible
// candidate of `feature` in tie-break order: ascending thresholds, or level
// subsets (first observed level always left) in ascending bitmask order.
// Categorical features with more than kMaxSubsetLevels observed levels use
// the L-1 prefixes of the levels ordered by mean target.
template <class Acc, class Visit>
void sweep_feature(const NodeView& node, int feature, std::optional<int> n_quantiles,
                   std::size_t min_node_size, const Acc& empty, Visit&& visit) {
  const Column& col = node.ds->column(static_cast<std::size_t>(feature));
  const std::size_t n = node.rows.size();
  if (n < 2 * min_node_size || n < 2) return;
  Acc total = empty;
  for (std::size_t i = 0; i < n; ++i) total.add(i);

  if (col.kind.is_categorical()) {
    const FeatureLevels lv = observed_levels(node, feature);
    const std::size_t L = lv.codes.size();
    if (L < 2) return;
    std::vector<Acc> per(L, empty);
    std::vector<std::size_t> count(L, 0);
    std::vector<double> ysum(L, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(lv.local[i]);
      per[s].add(i);
      ++count[s];
      ysum[s] += (*node.y)[node.rows[i]];
    }
    std::vector<bool> left(L, false);
    auto emit = [&]() {
      Acc acc = empty;
      std::size_t nl = 0;
      for (std::size_t s = 0; s < L; ++s) {
        if (left[s]) {
          acc += per[s];
          nl += count[s];
        }
      }
      if (nl < min_node_size || n - nl < min_node_size) return;
      auto make_rule = [&]() { return subset_rule(col, feature, lv.codes, left); };
      visit(nl, acc, total, make_rule);
    };
    if (L <= kMaxSubsetLevels) {
      const std::uint64_t combos = (std::uint64_t{1} << (L - 1)) - 1;
      for (std::uint64_t m = 0; m < combos; ++m) {
        const std::uint64_t mask = 1 | (m << 1);
        for (std::size_t s = 0; s < L; ++s) left[s] = ((mask >> s) & 1) != 0;
        emit();
      }
    } else {
      std::vector<std::size_t> order(L);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ysum[a] / static_cast<double>(count[a]) < ysum[b] / static_cast<double>(count[b]);
      });
      for (std::size_t k = 0; k + 1 < L; ++k) {
        left[order[k]] = true;
        emit();
      }
    }
    return;
  }

  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = col.values[node.rows[i]];
  const std::vector<double> thresholds = threshold_candidates(values, n_quantiles);
  if (thresholds.empty()) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  Acc left = empty;
  std::size_t p = 0;
  for (double t : thresholds) {
    while (p < n && values[order[p]] <= t) left.add(order[p++]);
    if (p < min_node_size || n - p < min_node_size) continue;
    auto make_rule = [&]() { return threshold_rule(col, feature, t); };
    visit(p, left, total, make_rule);
  }
}

}  // namespace mbt::detail
