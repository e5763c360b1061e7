#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mbt/errors.hpp"
#include "split_sweep.hpp"
#include "mbt/tree.hpp"

namespace mbt {

Eigen::MatrixXd NodeView::design() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X->row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::VectorXd NodeView::target() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = (*y)[rows[i]];
  }
  return out;
}

std::vector<double> threshold_candidates(std::span<const double> values,
                                         std::optional<int> n_quantiles) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  if (sorted.empty() || sorted.front() == sorted.back()) return out;
  if (n_quantiles) {
    std::set<double> uniq;
    for (int j = 1; j < *n_quantiles; ++j) {
      const double t = quantile_sorted(sorted, static_cast<double>(j) / *n_quantiles);
      if (t >= sorted.front() && t < sorted.back()) uniq.insert(t);
    }
    out.assign(uniq.begin(), uniq.end());
    return out;
  }
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double a = sorted[i - 1];
    const double b = sorted[i];
    if (b == a) continue;
    double t = a + 0.5 * (b - a);
    if (t >= b) t = a;
    out.push_back(t);
  }
  return out;
}

namespace detail {

FeatureLevels observed_levels(const NodeView& node, int feature) {
  const Column& col = node.ds->column(static_cast<std::size_t>(feature));
  FeatureLevels out;
  std::vector<int> seen(col.kind.levels.size(), -1);
  std::vector<int> codes;
  for (std::size_t r : node.rows) {
    const int code = static_cast<int>(col.values[r]);
    if (seen[static_cast<std::size_t>(code)] < 0) {
      seen[static_cast<std::size_t>(code)] = 0;
      codes.push_back(code);
    }
  }
  std::sort(codes.begin(), codes.end());
  out.codes = codes;
  out.slot.assign(col.kind.levels.size(), -1);
  for (std::size_t s = 0; s < codes.size(); ++s) {
    out.slot[static_cast<std::size_t>(codes[s])] = static_cast<int>(s);
  }
  out.local.resize(node.rows.size());
  for (std::size_t i = 0; i < node.rows.size(); ++i) {
    out.local[i] = out.slot[static_cast<std::size_t>(col.values[node.rows[i]])];
  }
  return out;
}

SplitRule threshold_rule(const Column& col, int feature, double t) {
  SplitRule r;
  r.feature = col.name;
  r.feature_index = feature;
  r.kind = col.kind.kind;
  r.threshold = t;
  return r;
}

SplitRule subset_rule(const Column& col, int feature, const std::vector<int>& codes,
                      const std::vector<bool>& left) {
  SplitRule r;
  r.feature = col.name;
  r.feature_index = feature;
  r.kind = Kind::kCategorical;
  for (std::size_t s = 0; s < codes.size(); ++s) {
    const std::string& name = col.kind.levels[static_cast<std::size_t>(codes[s])];
    (left[s] ? r.left_levels : r.right_levels).push_back(name);
  }
  return r;
}

MomentAcc::MomentAcc(const RowMatrix* Z, const Eigen::VectorXd* y)
    : Z_(Z), y_(y), stats(Z->cols()) {}

ShiftedDesign shifted_design(const NodeView& node) {
  ShiftedDesign d;
  const Eigen::MatrixXd X = node.design();
  const Eigen::VectorXd y = node.target();
  Eigen::RowVectorXd shift = X.colwise().mean();
  shift(0) = 0.0;
  d.Z = X.rowwise() - shift;
  d.y = y.array() - y.mean();
  return d;
}

}  // namespace detail

namespace {

double safe_sse(const LeafModelSpec& spec, const SufficientStats& s) {
  try {
    return fit_moments(spec, s).sse;
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

std::optional<SplitCandidate> best_sse_split(const NodeView& node, int feature,
                                             const MbtConfig& config) {
  const detail::ShiftedDesign d = detail::shifted_design(node);
  const detail::MomentAcc empty(&d.Z, &d.y);
  std::optional<SplitCandidate> best;
  detail::sweep_feature(
      node, feature, config.n_quantiles, static_cast<std::size_t>(config.min_node_size),
      empty, [&](std::size_t n_left, const detail::MomentAcc& left,
                 const detail::MomentAcc& total, const auto& make_rule) {
        SufficientStats right = total.stats;
        right -= left.stats;
        const double sl = safe_sse(config.leaf, left.stats);
        const double sr = safe_sse(config.leaf, right);
        const double s = sl + sr;
        if (!std::isfinite(s)) return;
        if (!best || s < best->sse_after) {
          best = SplitCandidate{make_rule(), sl, sr, s, n_left, node.size() - n_left};
        }
      });
  return best;
}

double threshold_split_sse(const NodeView& node, int feature, double threshold,
                           const MbtConfig& config) {
  const detail::ShiftedDesign d = detail::shifted_design(node);
  detail::MomentAcc left(&d.Z, &d.y);
  detail::MomentAcc right(&d.Z, &d.y);
  const Column& col = node.ds->column(static_cast<std::size_t>(feature));
  for (std::size_t i = 0; i < node.rows.size(); ++i) {
    if (col.values[node.rows[i]] <= threshold) {
      left.add(i);
    } else {
      right.add(i);
    }
  }
  if (left.stats.n() == 0.0 || right.stats.n() == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return safe_sse(config.leaf, left.stats) + safe_sse(config.leaf, right.stats);
}

std::optional<SplitCandidate> slim_best_split(const NodeView& node, const MbtConfig& config,
                                              double sse_parent,
                                              std::vector<CandidateTrace>* trace) {
  const FeatureRoles roles = config.resolved_roles(*node.ds);
  std::optional<SplitCandidate> best;
  for (std::size_t j = 0; j < node.ds->n_features(); ++j) {
    if (!roles[j].splitting) continue;
    auto cand = best_sse_split(node, static_cast<int>(j), config);
    if (trace) {
      CandidateTrace t;
      t.feature = node.ds->column(j).name;
      t.test = "sse";
      if (cand && sse_parent > 0.0) {
        t.improvement = (sse_parent - cand->sse_after) / sse_parent;
      }
      trace->push_back(std::move(t));
    }
    if (cand && (!best || cand->sse_after < best->sse_after)) best = std::move(cand);
  }
  return best;
}

}  // namespace mbt
