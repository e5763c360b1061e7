#include <algorithm>
#include <cmath>
#include <limits>

#include "mbt/errors.hpp"
#include "mbt/rng.hpp"
#include "mbt/tree.hpp"
#include "split_sweep.hpp"

namespace mbt {
namespace {

// Feature column restricted to the node rows.
std::vector<double> node_values(const NodeView& node, std::size_t j) {
  const Column& col = node.ds->column(j);
  std::vector<double> v(node.rows.size());
  for (std::size_t i = 0; i < node.rows.size(); ++i) v[i] = col.values[node.rows[i]];
  return v;
}

bool varies(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

CandidateTrace trace_of(const std::string& feature, const TestResult& r) {
  CandidateTrace t;
  t.feature = feature;
  t.test = test_kind_name(r.kind);
  t.statistic = r.statistic;
  t.p_value = r.p_value;
  t.log_p = r.log_p;
  t.adjusted_p = r.p_value;
  return t;
}

// Bonferroni over the tested features; the smallest raw p wins
// (first feature on ties).
std::optional<TestSelection> select_adjusted(std::vector<CandidateTrace> trace,
                                             const std::vector<int>& features) {
  if (features.empty()) return std::nullopt;
  const int m = static_cast<int>(features.size());
  TestSelection sel;
  // Rank on raw p: the adjusted values clip at 1 and would tie.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double adj = bonferroni_log(trace[i].log_p, m);
    trace[i].adjusted_p = std::exp(adj);
    if (trace[i].log_p < best) {
      best = trace[i].log_p;
      sel.feature = features[i];
      sel.log_p = adj;
    }
  }
  sel.trace = std::move(trace);
  return sel;
}

// Scores of a (numerically) perfect fit carry only rounding noise.
bool negligible_scores(const FittedLeafModel& model, const Eigen::VectorXd& y) {
  const double syy = (y.array() - y.mean()).square().sum();
  return !(syy > 0.0) || model.sse <= 1e-10 * syy;
}

Eigen::MatrixXd indicator_matrix(const std::vector<double>& codes, const Column& col) {
  std::vector<int> slot(col.kind.levels.size(), -1);
  int next = 0;
  std::vector<int> sorted_codes;
  for (double c : codes) {
    const auto k = static_cast<std::size_t>(c);
    if (slot[k] < 0) {
      slot[k] = 0;
      sorted_codes.push_back(static_cast<int>(k));
    }
  }
  std::sort(sorted_codes.begin(), sorted_codes.end());
  for (int c : sorted_codes) slot[static_cast<std::size_t>(c)] = next++;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(codes.size()), next);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    g(static_cast<Eigen::Index>(i), slot[static_cast<std::size_t>(codes[i])]) = 1.0;
  }
  return g;
}

}  // namespace

std::optional<TestSelection> mob_select_feature(const NodeView& node,
                                                const FittedLeafModel& model,
                                                const MbtConfig& config) {
  const FeatureRoles roles = config.resolved_roles(*node.ds);
  const Eigen::MatrixXd X = node.design();
  const Eigen::VectorXd y = node.target();
  if (negligible_scores(model, y)) return std::nullopt;
  const ScoreMatrix sm = score_matrix(model, X, y);
  std::vector<CandidateTrace> trace;
  std::vector<int> features;
  for (std::size_t j = 0; j < node.ds->n_features(); ++j) {
    if (!roles[j].splitting) continue;
    const std::vector<double> v = node_values(node, j);
    if (!varies(v)) continue;
    const Column& col = node.ds->column(j);
    const TestResult r = fluctuation_test(sm.scores, v, col.kind.kind);
    trace.push_back(trace_of(col.name, r));
    features.push_back(static_cast<int>(j));
  }
  return select_adjusted(std::move(trace), features);
}

std::optional<TestSelection> ctree_select_feature(const NodeView& node,
                                                  const FittedLeafModel& model,
                                                  const MbtConfig& config) {
  const FeatureRoles roles = config.resolved_roles(*node.ds);
  const Eigen::MatrixXd X = node.design();
  const Eigen::VectorXd y = node.target();
  if (negligible_scores(model, y)) return std::nullopt;
  const ScoreMatrix sm = score_matrix(model, X, y);
  std::vector<CandidateTrace> trace;
  std::vector<int> features;
  for (std::size_t j = 0; j < node.ds->n_features(); ++j) {
    if (!roles[j].splitting) continue;
    const std::vector<double> v = node_values(node, j);
    if (!varies(v)) continue;
    const Column& col = node.ds->column(j);
    Eigen::MatrixXd g;
    if (col.kind.is_categorical()) {
      g = indicator_matrix(v, col);
    } else {
      g = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    const TestResult r = quad_association_test(sm.scores, g);
    trace.push_back(trace_of(col.name, r));
    features.push_back(static_cast<int>(j));
  }
  return select_adjusted(std::move(trace), features);
}

std::optional<SplitCandidate> ctree_split_point(const NodeView& node,
                                                const FittedLeafModel& model, int feature,
                                                const MbtConfig& config) {
  const Eigen::MatrixXd X = node.design();
  const Eigen::VectorXd y = node.target();
  const ScoreMatrix sm = score_matrix(model, X, y);
  const detail::RowMatrix H = sm.scores;
  const double n = static_cast<double>(H.rows());
  if (H.rows() < 2 || H.cols() < 1) return std::nullopt;
  const Eigen::VectorXd mean_h = H.colwise().mean().transpose();
  const Eigen::MatrixXd hc = H.rowwise() - mean_h.transpose();
  const Eigen::MatrixXd vinv = pseudo_inverse(hc.transpose() * hc / n);

  const detail::SumAcc empty(&H);
  std::optional<SplitRule> best_rule;
  double best = -1.0;
  detail::sweep_feature(node, feature, config.n_quantiles,
                        static_cast<std::size_t>(config.min_node_size), empty,
                        [&](std::size_t n_left, const detail::SumAcc& left,
                            const detail::SumAcc&, const auto& make_rule) {
                          const double s = two_sample_statistic(
                              left.sum, static_cast<double>(n_left), n, mean_h, vinv);
                          if (s > best) {
                            best = s;
                            best_rule = make_rule();
                          }
                        });
  if (!best_rule) return std::nullopt;

  // Child SSEs of the chosen partition, from moment fits.
  const detail::ShiftedDesign d = detail::shifted_design(node);
  SufficientStats left(d.Z.cols());
  SufficientStats right(d.Z.cols());
  const Column& col = node.ds->column(static_cast<std::size_t>(feature));
  for (std::size_t i = 0; i < node.rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    SufficientStats& side = best_rule->goes_left(col, node.rows[i]) ? left : right;
    side.add(d.Z.row(r).data(), d.y(r));
  }
  SplitCandidate c;
  c.rule = *best_rule;
  c.n_left = static_cast<std::size_t>(left.n());
  c.n_right = static_cast<std::size_t>(right.n());
  c.sse_left = fit_moments(config.leaf, left).sse;
  c.sse_right = fit_moments(config.leaf, right).sse;
  c.sse_after = c.sse_left + c.sse_right;
  return c;
}

namespace {

enum class GuideClass { kNumeric, kCategorical };

struct GuideFeature {
  int index = -1;
  std::string name;
  GuideClass cls = GuideClass::kNumeric;
  std::vector<int> curvature_group;  // quartile group or level slot per row
  int n_curvature_groups = 0;
  std::vector<int> pair_group;       // median half or level slot per row
  int n_pair_groups = 0;
};

std::vector<int> level_slots(const std::vector<double>& v, int* n_groups) {
  std::vector<double> uniq(v);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), v[i]) - uniq.begin());
  }
  *n_groups = static_cast<int>(uniq.size());
  return out;
}

std::vector<GuideFeature> guide_features(const NodeView& node, const MbtConfig& config) {
  const FeatureRoles roles = config.resolved_roles(*node.ds);
  std::vector<GuideFeature> out;
  for (std::size_t j = 0; j < node.ds->n_features(); ++j) {
    if (!roles[j].splitting) continue;
    const std::vector<double> v = node_values(node, j);
    if (!varies(v)) continue;
    const Column& col = node.ds->column(j);
    GuideFeature f;
    f.index = static_cast<int>(j);
    f.name = col.name;
    if (col.kind.kind == Kind::kNumeric) {
      f.cls = GuideClass::kNumeric;
      std::vector<double> sorted(v);
      std::sort(sorted.begin(), sorted.end());
      const double q1 = quantile_sorted(sorted, 0.25);
      const double q2 = quantile_sorted(sorted, 0.5);
      const double q3 = quantile_sorted(sorted, 0.75);
      f.curvature_group.resize(v.size());
      f.pair_group.resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        f.curvature_group[i] = (v[i] > q1) + (v[i] > q2) + (v[i] > q3);
        f.pair_group[i] = v[i] > q2 ? 1 : 0;
      }
      f.n_curvature_groups = 4;
      f.n_pair_groups = 2;
    } else {
      // Binary features are treated as two-level categorical ones.
      f.cls = GuideClass::kCategorical;
      f.curvature_group = level_slots(v, &f.n_curvature_groups);
      f.pair_group = f.curvature_group;
      f.n_pair_groups = f.n_curvature_groups;
    }
    out.push_back(std::move(f));
  }
  return out;
}

struct GuideTest {
  TestResult result;
  int a = -1;  // position in the feature list
  int b = -1;  // second feature for interaction tests
};

std::vector<GuideTest> guide_battery(const std::vector<GuideFeature>& feats,
                                     const std::vector<int>& sign) {
  std::vector<GuideTest> tests;
  for (std::size_t a = 0; a < feats.size(); ++a) {
    ContingencyTable t(2, feats[a].n_curvature_groups);
    for (std::size_t i = 0; i < sign.size(); ++i) t.add(sign[i], feats[a].curvature_group[i]);
    tests.push_back({pearson_chi2(t, TestKind::kCurvature), static_cast<int>(a), -1});
  }
  for (std::size_t a = 0; a < feats.size(); ++a) {
    for (std::size_t b = a + 1; b < feats.size(); ++b) {
      const int nb = feats[b].n_pair_groups;
      ContingencyTable t(2, feats[a].n_pair_groups * nb);
      for (std::size_t i = 0; i < sign.size(); ++i) {
        t.add(sign[i], feats[a].pair_group[i] * nb + feats[b].pair_group[i]);
      }
      tests.push_back(
          {pearson_chi2(t, TestKind::kInteraction), static_cast<int>(a), static_cast<int>(b)});
    }
  }
  return tests;
}

// Feature class a test would select if it won.
GuideClass selected_class(const GuideTest& t, const std::vector<GuideFeature>& feats) {
  if (t.b < 0) return feats[static_cast<std::size_t>(t.a)].cls;
  if (feats[static_cast<std::size_t>(t.a)].cls == GuideClass::kCategorical ||
      feats[static_cast<std::size_t>(t.b)].cls == GuideClass::kCategorical) {
    return GuideClass::kCategorical;
  }
  return GuideClass::kNumeric;
}

std::vector<int> residual_signs(const Eigen::VectorXd& r) {
  std::vector<int> s(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) s[static_cast<std::size_t>(i)] = r(i) >= 0.0 ? 0 : 1;
  return s;
}

}  // namespace

GuideCalibration guide_bootstrap_correction(const NodeView& node, const MbtConfig& config,
                                            int n_boot, std::uint64_t seed) {
  if (n_boot < 1) throw ConfigError("bootstrap replicate count must be >= 1");
  const std::vector<GuideFeature> feats = guide_features(node, config);
  std::size_t n_num = 0;
  for (const auto& f : feats) n_num += f.cls == GuideClass::kNumeric ? 1 : 0;
  GuideCalibration cal;
  if (n_num == 0 || n_num == feats.size()) return cal;
  const double target = static_cast<double>(n_num) / static_cast<double>(feats.size());

  const Eigen::MatrixXd X = node.design();
  const Eigen::VectorXd y = node.target();
  Rng rng(seed);
  std::vector<double> log_ratio;
  log_ratio.reserve(static_cast<std::size_t>(n_boot));
  for (int b = 0; b < n_boot; ++b) {
    const std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(y.size()));
    Eigen::VectorXd yp(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) yp(i) = y(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
    const FittedLeafModel m = fit_leaf(config.leaf, X, yp);
    const std::vector<int> sign = residual_signs(yp - predict(m, X));
    double pn = 0.0;
    double pc = 0.0;
    for (const GuideTest& t : guide_battery(feats, sign)) {
      double& slot = selected_class(t, feats) == GuideClass::kNumeric ? pn : pc;
      slot = std::min(slot, t.result.log_p);
    }
    log_ratio.push_back(pc - pn);
  }
  // A numeric feature wins a replicate when log r < pc - pn; choose r so that
  // this happens with probability equal to the numeric share of features.
  std::sort(log_ratio.begin(), log_ratio.end());
  const double q = quantile_sorted(log_ratio, 1.0 - target);
  cal.numeric_factor = std::exp(q);
  return cal;
}

std::optional<TestSelection> guide_select_feature(
    const NodeView& node, const FittedLeafModel& model, const MbtConfig& config,
    const std::optional<GuideCalibration>& calibration) {
  const std::vector<GuideFeature> feats = guide_features(node, config);
  if (feats.empty()) return std::nullopt;
  const Eigen::MatrixXd X = node.design();
  const Eigen::VectorXd y = node.target();
  const std::vector<int> sign = residual_signs(y - predict(model, X));
  const std::vector<GuideTest> tests = guide_battery(feats, sign);

  TestSelection sel;
  std::vector<double> curvature_adj(feats.size(), 0.0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t winner = 0;
  for (std::size_t k = 0; k < tests.size(); ++k) {
    const GuideTest& t = tests[k];
    double adj = t.result.log_p;
    if (calibration) {
      adj += std::log(selected_class(t, feats) == GuideClass::kNumeric
                          ? calibration->numeric_factor
                          : calibration->categorical_factor);
    }
    if (t.b < 0) curvature_adj[static_cast<std::size_t>(t.a)] = adj;
    std::string label = feats[static_cast<std::size_t>(t.a)].name;
    if (t.b >= 0) label += ":" + feats[static_cast<std::size_t>(t.b)].name;
    CandidateTrace tr = trace_of(label, t.result);
    tr.adjusted_p = std::exp(std::min(adj, 0.0));
    sel.trace.push_back(std::move(tr));
    if (adj < best) {
      best = adj;
      winner = k;
    }
  }
  sel.log_p = std::min(best, 0.0);
  const GuideTest& w = tests[winner];
  const GuideFeature& fa = feats[static_cast<std::size_t>(w.a)];
  if (w.b < 0) {
    sel.feature = fa.index;
    return sel;
  }
  const GuideFeature& fb = feats[static_cast<std::size_t>(w.b)];
  const bool cat_a = fa.cls == GuideClass::kCategorical;
  const bool cat_b = fb.cls == GuideClass::kCategorical;
  if (cat_a && cat_b) {
    sel.feature = curvature_adj[static_cast<std::size_t>(w.b)] <
                          curvature_adj[static_cast<std::size_t>(w.a)]
                      ? fb.index
                      : fa.index;
  } else if (cat_a || cat_b) {
    sel.feature = cat_a ? fa.index : fb.index;
  } else {
    // Two numeric features: split each at its node mean and keep the one whose
    // child models fit better. A fixed split point avoids favoring features
    // with many distinct values.
    auto at_mean = [&](int f) {
      const Column& col = node.ds->column(static_cast<std::size_t>(f));
      double sum = 0.0;
      for (std::size_t r : node.rows) sum += col.values[r];
      return threshold_split_sse(node, f, sum / static_cast<double>(node.size()), config);
    };
    sel.feature = at_mean(fb.index) < at_mean(fa.index) ? fb.index : fa.index;
  }
  return sel;
}

}  // namespace mbt
