#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbt/dataset.hpp"
#include "mbt/design.hpp"
#include "mbt/leaf_models.hpp"
#include "mbt/stat_tests.hpp"

namespace mbt {

enum class Algorithm { kSlim, kMob, kCtree, kGuide };

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

// Base of the SLIM/GUIDE early-stopping ratio below the root.
enum class StopBase {
  kParentImprovement,  // drop / (SSE drop accepted at the parent split)
  kNodeSse,            // drop / SSE of the node itself
};

const char* stop_base_name(StopBase b);
StopBase parse_stop_base(const std::string& name);

struct MbtConfig {
  Algorithm algorithm = Algorithm::kSlim;
  LeafModelSpec leaf;
  double gamma = 0.05;
  double alpha = 0.05;
  int max_depth = 6;
  int min_node_size = 50;
  std::optional<int> n_quantiles;
  bool guide_categorical_as_regressors = true;
  bool guide_bootstrap_correction = false;
  int guide_n_boot = 100;
  StopBase stop_base = StopBase::kParentImprovement;
  std::optional<FeatureRoles> roles;  // unset: every feature in both roles
  std::uint64_t seed = 0;

  void validate() const;
  // Roles after applying defaults and the GUIDE regressor option.
  FeatureRoles resolved_roles(const Dataset& ds) const;
};

struct SplitRule {
  std::string feature;
  int feature_index = -1;
  Kind kind = Kind::kNumeric;
  double threshold = 0.0;                // numeric/binary: left iff x <= threshold
  std::vector<std::string> left_levels;  // categorical: left iff level in set
  std::vector<std::string> right_levels;  // remaining levels observed in training

  // Categorical levels not in `left_levels` (including ones never seen in
  // training) go right.
  bool goes_left(const Column& col, std::size_t row) const;
  std::string describe() const;

  bool operator==(const SplitRule&) const = default;
};

// One entry per candidate feature examined while deciding a node's split.
struct CandidateTrace {
  std::string feature;
  std::string test;          // supLM, chi2-fluctuation, quad-association, curvature, interaction, sse
  double statistic = 0.0;
  double p_value = 1.0;      // raw p-value of the test (1 for SSE search)
  double log_p = 0.0;
  double adjusted_p = 1.0;   // after Bonferroni / bootstrap calibration
  double improvement = 0.0;  // best SSE drop over node SSE (SSE search only)

  bool operator==(const CandidateTrace&) const = default;
};

struct Node {
  int id = 0;
  int depth = 1;
  std::size_t n_obs = 0;
  FittedLeafModel model;
  std::optional<SplitRule> rule;
  int left = -1;
  int right = -1;
  double sse_drop = 0.0;  // SSE drop of the executed split
  std::vector<CandidateTrace> trace;

  bool is_leaf() const { return !rule.has_value(); }
};

class MbtTree {
 public:
  MbtTree() = default;
  MbtTree(MbtConfig config, DesignLayout layout, std::vector<Node> nodes);

  const MbtConfig& config() const { return config_; }
  const DesignLayout& layout() const { return layout_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  int root() const { return 0; }

  std::size_t leaf_count() const;
  int depth() const;
  std::vector<int> leaves() const;

 private:
  MbtConfig config_;
  DesignLayout layout_;
  std::vector<Node> nodes_;
};

// Rows of one node together with the tree-wide design matrix.
struct NodeView {
  const Dataset* ds = nullptr;
  const Eigen::MatrixXd* X = nullptr;  // design rows for every dataset row
  const std::vector<double>* y = nullptr;
  std::vector<std::size_t> rows;

  std::size_t size() const { return rows.size(); }
  Eigen::MatrixXd design() const;
  Eigen::VectorXd target() const;
};

struct SplitCandidate {
  SplitRule rule;
  double sse_left = 0.0;
  double sse_right = 0.0;
  double sse_after = 0.0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
};

// Numeric thresholds tried for a sample: midpoints between consecutive
// distinct values, or the quantiles at j/q (j = 1..q-1) when `n_quantiles`
// is set. Thresholds that leave one side empty are omitted.
std::vector<double> threshold_candidates(std::span<const double> values,
                                         std::optional<int> n_quantiles);

// SSE-optimal split on one feature, computed with incremental moment
// updates. Candidates must leave min_node_size rows on both sides.
std::optional<SplitCandidate> best_sse_split(const NodeView& node, int feature,
                                             const MbtConfig& config);

// Child SSE of the split x <= threshold on a numeric feature; infinite when a
// side is empty or a child model cannot be fitted.
double threshold_split_sse(const NodeView& node, int feature, double threshold,
                           const MbtConfig& config);

// Exhaustive search over every split-usable feature. `trace` receives the best
// relative SSE improvement per feature when non-null.
std::optional<SplitCandidate> slim_best_split(const NodeView& node, const MbtConfig& config,
                                              double sse_parent,
                                              std::vector<CandidateTrace>* trace = nullptr);

struct TestSelection {
  int feature = -1;
  double log_p = 0.0;  // after multiplicity adjustment / calibration
  std::vector<CandidateTrace> trace;
};

// Feature choice of the test-based strategies. MOB and CTree Bonferroni-adjust
// over the tested features. None when no feature could be tested.
std::optional<TestSelection> mob_select_feature(const NodeView& node,
                                                const FittedLeafModel& model,
                                                const MbtConfig& config);
std::optional<TestSelection> ctree_select_feature(const NodeView& node,
                                                  const FittedLeafModel& model,
                                                  const MbtConfig& config);

// CTree split point: maximizes the standardized two-sample statistic.
std::optional<SplitCandidate> ctree_split_point(const NodeView& node,
                                                const FittedLeafModel& model, int feature,
                                                const MbtConfig& config);

struct GuideCalibration {
  double numeric_factor = 1.0;
  double categorical_factor = 1.0;
};

// Multiplicative p-value factors per feature class from target-permutation
// replicates of the curvature/interaction battery.
GuideCalibration guide_bootstrap_correction(const NodeView& node, const MbtConfig& config,
                                            int n_boot, std::uint64_t seed);

// GUIDE feature choice. When `calibration` is given, p-values of tests that
// would select a numeric feature are multiplied by its numeric factor.
std::optional<TestSelection> guide_select_feature(
    const NodeView& node, const FittedLeafModel& model, const MbtConfig& config,
    const std::optional<GuideCalibration>& calibration = std::nullopt);

MbtTree grow(const Dataset& ds, const MbtConfig& config);

Eigen::VectorXd predict_tree(const MbtTree& tree, const Dataset& ds);
std::vector<int> assign_partition(const MbtTree& tree, const Dataset& ds);

// Routes rows to leaves and counts categorical values the tree never saw in
// training at the split that routed them.
struct Routing {
  std::vector<int> leaf;
  std::size_t unseen_levels = 0;
};
Routing route(const MbtTree& tree, const Dataset& ds);

struct SplitShare {
  double weighted = 0.0;  // share of n_obs over internal nodes
  double count = 0.0;     // share of split count
};
std::map<std::string, SplitShare> split_share(const MbtTree& tree);

}  // namespace mbt
