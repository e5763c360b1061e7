#include "mbt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "mbt/errors.hpp"
#include "mbt/rng.hpp"

namespace mbt {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kSlim:
      return "slim";
    case Algorithm::kMob:
      return "mob";
    case Algorithm::kCtree:
      return "ctree";
    case Algorithm::kGuide:
      return "guide";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "slim") return Algorithm::kSlim;
  if (s == "mob") return Algorithm::kMob;
  if (s == "ctree") return Algorithm::kCtree;
  if (s == "guide") return Algorithm::kGuide;
  throw ConfigError("unknown algorithm '" + name + "'");
}

const char* stop_base_name(StopBase b) {
  return b == StopBase::kParentImprovement ? "parent_improvement" : "node_sse";
}

StopBase parse_stop_base(const std::string& name) {
  if (name == "parent_improvement") return StopBase::kParentImprovement;
  if (name == "node_sse") return StopBase::kNodeSse;
  throw ConfigError("unknown stopping base '" + name + "'");
}

void MbtConfig::validate() const {
  leaf.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_node_size < 1) throw ConfigError("min_node_size must be >= 1");
  if (n_quantiles && *n_quantiles < 2) throw ConfigError("n_quantiles must be >= 2");
  if (guide_n_boot < 1) throw ConfigError("guide bootstrap replicates must be >= 1");
  if (roles) {
    for (const auto& r : roles->roles()) {
      if (!r.regression && !r.splitting) {
        throw ConfigError("every feature needs a regression or splitting role");
      }
    }
  }
}

FeatureRoles MbtConfig::resolved_roles(const Dataset& ds) const {
  FeatureRoles r = roles ? *roles : FeatureRoles::all(ds.n_features());
  if (r.size() != ds.n_features()) {
    throw ConfigError("feature roles do not match the dataset");
  }
  if (algorithm == Algorithm::kGuide && !guide_categorical_as_regressors) {
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
      if (ds.column(j).kind.is_categorical()) r[j].regression = false;
    }
  }
  return r;
}

bool SplitRule::goes_left(const Column& col, std::size_t row) const {
  if (kind == Kind::kCategorical) {
    if (!col.kind.is_categorical()) {
      throw SchemaError("column " + col.name + " must be categorical");
    }
    const std::string& level = col.kind.levels[static_cast<std::size_t>(col.values[row])];
    return std::find(left_levels.begin(), left_levels.end(), level) != left_levels.end();
  }
  if (col.kind.is_categorical()) throw SchemaError("column " + col.name + " must be numeric");
  return col.values[row] <= threshold;
}

std::string SplitRule::describe() const {
  std::ostringstream os;
  if (kind == Kind::kCategorical) {
    os << feature << " in {";
    for (std::size_t i = 0; i < left_levels.size(); ++i) os << (i ? "," : "") << left_levels[i];
    os << "}";
  } else {
    os.precision(6);
    os << feature << " <= " << threshold;
  }
  return os.str();
}

MbtTree::MbtTree(MbtConfig config, DesignLayout layout, std::vector<Node> nodes)
    : config_(std::move(config)), layout_(std::move(layout)), nodes_(std::move(nodes)) {}

std::size_t MbtTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

int MbtTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<int> MbtTree::leaves() const {
  std::vector<int> out;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) out.push_back(n.id);
  }
  return out;
}

namespace {

// A node whose model already reproduces the target is never split.
constexpr double kPerfectFit = 1e-10;

class Grower {
 public:
  Grower(const Dataset& ds, const MbtConfig& config)
      : ds_(ds), config_(config), y_(ds.target()) {
    layout_ = make_layout(ds, config.resolved_roles(ds), config.leaf.basis());
    X_ = layout_.matrix(ds);
  }

  MbtTree run() {
    std::vector<std::size_t> rows(ds_.n_rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    build(std::move(rows), 1, 0.0);
    return MbtTree(config_, std::move(layout_), std::move(nodes_));
  }

 private:
  bool accept_drop(double drop, double sse_node, int depth, double parent_drop) const {
    const bool use_node = depth == 1 || config_.stop_base == StopBase::kNodeSse;
    const double base = use_node ? sse_node : parent_drop;
    if (config_.gamma > 0.0 && !(drop > 0.0)) return false;
    return drop >= config_.gamma * base;
  }

  bool accept_p(double log_p) const {
    return config_.alpha >= 1.0 || log_p < std::log(config_.alpha);
  }

  int build(std::vector<std::size_t> rows, int depth, double parent_drop) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    NodeView view{&ds_, &X_, &y_, std::move(rows)};
    const Eigen::MatrixXd Xn = view.design();
    const Eigen::VectorXd yn = view.target();
    Node node;
    node.id = id;
    node.depth = depth;
    node.n_obs = view.size();
    node.model = fit_leaf(config_.leaf, Xn, yn);
    node.model.provenance = layout_.columns();

    std::optional<SplitCandidate> cand = choose(view, node, parent_drop);
    if (cand) {
      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      const Column& col = ds_.column(static_cast<std::size_t>(cand->rule.feature_index));
      for (std::size_t r : view.rows) (cand->rule.goes_left(col, r) ? left : right).push_back(r);
      node.rule = cand->rule;
      node.sse_drop = std::max(0.0, node.model.sse - cand->sse_after);
      const double drop = node.sse_drop;
      nodes_[static_cast<std::size_t>(id)] = std::move(node);
      const int l = build(std::move(left), depth + 1, drop);
      const int r = build(std::move(right), depth + 1, drop);
      nodes_[static_cast<std::size_t>(id)].left = l;
      nodes_[static_cast<std::size_t>(id)].right = r;
    } else {
      nodes_[static_cast<std::size_t>(id)] = std::move(node);
    }
    return id;
  }

  std::optional<SplitCandidate> choose(const NodeView& view, Node& node, double parent_drop) {
    const auto mns = static_cast<std::size_t>(config_.min_node_size);
    if (node.depth >= config_.max_depth || view.size() < 2 * mns) return std::nullopt;
    const Eigen::VectorXd yn = view.target();
    const double syy = (yn.array() - yn.mean()).square().sum();
    if (syy <= 0.0 || node.model.sse <= kPerfectFit * syy) return std::nullopt;
    const double sse = node.model.sse;

    switch (config_.algorithm) {
      case Algorithm::kSlim: {
        auto cand = slim_best_split(view, config_, sse, &node.trace);
        if (!cand) return std::nullopt;
        if (!accept_drop(sse - cand->sse_after, sse, node.depth, parent_drop)) {
          return std::nullopt;
        }
        return cand;
      }
      case Algorithm::kMob:
      case Algorithm::kCtree: {
        const bool mob = config_.algorithm == Algorithm::kMob;
        auto sel = mob ? mob_select_feature(view, node.model, config_)
                       : ctree_select_feature(view, node.model, config_);
        if (!sel) return std::nullopt;
        node.trace = std::move(sel->trace);
        if (!accept_p(sel->log_p)) return std::nullopt;
        return mob ? best_sse_split(view, sel->feature, config_)
                   : ctree_split_point(view, node.model, sel->feature, config_);
      }
      case Algorithm::kGuide: {
        std::optional<GuideCalibration> cal;
        if (config_.guide_bootstrap_correction) {
          cal = guide_bootstrap_correction(view, config_, config_.guide_n_boot,
                                           derive_seed(config_.seed, static_cast<std::uint64_t>(node.id)));
        }
        auto sel = guide_select_feature(view, node.model, config_, cal);
        if (!sel) return std::nullopt;
        node.trace = std::move(sel->trace);
        auto cand = best_sse_split(view, sel->feature, config_);
        if (!cand) return std::nullopt;
        if (!accept_drop(sse - cand->sse_after, sse, node.depth, parent_drop)) {
          return std::nullopt;
        }
        return cand;
      }
    }
    return std::nullopt;
  }

  const Dataset& ds_;
  const MbtConfig& config_;
  const std::vector<double>& y_;
  DesignLayout layout_;
  Eigen::MatrixXd X_;
  std::vector<Node> nodes_;
};

}  // namespace

MbtTree grow(const Dataset& ds, const MbtConfig& config) {
  config.validate();
  if (!ds.has_target()) throw DataError("dataset has no target column");
  if (ds.n_rows() < static_cast<std::size_t>(config.min_node_size) || ds.n_rows() == 0) {
    throw ConfigError("dataset has fewer rows than min_node_size");
  }
  return Grower(ds, config).run();
}

Routing route(const MbtTree& tree, const Dataset& ds) {
  const auto& nodes = tree.nodes();
  // Resolve each split feature by name once.
  std::vector<const Column*> cols(nodes.size(), nullptr);
  for (const auto& n : nodes) {
    if (!n.rule) continue;
    auto j = ds.find(n.rule->feature);
    if (!j) throw SchemaError("missing column " + n.rule->feature);
    cols[static_cast<std::size_t>(n.id)] = &ds.column(*j);
  }
  Routing out;
  out.leaf.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    int id = tree.root();
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const Node& n = nodes[static_cast<std::size_t>(id)];
      const Column& col = *cols[static_cast<std::size_t>(id)];
      const bool left = n.rule->goes_left(col, i);
      if (!left && n.rule->kind == Kind::kCategorical) {
        const std::string& level = col.kind.levels[static_cast<std::size_t>(col.values[i])];
        const auto& rl = n.rule->right_levels;
        if (std::find(rl.begin(), rl.end(), level) == rl.end()) ++out.unseen_levels;
      }
      id = left ? n.left : n.right;
    }
    out.leaf[i] = id;
  }
  return out;
}

std::vector<int> assign_partition(const MbtTree& tree, const Dataset& ds) {
  return route(tree, ds).leaf;
}

Eigen::VectorXd predict_tree(const MbtTree& tree, const Dataset& ds) {
  const std::vector<int> leaf = assign_partition(tree, ds);
  const Eigen::MatrixXd X = tree.layout().matrix(ds);
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.n_rows()));
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out(r) = X.row(r).dot(tree.node(leaf[i]).model.coefficients);
  }
  return out;
}

std::map<std::string, SplitShare> split_share(const MbtTree& tree) {
  std::map<std::string, SplitShare> out;
  double total_n = 0.0;
  double total_count = 0.0;
  for (const auto& n : tree.nodes()) {
    if (!n.rule) continue;
    auto& s = out[n.rule->feature];
    s.weighted += static_cast<double>(n.n_obs);
    s.count += 1.0;
    total_n += static_cast<double>(n.n_obs);
    total_count += 1.0;
  }
  for (auto& [name, s] : out) {
    s.weighted /= total_n;
    s.count /= total_count;
  }
  return out;
}

}  // namespace mbt
