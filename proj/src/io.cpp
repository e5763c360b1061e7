#include "mbt/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "mbt/errors.hpp"

namespace mbt {

namespace {

Term parse_term(const std::string& name) {
  for (Term t : {Term::kIntercept, Term::kLinear, Term::kDummy, Term::kSpline, Term::kSquare}) {
    if (name == term_name(t)) return t;
  }
  throw ConfigError("unknown design term '" + name + "'");
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown " + what + " key '" + it.key() + "'");
  }
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad or missing field '") + key + "': " + e.what());
  }
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return format_number(v);
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string header_line(const Json& config) { return "# " + config.dump() + "\n"; }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json num_to_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

double num_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("expected a number, got " + j.dump());
}

Json leaf_spec_to_json(const LeafModelSpec& spec) {
  Json j;
  j["kind"] = leaf_kind_name(spec.kind);
  j["lambda"] = spec.lambda;
  j["df_cap"] = spec.df_cap ? Json(*spec.df_cap) : Json(nullptr);
  j["knots_per_feature"] = spec.knots_per_feature;
  j["degree"] = spec.degree;
  return j;
}

LeafModelSpec leaf_spec_from_json(const Json& j, LeafModelSpec base) {
  if (j.is_string()) {
    base.kind = parse_leaf_kind(j.get<std::string>());
    return base;
  }
  check_keys(j, {"kind", "lambda", "df_cap", "knots_per_feature", "degree"}, "leaf");
  if (j.contains("kind")) base.kind = parse_leaf_kind(get<std::string>(j, "kind"));
  if (j.contains("lambda")) base.lambda = get<double>(j, "lambda");
  if (j.contains("df_cap")) {
    base.df_cap = j["df_cap"].is_null() ? std::nullopt : std::optional<int>(get<int>(j, "df_cap"));
  }
  if (j.contains("knots_per_feature")) base.knots_per_feature = get<int>(j, "knots_per_feature");
  if (j.contains("degree")) base.degree = get<int>(j, "degree");
  return base;
}

Json config_to_json(const MbtConfig& c) {
  Json j;
  j["algorithm"] = algorithm_name(c.algorithm);
  j["leaf"] = leaf_spec_to_json(c.leaf);
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["max_depth"] = c.max_depth;
  j["min_node_size"] = c.min_node_size;
  j["n_quantiles"] = c.n_quantiles ? Json(*c.n_quantiles) : Json(nullptr);
  j["guide_categorical_as_regressors"] = c.guide_categorical_as_regressors;
  j["guide_bootstrap_correction"] = c.guide_bootstrap_correction;
  j["guide_n_boot"] = c.guide_n_boot;
  j["stop_base"] = stop_base_name(c.stop_base);
  if (c.roles) {
    Json roles = Json::array();
    for (const auto& r : c.roles->roles()) {
      roles.push_back({{"regression", r.regression}, {"splitting", r.splitting}});
    }
    j["roles"] = roles;
  } else {
    j["roles"] = nullptr;
  }
  j["seed"] = c.seed;
  return j;
}

MbtConfig config_from_json(const Json& j, MbtConfig c) {
  check_keys(j,
             {"algorithm", "leaf", "gamma", "alpha", "max_depth", "min_node_size", "n_quantiles",
              "guide_categorical_as_regressors", "guide_bootstrap_correction", "guide_n_boot",
              "stop_base", "roles", "seed"},
             "tree config");
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(get<std::string>(j, "algorithm"));
  if (j.contains("leaf")) c.leaf = leaf_spec_from_json(j["leaf"], c.leaf);
  if (j.contains("gamma")) c.gamma = get<double>(j, "gamma");
  if (j.contains("alpha")) c.alpha = get<double>(j, "alpha");
  if (j.contains("max_depth")) c.max_depth = get<int>(j, "max_depth");
  if (j.contains("min_node_size")) c.min_node_size = get<int>(j, "min_node_size");
  if (j.contains("n_quantiles")) {
    c.n_quantiles =
        j["n_quantiles"].is_null() ? std::nullopt : std::optional<int>(get<int>(j, "n_quantiles"));
  }
  if (j.contains("guide_categorical_as_regressors")) {
    c.guide_categorical_as_regressors = get<bool>(j, "guide_categorical_as_regressors");
  }
  if (j.contains("guide_bootstrap_correction")) {
    c.guide_bootstrap_correction = get<bool>(j, "guide_bootstrap_correction");
  }
  if (j.contains("guide_n_boot")) c.guide_n_boot = get<int>(j, "guide_n_boot");
  if (j.contains("stop_base")) c.stop_base = parse_stop_base(get<std::string>(j, "stop_base"));
  if (j.contains("roles")) {
    if (j["roles"].is_null()) {
      c.roles.reset();
    } else {
      std::vector<FeatureRole> roles;
      for (const auto& r : j["roles"]) {
        roles.push_back({get<bool>(r, "regression"), get<bool>(r, "splitting")});
      }
      c.roles = FeatureRoles(std::move(roles));
    }
  }
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  return c;
}

Json layout_to_json(const DesignLayout& layout) {
  Json bases = Json::array();
  for (const auto& b : layout.bases()) {
    Json jb;
    jb["feature"] = b.feature;
    jb["name"] = b.name;
    jb["kind"] = kind_name(b.kind);
    jb["levels"] = b.levels;
    Json knots = Json::array();
    for (double k : b.knots) knots.push_back(num_to_json(k));
    jb["knots"] = knots;
    jb["square"] = b.square;
    bases.push_back(jb);
  }
  return {{"bases", bases}, {"dropped_features", layout.dropped_features()}};
}

DesignLayout layout_from_json(const Json& j) {
  std::vector<FeatureBasis> bases;
  for (const auto& jb : j.at("bases")) {
    FeatureBasis b;
    b.feature = get<int>(jb, "feature");
    b.name = get<std::string>(jb, "name");
    b.kind = parse_kind(get<std::string>(jb, "kind"));
    b.levels = get<std::vector<std::string>>(jb, "levels");
    for (const auto& k : jb.at("knots")) b.knots.push_back(num_from_json(k));
    b.square = get<bool>(jb, "square");
    bases.push_back(std::move(b));
  }
  return DesignLayout(std::move(bases), get<std::vector<std::string>>(j, "dropped_features"));
}

Json model_to_json(const FittedLeafModel& m, const DesignLayout& layout) {
  Json coefs = Json::object();
  const auto& cols = layout.columns();
  if (static_cast<std::size_t>(m.coefficients.size()) != cols.size()) {
    throw SchemaError("model and layout disagree on the number of columns");
  }
  for (std::size_t k = 0; k < cols.size(); ++k) {
    coefs[cols[k].label] = {{"feature", cols[k].feature},
                            {"term", term_name(cols[k].term)},
                            {"index", cols[k].index},
                            {"value", num_to_json(m.coefficients(static_cast<Eigen::Index>(k)))},
                            {"active", k < m.active.size() ? bool(m.active[k]) : true}};
  }
  return {{"spec", leaf_spec_to_json(m.spec)},
          {"coefficients", coefs},
          {"sse", num_to_json(m.sse)},
          {"n_obs", m.n_obs},
          {"effective_df", num_to_json(m.effective_df)}};
}

FittedLeafModel model_from_json(const Json& j, const DesignLayout& layout) {
  FittedLeafModel m;
  m.spec = leaf_spec_from_json(j.at("spec"));
  const auto& cols = layout.columns();
  const Json& coefs = j.at("coefficients");
  if (coefs.size() != cols.size()) throw SchemaError("coefficient count does not match layout");
  m.coefficients.resize(static_cast<Eigen::Index>(cols.size()));
  m.active.resize(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (!coefs.contains(cols[k].label)) {
      throw SchemaError("missing coefficient for column " + cols[k].label);
    }
    const Json& c = coefs[cols[k].label];
    if (parse_term(get<std::string>(c, "term")) != cols[k].term) {
      throw SchemaError("coefficient term mismatch for " + cols[k].label);
    }
    m.coefficients(static_cast<Eigen::Index>(k)) = num_from_json(c.at("value"));
    m.active[k] = get<bool>(c, "active");
  }
  m.sse = num_from_json(j.at("sse"));
  m.n_obs = get<std::size_t>(j, "n_obs");
  m.effective_df = num_from_json(j.at("effective_df"));
  m.provenance = cols;
  return m;
}

Json tree_to_json(const MbtTree& tree) {
  Json nodes = Json::array();
  for (const auto& n : tree.nodes()) {
    Json jn;
    jn["id"] = n.id;
    jn["depth"] = n.depth;
    jn["n_obs"] = n.n_obs;
    jn["left"] = n.left;
    jn["right"] = n.right;
    jn["sse_drop"] = num_to_json(n.sse_drop);
    if (n.rule) {
      const SplitRule& r = *n.rule;
      jn["rule"] = {{"feature", r.feature},
                    {"feature_index", r.feature_index},
                    {"kind", kind_name(r.kind)},
                    {"threshold", num_to_json(r.threshold)},
                    {"left_levels", r.left_levels},
                    {"right_levels", r.right_levels}};
    } else {
      jn["rule"] = nullptr;
    }
    jn["model"] = model_to_json(n.model, tree.layout());
    Json trace = Json::array();
    for (const auto& t : n.trace) {
      trace.push_back({{"feature", t.feature},
                       {"test", t.test},
                       {"statistic", num_to_json(t.statistic)},
                       {"p_value", num_to_json(t.p_value)},
                       {"log_p", num_to_json(t.log_p)},
                       {"adjusted_p", num_to_json(t.adjusted_p)},
                       {"improvement", num_to_json(t.improvement)}});
    }
    jn["trace"] = trace;
    nodes.push_back(jn);
  }
  return {{"format", "mbtlab-tree-1"},
          {"config", config_to_json(tree.config())},
          {"layout", layout_to_json(tree.layout())},
          {"nodes", nodes}};
}

MbtTree tree_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "mbtlab-tree-1") {
      throw SchemaError("not a tree document");
    }
    const MbtConfig config = config_from_json(j.at("config"));
    const DesignLayout layout = layout_from_json(j.at("layout"));
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = get<int>(jn, "id");
      n.depth = get<int>(jn, "depth");
      n.n_obs = get<std::size_t>(jn, "n_obs");
      n.left = get<int>(jn, "left");
      n.right = get<int>(jn, "right");
      n.sse_drop = num_from_json(jn.at("sse_drop"));
      if (!jn.at("rule").is_null()) {
        const Json& jr = jn["rule"];
        SplitRule r;
        r.feature = get<std::string>(jr, "feature");
        r.feature_index = get<int>(jr, "feature_index");
        r.kind = parse_kind(get<std::string>(jr, "kind"));
        r.threshold = num_from_json(jr.at("threshold"));
        r.left_levels = get<std::vector<std::string>>(jr, "left_levels");
        r.right_levels = get<std::vector<std::string>>(jr, "right_levels");
        n.rule = std::move(r);
      }
      n.model = model_from_json(jn.at("model"), layout);
      for (const auto& jt : jn.at("trace")) {
        CandidateTrace t;
        t.feature = get<std::string>(jt, "feature");
        t.test = get<std::string>(jt, "test");
        t.statistic = num_from_json(jt.at("statistic"));
        t.p_value = num_from_json(jt.at("p_value"));
        t.log_p = num_from_json(jt.at("log_p"));
        t.adjusted_p = num_from_json(jt.at("adjusted_p"));
        t.improvement = num_from_json(jt.at("improvement"));
        n.trace.push_back(std::move(t));
      }
      nodes.push_back(std::move(n));
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      const int size = static_cast<int>(nodes.size());
      if (n.id != static_cast<int>(i)) throw SchemaError("node ids must be 0..n-1 in order");
      if (n.rule && (n.left <= n.id || n.right <= n.id || n.left >= size || n.right >= size)) {
        throw SchemaError("invalid child reference at node " + std::to_string(n.id));
      }
    }
    if (nodes.empty()) throw SchemaError("tree has no nodes");
    return MbtTree(config, layout, std::move(nodes));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed tree JSON: ") + e.what());
  }
}

MbtTree load_tree(const std::string& path) {
  const std::string text = read_text(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path + ": " + e.what());
  }
  return tree_from_json(j);
}

std::string render_tree(const MbtTree& tree, int top) {
  std::ostringstream os;
  const auto& cols = tree.layout().columns();
  std::function<void(int, const std::string&, const std::string&)> walk =
      [&](int id, const std::string& indent, const std::string& edge) {
        const Node& n = tree.node(id);
        os << indent << edge;
        if (n.rule) {
          os << "[" << n.id << "] n=" << n.n_obs << " split " << n.rule->describe() << "\n";
          const std::string child = indent + (edge.empty() ? "" : "|  ");
          walk(n.left, child, "yes: ");
          walk(n.right, child, "no:  ");
          return;
        }
        os << "[" << n.id << "] n=" << n.n_obs << " df=" << fixed(n.model.effective_df, 1)
           << " yhat = ";
        std::vector<std::size_t> order;
        double intercept = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) {
          const double v = n.model.coefficients(static_cast<Eigen::Index>(k));
          if (cols[k].term == Term::kIntercept) {
            intercept = v;
          } else if (v != 0.0) {
            order.push_back(k);
          }
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return std::abs(n.model.coefficients(static_cast<Eigen::Index>(a))) >
                 std::abs(n.model.coefficients(static_cast<Eigen::Index>(b)));
        });
        os << fixed(intercept, 4);
        const std::size_t shown = std::min(order.size(), static_cast<std::size_t>(std::max(top, 0)));
        for (std::size_t t = 0; t < shown; ++t) {
          const double v = n.model.coefficients(static_cast<Eigen::Index>(order[t]));
          os << (v < 0 ? " - " : " + ") << fixed(std::abs(v), 4) << "*" << cols[order[t]].label;
        }
        if (order.size() > shown) os << " + ... (" << order.size() - shown << " more)";
        os << "\n";
      };
  walk(tree.root(), "", "");
  return os.str();
}

Json scenario_to_json(const ScenarioSpec& s) {
  return {{"name", s.name},
          {"n", s.n},
          {"noise_scale", s.noise_scale ? Json(*s.noise_scale) : Json(nullptr)},
          {"seed", s.seed}};
}

ScenarioSpec scenario_from_json(const Json& j, ScenarioSpec s) {
  check_keys(j, {"name", "n", "noise_scale", "seed"}, "scenario");
  if (j.contains("name")) s.name = get<std::string>(j, "name");
  if (j.contains("n")) s.n = get<std::size_t>(j, "n");
  if (j.contains("noise_scale")) {
    s.noise_scale = j["noise_scale"].is_null() ? std::nullopt
                                               : std::optional<double>(get<double>(j, "noise_scale"));
  }
  if (j.contains("seed")) s.seed = get<std::uint64_t>(j, "seed");
  return s;
}

namespace {

Json settings_json(const std::vector<StudySetting>& settings) {
  Json out = Json::array();
  for (const auto& s : settings) out.push_back({{"label", s.label}, {"config", config_to_json(s.config)}});
  return out;
}

}  // namespace

Json fidelity_config_to_json(const FidelityStudyConfig& c) {
  return {{"study", "fidelity"},
          {"scenario", scenario_to_json(c.scenario)},
          {"source", c.source.name()},
          {"settings", settings_json(c.settings)},
          {"runs", c.runs},
          {"train_fraction", c.train_fraction},
          {"seed", c.seed}};
}

Json bias_config_to_json(const BiasStudyConfig& c) {
  return {{"study", "bias"},
          {"scenario", scenario_to_json(c.scenario)},
          {"settings", settings_json(c.settings)},
          {"runs", c.runs},
          {"seed", c.seed}};
}

Json stability_config_to_json(const StabilityConfig& c) {
  return {{"study", "stability"},
          {"scenario", scenario_to_json(c.scenario)},
          {"source", c.source.name()},
          {"setting", settings_json({c.setting}).at(0)},
          {"runs", c.runs},
          {"eval_n", c.eval_n},
          {"subsample", c.subsample},
          {"train_fraction", c.train_fraction},
          {"seed", c.seed}};
}

std::string fidelity_csv(const FidelityStudy& study, const Json& config) {
  std::ostringstream os;
  os << header_line(config);
  const std::string source = config.value("source", "");
  os << "black_box,mbt,setting,gamma_or_alpha,run,metric,value\n";
  for (const auto& r : study.rows) {
    const std::string prefix = csv_escape(source) + "," + algorithm_name(r.algorithm) + "," +
                               csv_escape(r.setting) + "," + format_number(r.stop_value) + "," +
                               std::to_string(r.run) + ",";
    if (!r.error.empty()) {
      os << prefix << "error," << csv_escape(r.error) << "\n";
      continue;
    }
    os << prefix << "leaves," << r.leaves << "\n";
    os << prefix << "depth," << r.depth << "\n";
    os << prefix << "r2_train," << format_number(r.r2_train) << "\n";
    os << prefix << "r2_test," << format_number(r.r2_test) << "\n";
    os << prefix << "mean_effective_df," << format_number(r.mean_effective_df) << "\n";
    os << prefix << "first_split," << csv_escape(r.first_split) << "\n";
    for (const auto& [f, s] : r.shares) {
      os << prefix << "share_count:" << csv_escape(f) << "," << format_number(s.count) << "\n";
      os << prefix << "share_weighted:" << csv_escape(f) << "," << format_number(s.weighted) << "\n";
    }
  }
  return os.str();
}

Json fidelity_summary_json(const FidelityStudy& study, const Json& config) {
  Json rows = Json::array();
  for (const auto& s : study.summary) {
    Json share_count = Json::object();
    for (const auto& [f, v] : s.share_count) share_count[f] = num_to_json(v);
    Json share_weighted = Json::object();
    for (const auto& [f, v] : s.share_weighted) share_weighted[f] = num_to_json(v);
    rows.push_back({{"setting", s.setting},
                    {"mbt", algorithm_name(s.algorithm)},
                    {"gamma_or_alpha", s.stop_value},
                    {"runs_ok", s.runs_ok},
                    {"runs_failed", s.runs_failed},
                    {"leaves_mean", num_to_json(s.leaves_mean)},
                    {"leaves_min", s.leaves_min},
                    {"leaves_max", s.leaves_max},
                    {"r2_train_mean", num_to_json(s.r2_train_mean)},
                    {"r2_train_sd", num_to_json(s.r2_train_sd)},
                    {"r2_test_mean", num_to_json(s.r2_test_mean)},
                    {"r2_test_sd", num_to_json(s.r2_test_sd)},
                    {"effective_df_mean", num_to_json(s.effective_df_mean)},
                    {"share_count", share_count},
                    {"share_weighted", share_weighted},
                    {"first_split", s.first_split}});
  }
  return {{"config", config},
          {"black_box", config.value("source", "")},
          {"surrogate_r2_train_mean", num_to_json(study.surrogate_r2_train_mean)},
          {"summary", rows}};
}

std::string fidelity_table(const FidelityStudy& study) {
  std::ostringstream os;
  os << pad("setting", 18) << pad("mbt", 7) << pad("stop", 8) << pad("leaves", 8) << pad("min", 5)
     << pad("max", 5) << pad("r2_train", 16) << pad("r2_test", 16) << "shares\n";
  for (const auto& s : study.summary) {
    std::string shares;
    for (const auto& [f, v] : s.share_count) shares += f + ":" + fixed(v, 3) + " ";
    os << pad(s.setting, 18) << pad(algorithm_name(s.algorithm), 7) << pad(format_number(s.stop_value), 8)
       << pad(fixed(s.leaves_mean, 2), 8) << pad(std::to_string(s.leaves_min), 5)
       << pad(std::to_string(s.leaves_max), 5)
       << pad(fixed(s.r2_train_mean, 4) + " (" + fixed(s.r2_train_sd, 4) + ")", 16)
       << pad(fixed(s.r2_test_mean, 4) + " (" + fixed(s.r2_test_sd, 4) + ")", 16) << shares;
    if (s.runs_failed) os << " [" << s.runs_failed << " failed]";
    os << "\n";
  }
  return os.str();
}

std::string bias_csv(const BiasReport& report, const Json& config) {
  std::ostringstream os;
  os << header_line(config);
  os << "setting,feature,count,frequency\n";
  for (const auto& s : report.settings) {
    for (const auto& f : report.features) {
      const auto it = s.counts.find(f);
      const int c = it == s.counts.end() ? 0 : it->second;
      os << csv_escape(s.setting) << "," << csv_escape(f) << "," << c << ","
         << format_number(s.frequency(f)) << "\n";
    }
    os << csv_escape(s.setting) << ",none," << s.none << ","
       << format_number(s.runs ? static_cast<double>(s.none) / s.runs : 0.0) << "\n";
  }
  return os.str();
}

Json bias_summary_json(const BiasReport& report, const Json& config) {
  Json settings = Json::array();
  for (const auto& s : report.settings) {
    Json freq = Json::object();
    for (const auto& f : report.features) freq[f] = s.frequency(f);
    settings.push_back({{"setting", s.setting},
                        {"runs", s.runs},
                        {"none", s.none},
                        {"counts", s.counts},
                        {"frequency", freq}});
  }
  return {{"config", config}, {"features", report.features}, {"settings", settings}};
}

std::string bias_table(const BiasReport& report) {
  std::ostringstream os;
  os << pad("setting", 18);
  for (const auto& f : report.features) os << pad(f, 8);
  os << "none\n";
  for (const auto& s : report.settings) {
    os << pad(s.setting, 18);
    for (const auto& f : report.features) os << pad(fixed(s.frequency(f), 3), 8);
    os << s.none << "\n";
  }
  return os.str();
}

std::string stability_csv(const StabilityReport& report, const Json& config) {
  std::ostringstream os;
  os << header_line(config);
  os << "leaves,pair,ri\n";
  for (const auto& b : report.buckets) {
    for (std::size_t i = 0; i < b.ri.size(); ++i) {
      os << b.leaves << "," << i << "," << format_number(b.ri[i]) << "\n";
    }
  }
  return os.str();
}

Json stability_summary_json(const StabilityReport& report, const Json& config) {
  Json buckets = Json::array();
  for (const auto& b : report.buckets) {
    buckets.push_back({{"leaves", b.leaves},
                       {"pairs", b.pairs},
                       {"ri_mean", b.mean},
                       {"ri_min", b.min},
                       {"ri_max", b.max}});
  }
  return {{"config", config},
          {"leaves", report.leaves},
          {"total_pairs", report.total_pairs},
          {"compared_pairs", report.compared_pairs},
          {"buckets", buckets},
          {"diagnostics", report.diagnostics}};
}

std::string stability_table(const StabilityReport& report) {
  std::ostringstream os;
  os << "compared " << report.compared_pairs << " of " << report.total_pairs << " pairs\n";
  os << pad("leaves", 8) << pad("pairs", 8) << pad("ri_mean", 10) << pad("ri_min", 10) << "ri_max\n";
  for (const auto& b : report.buckets) {
    os << pad(std::to_string(b.leaves), 8) << pad(std::to_string(b.pairs), 8)
       << pad(fixed(b.mean, 4), 10) << pad(fixed(b.min, 4), 10) << fixed(b.max, 4) << "\n";
  }
  if (!report.diagnostics.empty()) os << report.diagnostics;
  return os.str();
}

Schema tree_schema(const MbtTree& tree) {
  Schema schema;
  std::set<std::string> seen;
  for (const auto& b : tree.layout().bases()) {
    if (seen.insert(b.name).second) {
      schema.emplace_back(b.name, b.kind == Kind::kCategorical ? ColumnKind::categorical(b.levels)
                                                               : ColumnKind{b.kind, {}});
    }
  }
  for (const auto& n : tree.nodes()) {
    if (!n.rule || seen.count(n.rule->feature)) continue;
    seen.insert(n.rule->feature);
    if (n.rule->kind == Kind::kCategorical) {
      std::vector<std::string> levels = n.rule->left_levels;
      levels.insert(levels.end(), n.rule->right_levels.begin(), n.rule->right_levels.end());
      std::sort(levels.begin(), levels.end());
      schema.emplace_back(n.rule->feature, ColumnKind::categorical(levels));
    } else {
      schema.emplace_back(n.rule->feature, ColumnKind{n.rule->kind, {}});
    }
  }
  return schema;
}

}  // namespace mbt
