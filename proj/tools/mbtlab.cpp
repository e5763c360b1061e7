#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbt/errors.hpp"
#include "mbt/io.hpp"
#include "mbt/metrics.hpp"
#include "mbt/sim.hpp"
#include "mbt/tree.hpp"

namespace {

using namespace mbt;

enum Exit { kOk = 0, kConfig = 1, kData = 2, kNumerical = 3 };

// Shared tree flags.
struct TreeFlags {
  std::string algo = "slim";
  double gamma = 0.05;
  double alpha = 0.05;
  int max_depth = 6;
  int min_node = 50;
  int n_quantiles = 0;
  std::string leaf = "ols";
  double lambda = 0.0;
  int df_cap = 0;
  int knots = 5;
  std::string stop_base = "parent_improvement";
  bool guide_split_only_categoricals = false;
  bool guide_bootstrap = false;
  int guide_n_boot = 100;

  void add(CLI::App* app, bool single_algo) {
    if (single_algo) app->add_option("--algo", algo, "slim | mob | ctree | guide");
    app->add_option("--gamma", gamma, "SLIM/GUIDE improvement fraction");
    app->add_option("--alpha", alpha, "MOB/CTree significance level");
    app->add_option("--max-depth", max_depth);
    app->add_option("--min-node", min_node, "minimum observations per child");
    app->add_option("--n-quantiles", n_quantiles, "SLIM candidate thinning (0 = all values)");
    app->add_option("--leaf", leaf, "ols | ridge | lasso_bic | bspline | poly_lasso");
    app->add_option("--lambda", lambda, "ridge penalty");
    app->add_option("--df-cap", df_cap, "lasso df cap (0 = none)");
    app->add_option("--knots", knots, "B-spline knots per feature");
    app->add_option("--stop-base", stop_base, "parent_improvement | node_sse");
    app->add_flag("--guide-split-only-categoricals", guide_split_only_categoricals,
                  "GUIDE: categorical features only split, never regress");
    app->add_flag("--guide-bootstrap", guide_bootstrap, "GUIDE bootstrap bias correction");
    app->add_option("--guide-n-boot", guide_n_boot);
  }

  MbtConfig config(const std::string& algorithm, std::uint64_t seed) const {
    MbtConfig c;
    c.algorithm = parse_algorithm(algorithm);
    c.gamma = gamma;
    c.alpha = alpha;
    c.max_depth = max_depth;
    c.min_node_size = min_node;
    if (n_quantiles > 0) c.n_quantiles = n_quantiles;
    c.leaf.kind = parse_leaf_kind(leaf);
    c.leaf.lambda = lambda;
    if (df_cap > 0) c.leaf.df_cap = df_cap;
    c.leaf.knots_per_feature = knots;
    c.stop_base = parse_stop_base(stop_base);
    c.guide_categorical_as_regressors = !guide_split_only_categoricals;
    c.guide_bootstrap_correction = guide_bootstrap;
    c.guide_n_boot = guide_n_boot;
    c.seed = seed;
    c.validate();
    return c;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> number_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + t + "'");
    }
  }
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MBTLAB_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("MBTLAB_SEED is not an unsigned integer");
    }
  }
  return 1;
}

// Study setting from an algorithm token: slim, mob, ctree, guide, plus the
// variants guide_boot (bootstrap correction) and slim_q<N> (quantile thinning).
StudySetting make_setting(const std::string& token, const TreeFlags& flags, double stop) {
  std::string algo = token;
  TreeFlags f = flags;
  if (token == "guide_boot") {
    algo = "guide";
    f.guide_bootstrap = true;
  } else if (token.rfind("slim_q", 0) == 0) {
    algo = "slim";
    try {
      f.n_quantiles = std::stoi(token.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("bad variant '" + token + "'");
    }
  }
  MbtConfig c = f.config(algo, 0);
  if (c.algorithm == Algorithm::kSlim || c.algorithm == Algorithm::kGuide) {
    c.gamma = stop;
  } else {
    c.alpha = stop;
  }
  c.validate();
  return {token + "@" + format_number(stop), c};
}

std::vector<StudySetting> make_settings(const std::string& algos, const std::string& gammas,
                                        const std::string& alphas, const TreeFlags& flags) {
  std::vector<StudySetting> out;
  for (const auto& a : split_list(algos)) {
    const std::string base = a.rfind("slim", 0) == 0 ? "slim" : a.rfind("guide", 0) == 0 ? "guide" : a;
    const bool uses_gamma = base == "slim" || base == "guide";
    if (!uses_gamma && base != "mob" && base != "ctree") {
      throw ConfigError("unknown algorithm '" + a + "'");
    }
    for (double v : number_list(uses_gamma ? gammas : alphas)) out.push_back(make_setting(a, flags, v));
  }
  if (out.empty()) throw ConfigError("no algorithms selected");
  return out;
}

Dataset read_data(const std::string& path, const std::string& target,
                  const std::vector<std::string>& exclude,
                  const std::vector<std::string>& categorical) {
  const std::string text = read_text(path);
  std::vector<std::string> skip = exclude;
  if (!target.empty()) skip.push_back(target);
  Schema schema = infer_schema(text, skip);
  for (const auto& name : categorical) {
    bool found = false;
    for (auto& [col, kind] : schema) {
      if (col != name) continue;
      found = true;
      if (!kind.is_categorical()) {
        // Re-infer the level set from the text as strings.
        const Dataset tmp = parse_csv(text, {{name, ColumnKind::categorical({})}}, "",
                                      CsvOptions{true});
        kind = tmp.column(0).kind;
      }
    }
    if (!found) throw ConfigError("--categorical names unknown column " + name);
  }
  return parse_csv(text, schema, target);
}

// Applies a JSON config file: every key becomes a --key flag unless that flag
// is already on the command line, so flags win over the file.
std::vector<std::string> merge_config_file(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config file: " + std::string(e.what()));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  auto present = [&](const std::string& flag) {
    for (const auto& a : rest) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    if (present(flag)) continue;
    const Json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) rest.push_back(flag);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) {
        if (!joined.empty()) joined += ",";
        joined += e.is_string() ? e.get<std::string>() : e.dump();
      }
      rest.push_back(flag);
      rest.push_back(joined);
    } else if (v.is_string()) {
      rest.push_back(flag);
      rest.push_back(v.get<std::string>());
    } else if (v.is_number()) {
      rest.push_back(flag);
      rest.push_back(v.dump());
    } else {
      throw ConfigError("config key '" + it.key() + "' must be a scalar or list");
    }
  }
  return rest;
}

void write_outputs(const std::string& prefix, const std::string& csv, const Json& summary) {
  write_text(prefix + ".csv", csv);
  write_text(prefix + ".json", summary.dump(2) + "\n");
}

int run(int argc, char** argv) {
  CLI::App app{"Model-based trees as surrogate models: fit, predict and simulation studies"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed_flag;

  // fit
  auto* fit = app.add_subcommand("fit", "Grow a tree on a CSV file");
  std::string fit_data, fit_target, fit_out = "tree.json", fit_text, fit_report;
  std::string fit_exclude, fit_categorical, fit_split_only, fit_regress_only;
  TreeFlags fit_flags;
  fit->add_option("--data", fit_data, "input CSV")->required();
  fit->add_option("--target", fit_target, "target column (black-box predictions)")->required();
  fit->add_option("--out", fit_out, "tree JSON output");
  fit->add_option("--text", fit_text, "text rendering output (default <out>.txt)");
  fit->add_option("--report", fit_report, "fidelity report JSON (default <out>.report.json)");
  fit->add_option("--exclude", fit_exclude, "comma-separated columns to ignore");
  fit->add_option("--categorical", fit_categorical, "comma-separated columns forced categorical");
  fit->add_option("--split-only", fit_split_only, "features used only for splitting");
  fit->add_option("--regress-only", fit_regress_only, "features used only as regressors");
  fit->add_option("--seed", seed_flag, "master seed (fallback: MBTLAB_SEED, then 1)");
  fit_flags.add(fit, true);

  // predict
  auto* pred = app.add_subcommand("predict", "Apply a fitted tree to a CSV file");
  std::string pred_tree, pred_data, pred_out = "predictions.csv";
  pred->add_option("--tree", pred_tree, "tree JSON")->required();
  pred->add_option("--data", pred_data, "input CSV")->required();
  pred->add_option("--out", pred_out, "predictions CSV");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a simulated scenario to CSV");
  ScenarioSpec gen_spec;
  std::optional<double> gen_noise;
  std::string gen_out = "data.csv", gen_source = "lm";
  gen->add_option("--scenario", gen_spec.name)->required();
  gen->add_option("--n", gen_spec.n);
  gen->add_option("--noise-scale", gen_noise);
  gen->add_option("--source", gen_source, "oracle | lm | lm:<formula>; written as column yhat");
  gen->add_option("--seed", seed_flag);
  gen->add_option("--out", gen_out);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Fidelity / interpretability study");
  ScenarioSpec sim_spec;
  std::optional<double> sim_noise;
  std::string sim_source = "lm", sim_algos = "slim,guide,mob,ctree", sim_gammas = "0.05",
              sim_alphas = "0.05", sim_out = "simulate";
  int sim_runs = 30, sim_jobs = 1;
  double sim_train = 2.0 / 3.0;
  TreeFlags sim_flags;
  sim->add_option("--scenario", sim_spec.name)->required();
  sim->add_option("--n", sim_spec.n);
  sim->add_option("--noise-scale", sim_noise);
  sim->add_option("--source", sim_source, "oracle | lm | lm:<formula>");
  sim->add_option("--algos", sim_algos, "comma list; variants guide_boot, slim_q<N>");
  sim->add_option("--gammas", sim_gammas);
  sim->add_option("--alphas", sim_alphas);
  sim->add_option("--runs", sim_runs);
  sim->add_option("--train-fraction", sim_train);
  sim->add_option("--seed", seed_flag);
  sim->add_option("--jobs", sim_jobs);
  sim->add_option("--out", sim_out, "output prefix for .csv and .json");
  sim_flags.add(sim, false);

  // bias
  auto* bias = app.add_subcommand("bias", "First-split selection-bias study");
  ScenarioSpec bias_spec;
  bias_spec.n = 1000;
  std::string bias_algos = "slim,mob,ctree,guide", bias_out = "bias";
  int bias_runs = 1000, bias_jobs = 1;
  TreeFlags bias_flags;
  bias->add_option("--scenario", bias_spec.name)->required();
  bias->add_option("--n", bias_spec.n);
  bias->add_option("--algos", bias_algos, "comma list; variants guide_boot, slim_q<N>");
  bias->add_option("--runs", bias_runs);
  bias->add_option("--seed", seed_flag);
  bias->add_option("--jobs", bias_jobs);
  bias->add_option("--out", bias_out, "output prefix for .csv and .json");
  bias_flags.add(bias, false);

  // stability
  auto* stab = app.add_subcommand("stability", "Rand-index stability study");
  ScenarioSpec stab_spec;
  std::optional<double> stab_noise;
  std::string stab_source = "lm", stab_out = "stability";
  int stab_runs = 20, stab_jobs = 1;
  std::size_t stab_eval = 50000, stab_sub = 1000;
  double stab_train = 2.0 / 3.0;
  TreeFlags stab_flags;
  stab->add_option("--scenario", stab_spec.name)->required();
  stab->add_option("--n", stab_spec.n);
  stab->add_option("--noise-scale", stab_noise);
  stab->add_option("--source", stab_source);
  stab->add_option("--runs", stab_runs);
  stab->add_option("--eval-n", stab_eval);
  stab->add_option("--subsample", stab_sub);
  stab->add_option("--train-fraction", stab_train);
  stab->add_option("--seed", seed_flag);
  stab->add_option("--jobs", stab_jobs);
  stab->add_option("--out", stab_out, "output prefix for .csv and .json");
  stab_flags.add(stab, true);

  std::vector<std::string> args(argv + 1, argv + argc);
  args = merge_config_file(std::move(args));
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  const std::uint64_t seed = resolve_seed(seed_flag);

  if (*fit) {
    MbtConfig cfg = fit_flags.config(fit_flags.algo, seed);
    Dataset ds = read_data(fit_data, fit_target, split_list(fit_exclude), split_list(fit_categorical));
    const auto split_only = split_list(fit_split_only);
    const auto regress_only = split_list(fit_regress_only);
    if (!split_only.empty() || !regress_only.empty()) {
      FeatureRoles roles = FeatureRoles::all(ds.n_features());
      for (const auto& n : split_only) roles[ds.index_of(n)].regression = false;
      for (const auto& n : regress_only) roles[ds.index_of(n)].splitting = false;
      cfg.roles = roles;
    }
    const MbtTree tree = grow(ds, cfg);
    const Eigen::VectorXd p = predict_tree(tree, ds);
    const FidelityReport rep = fidelity(
        ds.target(), std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    const std::string text = render_tree(tree);
    write_text(fit_out, tree_to_json(tree).dump(2) + "\n");
    write_text(fit_text.empty() ? fit_out + ".txt" : fit_text, text);
    Json report = {{"config", config_to_json(cfg)},
                   {"data", fit_data},
                   {"target", fit_target},
                   {"n", rep.n},
                   {"leaves", tree.leaf_count()},
                   {"depth", tree.depth()},
                   {"r2", rep.r2 ? num_to_json(*rep.r2) : Json(nullptr)},
                   {"mse", rep.mse},
                   {"mae", rep.mae},
                   {"max_ae", rep.max_ae}};
    write_text(fit_report.empty() ? fit_out + ".report.json" : fit_report, report.dump(2) + "\n");
    std::cout << text << "leaves " << tree.leaf_count() << ", R2 "
              << (rep.r2 ? format_number(*rep.r2) : "n/a") << "\n";
    return kOk;
  }

  if (*pred) {
    const MbtTree tree = load_tree(pred_tree);
    const Dataset ds = parse_csv(read_text(pred_data), tree_schema(tree), "", CsvOptions{true});
    const Routing r = route(tree, ds);
    const Eigen::VectorXd p = predict_tree(tree, ds);
    std::ostringstream os;
    os << "row,leaf,prediction\n";
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      os << i << "," << r.leaf[i] << "," << format_number(p(static_cast<Eigen::Index>(i))) << "\n";
    }
    write_text(pred_out, os.str());
    if (r.unseen_levels > 0) {
      std::cerr << "warning: " << r.unseen_levels
                << " categorical values were not seen in training and were routed right\n";
    }
    return kOk;
  }

  if (*gen) {
    gen_spec.noise_scale = gen_noise;
    gen_spec.seed = seed;
    const ScenarioData sd = gen_scenario(gen_spec);
    const std::vector<double> yhat =
        surrogate_targets(sd.data, parse_source(gen_source), &sd.f, &sd.formula);
    std::vector<Column> cols = sd.data.columns();
    cols.push_back({"f", ColumnKind::numeric(), sd.f});
    cols.push_back({"yhat", ColumnKind::numeric(), yhat});
    write_text(gen_out, to_csv(Dataset(std::move(cols), sd.data.target()), "y"));
    return kOk;
  }

  if (*sim) {
    FidelityStudyConfig c;
    sim_spec.noise_scale = sim_noise;
    c.scenario = sim_spec;
    c.source = parse_source(sim_source);
    c.settings = make_settings(sim_algos, sim_gammas, sim_alphas, sim_flags);
    c.runs = sim_runs;
    c.train_fraction = sim_train;
    c.seed = seed;
    c.jobs = sim_jobs;
    const FidelityStudy study = run_fidelity_study(c);
    const Json cj = fidelity_config_to_json(c);
    write_outputs(sim_out, fidelity_csv(study, cj), fidelity_summary_json(study, cj));
    std::cout << fidelity_table(study);
    return kOk;
  }

  if (*bias) {
    BiasStudyConfig c;
    c.scenario = bias_spec;
    c.settings = make_settings(bias_algos, format_number(bias_flags.gamma),
                               format_number(bias_flags.alpha), bias_flags);
    c.runs = bias_runs;
    c.seed = seed;
    c.jobs = bias_jobs;
    const BiasReport report = run_bias_study(c);
    const Json cj = bias_config_to_json(c);
    write_outputs(bias_out, bias_csv(report, cj), bias_summary_json(report, cj));
    std::cout << bias_table(report);
    return kOk;
  }

  if (*stab) {
    StabilityConfig c;
    stab_spec.noise_scale = stab_noise;
    c.scenario = stab_spec;
    c.source = parse_source(stab_source);
    const auto algo = parse_algorithm(stab_flags.algo);
    const double stop =
        algo == Algorithm::kSlim || algo == Algorithm::kGuide ? stab_flags.gamma : stab_flags.alpha;
    c.setting = make_setting(stab_flags.algo, stab_flags, stop);
    c.runs = stab_runs;
    c.eval_n = stab_eval;
    c.subsample = stab_sub;
    c.train_fraction = stab_train;
    c.seed = seed;
    c.jobs = stab_jobs;
    const StabilityReport report = run_stability_study(c);
    const Json cj = stability_config_to_json(c);
    write_outputs(stab_out, stability_csv(report, cj), stability_summary_json(report, cj));
    std::cout << stability_table(report);
    return kOk;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mbt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const mbt::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const mbt::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
