#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>

#include "doctest.h"
#include "mbt/errors.hpp"
#include "mbt/io.hpp"
#include "mbt/metrics.hpp"
#include "mbt/rng.hpp"
#include "mbt/sim.hpp"

using namespace mbt;

namespace {

ScenarioData make(const std::string& name, std::size_t n, std::uint64_t seed,
                  std::optional<double> noise = std::nullopt) {
  ScenarioSpec s;
  s.name = name;
  s.n = n;
  s.seed = seed;
  s.noise_scale = noise;
  return gen_scenario(s);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Sample mean and variance within 5 Monte-Carlo standard deviations of the
// declared distribution (fourth central moment given for the variance).
void check_moments(const std::vector<double>& v, double mean, double var, double mu4) {
  const double n = static_cast<double>(v.size());
  CHECK(std::abs(mean_of(v) - mean) < 5 * std::sqrt(var / n));
  // Exact variance of the unbiased sample variance.
  CHECK(std::abs(var_of(v) - var) < 5 * std::sqrt((mu4 - (n - 3) / (n - 1) * var * var) / n));
}

// Moments of a discrete uniform law on `points`.
void check_discrete(const std::vector<double>& v, const std::vector<double>& points) {
  const double k = static_cast<double>(points.size());
  const double m = std::accumulate(points.begin(), points.end(), 0.0) / k;
  double var = 0.0;
  double mu4 = 0.0;
  for (double p : points) {
    var += std::pow(p - m, 2) / k;
    mu4 += std::pow(p - m, 4) / k;
  }
  check_moments(v, m, var, mu4);
}

void check_uniform(const std::vector<double>& v, double lo, double hi) {
  const double w = hi - lo;
  check_moments(v, 0.5 * (lo + hi), w * w / 12, std::pow(w, 4) / 80);
}

std::vector<double> grid(int steps) {
  std::vector<double> g;
  for (int i = 0; i <= steps; ++i) g.push_back(static_cast<double>(i) / steps);
  return g;
}

StudySetting setting(const std::string& label, Algorithm a, double stop) {
  StudySetting s;
  s.label = label;
  s.config.algorithm = a;
  s.config.gamma = stop;
  s.config.alpha = stop;
  return s;
}

}  // namespace

TEST_SUITE("sim_io") {

TEST_CASE("signal formulas") {
  {
    const ScenarioData d = make("linear_smooth", 300, 1);
    const auto& x1 = d.data.column("x1").values;
    const auto& x2 = d.data.column("x2").values;
    const auto& x3 = d.data.column("x3").values;
    for (std::size_t i = 0; i < 300; ++i) {
      CHECK(d.f[i] == doctest::Approx(x1[i] + 4 * x2[i] + 3 * x2[i] * x3[i]));
    }
    Dataset one({Column{"x1", ColumnKind::numeric(), {1}}, Column{"x2", ColumnKind::numeric(), {1}},
                 Column{"x3", ColumnKind::numeric(), {1}}});
    const Eigen::MatrixXd X = d.formula.design(one);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(X.cols());
    coef << 0, 1, 4, 0, 3;
    CHECK(X.row(0).dot(coef) == doctest::Approx(8.0));
  }
  {
    const ScenarioData d = make("linear_categorical", 400, 2);
    const auto& x1 = d.data.column("x1").values;
    const auto& x2 = d.data.column("x2").values;
    const auto& x3 = d.data.column("x3").values;
    for (std::size_t i = 0; i < 400; ++i) {
      const double f = x1[i] - 8 * x2[i] + 16 * x2[i] * (x3[i] == 0) + 8 * x2[i] * (x1[i] > 0.0);
      CHECK(d.f[i] == doctest::Approx(f));
      if (x1[i] > 0.0 && x3[i] == 0 && std::abs(x2[i] - 1) < 1e-12) CHECK(f == doctest::Approx(x1[i] + 16));
    }
  }
  {
    const ScenarioData d = make("nonlinear", 400, 3);
    std::vector<const std::vector<double>*> x;
    for (int j = 1; j <= 6; ++j) x.push_back(&d.data.column("x" + std::to_string(j)).values);
    for (std::size_t i = 0; i < 400; ++i) {
      const double x3 = (*x[2])[i];
      const double f = (*x[0])[i] + 2 * std::pow((*x[1])[i], 2) + x3 * std::log(std::abs(x3)) +
                       (*x[3])[i] * (*x[4])[i] + (*x[0])[i] * (*x[3])[i] * ((*x[5])[i] == 0);
      CHECK(d.f[i] == doctest::Approx(f));
    }
    Dataset ones({Column{"x1", ColumnKind::numeric(), {1}}, Column{"x2", ColumnKind::numeric(), {1}},
                  Column{"x3", ColumnKind::numeric(), {1}}, Column{"x4", ColumnKind::numeric(), {1}},
                  Column{"x5", ColumnKind::numeric(), {1}}, Column{"x6", ColumnKind::binary(), {1}}});
    const Eigen::MatrixXd X = d.formula.design(ones);
    // intercept, x1..x6, x2^2, x3 log|x3|, x4 x5, x1 x4 1(x6 = 0)
    REQUIRE(X.cols() == 11);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(11);
    coef(1) = 1;
    coef(7) = 2;
    coef(8) = 1;
    coef(9) = 1;
    coef(10) = 1;
    CHECK(X.row(0).dot(coef) == doctest::Approx(4.0));
  }
  {
    const ScenarioData d = make("interaction_nn", 400, 4);
    const auto& x1 = d.data.column("x1").values;
    const auto& x2 = d.data.column("x2").values;
    const auto& x3 = d.data.column("x3").values;
    const auto& x4 = d.data.column("x4").values;
    const double m1 = mean_of(x1);
    const double m3 = mean_of(x3);
    for (std::size_t i = 0; i < 400; ++i) {
      CHECK(d.f[i] == doctest::Approx((x1[i] <= m1) * x2[i] + (x3[i] <= m3) * x4[i]));
    }
  }
}

TEST_CASE("noise level and independence targets") {
  const ScenarioData exact = make("linear_mixed", 500, 5, 0.0);
  CHECK(exact.data.target() == exact.f);
  const ScenarioData noisy = make("linear_smooth", 20000, 6);
  std::vector<double> eps(20000);
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = noisy.data.target()[i] - noisy.f[i];
  CHECK(var_of(eps) == doctest::Approx(0.01 * var_of(noisy.f)).epsilon(0.05));
  const ScenarioData ind = make("independence_numeric", 20000, 7);
  check_moments(ind.data.target(), 0.0, 1.0, 3.0);
  CHECK(std::all_of(ind.f.begin(), ind.f.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("feature distributions") {
  const std::size_t n = 10000;
  const ScenarioData a = make("independence_numeric", n, 8);
  check_uniform(a.data.column("x1").values, 0, 1);
  check_uniform(a.data.column("x2").values, 0, 1);
  check_discrete(a.data.column("x3").values, grid(10));
  check_discrete(a.data.column("x4").values, grid(100));

  const ScenarioData b = make("independence_mixed", n, 9);
  check_discrete(b.data.column("x4").values, {0, 1});
  for (const char* name : {"x5", "x6"}) {
    const Column& c = b.data.column(name);
    const double L = static_cast<double>(c.kind.levels.size());
    std::map<int, double> count;
    for (double v : c.values) count[static_cast<int>(v)] += 1;
    for (auto [lv, k] : count) {
      CHECK(std::abs(k / n - 1 / L) < 5 * std::sqrt((1 / L) * (1 - 1 / L) / n));
    }
  }
  CHECK(b.data.column("x5").kind.levels.size() == 5);
  CHECK(b.data.column("x6").kind.levels.size() == 8);

  const ScenarioData c = make("linear_smooth_noise", n, 10);
  CHECK(c.data.n_features() == 10);
  for (const auto& col : c.data.columns()) check_uniform(col.values, -1, 1);
}

TEST_CASE("seeds reproduce and derived seeds differ") {
  CHECK(make("interaction_nc", 200, 11).data == make("interaction_nc", 200, 11).data);
  CHECK(!(make("interaction_nc", 200, derive_seed(11, 0)).data ==
          make("interaction_nc", 200, derive_seed(11, 1)).data));
  ScenarioSpec bad;
  bad.name = "nope";
  CHECK_THROWS_AS(gen_scenario(bad), ConfigError);
  for (const auto& name : scenario_names()) CHECK_NOTHROW(make(name, 50, 1));
}

TEST_CASE("surrogate sources") {
  const ScenarioData clean = make("linear_smooth", 500, 12, 0.0);
  CHECK(surrogate_targets(clean.data, SurrogateSource::oracle(), &clean.f) == clean.data.target());

  const ScenarioData d = make("linear_smooth", 1000, 13);
  const auto fitted = surrogate_targets(d.data, SurrogateSource::fitted_lm(), &d.f, &d.formula);
  const auto fr = fidelity(d.f, fitted);
  REQUIRE(fr.r2);
  CHECK(*fr.r2 >= 0.99);

  std::vector<double> preds(d.data.n_rows());
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i] = 0.25 * static_cast<double>(i) - 3.0;
  std::vector<Column> cols = d.data.columns();
  cols.push_back(Column{"bb", ColumnKind::numeric(), preds});
  Schema schema;
  for (const auto& c : cols) schema.emplace_back(c.name, c.kind);
  const Dataset with(cols, d.data.target());
  const Dataset back = parse_csv(to_csv(with), schema, "y");
  CHECK(surrogate_targets(back, SurrogateSource::external("bb")) == preds);
  CHECK_THROWS_AS(surrogate_targets(back, SurrogateSource::external("zz")), DataError);

  const Formula dup = Formula::parse("x1+x2+x1");
  CHECK_THROWS_AS(surrogate_targets(d.data, SurrogateSource::fitted_lm(dup)), NumericalError);
}

TEST_CASE("formula and source text round trip") {
  const std::string text = "x1+x2:I(x3==0)+x2:I(x1>0.25)+x2^2+xlogx(x3)+I(x5 in a|b):x4";
  const Formula f = Formula::parse(text);
  CHECK(Formula::parse(f.str()) == f);
  for (const char* s : {"oracle", "lm", "external:col"}) CHECK(parse_source(s).name() == s);
  CHECK(parse_source("lm:" + f.str()).formula == f);
  CHECK_THROWS_AS(parse_source("gam"), ConfigError);
}

TEST_CASE("fidelity study output is deterministic") {
  FidelityStudyConfig c;
  c.scenario.name = "linear_categorical";
  c.scenario.n = 600;
  c.runs = 2;
  c.seed = 3;
  c.settings = {setting("slim", Algorithm::kSlim, 0.05), setting("mob", Algorithm::kMob, 0.05)};
  const Json cfg = fidelity_config_to_json(c);
  const std::string a = fidelity_csv(run_fidelity_study(c), cfg);
  c.jobs = 2;
  const std::string b = fidelity_csv(run_fidelity_study(c), fidelity_config_to_json(c));
  CHECK(a == b);
  CHECK(a.rfind("# {", 0) == 0);
}

TEST_CASE("slim leaves and fit grow as gamma shrinks") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const ScenarioData d = make("linear_categorical", 1000, seed);
    std::size_t prev_leaves = 0;
    double prev_r2 = -1.0;
    for (double gamma : {0.15, 0.10, 0.05}) {
      MbtConfig c;
      c.gamma = gamma;
      const MbtTree t = grow(d.data, c);
      const Eigen::VectorXd p = predict_tree(t, d.data);
      const auto r2 = *fidelity(d.data.target(), std::vector<double>(p.data(), p.data() + p.size())).r2;
      CHECK(t.leaf_count() >= prev_leaves);
      CHECK(r2 >= prev_r2 - 1e-12);
      prev_leaves = t.leaf_count();
      prev_r2 = r2;
    }
  }
}

TEST_CASE("bias study mass equals runs with a split") {
  BiasStudyConfig c;
  c.scenario.name = "independence_mixed";
  c.scenario.n = 300;
  c.runs = 20;
  c.settings = {setting("slim", Algorithm::kSlim, 0.05), setting("ctree", Algorithm::kCtree, 0.05)};
  const BiasReport r = run_bias_study(c);
  for (const auto& s : r.settings) {
    int total = 0;
    for (const auto& [f, k] : s.counts) total += k;
    CHECK(total + s.none == s.runs);
    CHECK(s.runs == 20);
  }
}

TEST_CASE("stability study buckets") {
  StabilityConfig c;
  c.scenario.name = "linear_smooth";
  c.scenario.n = 600;
  c.source = SurrogateSource::oracle();
  c.setting = setting("slim", Algorithm::kSlim, 0.05);
  c.runs = 6;
  c.eval_n = 2000;
  c.subsample = 500;
  const StabilityReport r = run_stability_study(c);
  CHECK(r.total_pairs == 15);
  std::size_t compared = 0;
  for (const auto& b : r.buckets) {
    CHECK(b.pairs <= 15);
    CHECK(b.ri.size() == b.pairs);
    for (double v : b.ri) CHECK((v >= 0.0 && v <= 1.0));
    compared += b.pairs;
  }
  CHECK(compared == r.compared_pairs);

  c.setting.config.gamma = 1.0;  // every run is a stump: identical partitions
  const StabilityReport s = run_stability_study(c);
  REQUIRE(s.buckets.size() == 1);
  CHECK(s.buckets[0].pairs == 15);
  CHECK(s.buckets[0].min == 1.0);
}

TEST_CASE("tree json round trip") {
  const ScenarioData d = make("independence_mixed", 500, 14);
  for (Algorithm a : {Algorithm::kSlim, Algorithm::kGuide}) {
    MbtConfig c;
    c.algorithm = a;
    c.gamma = 0.0;
    c.max_depth = 3;
    c.leaf = LeafModelSpec::ridge(0.5);
    const MbtTree t = grow(d.data, c);
    const Json j = tree_to_json(t);
    const MbtTree back = tree_from_json(Json::parse(j.dump()));
    CHECK(tree_to_json(back).dump() == j.dump());
    const Eigen::VectorXd p1 = predict_tree(t, d.data);
    const Eigen::VectorXd p2 = predict_tree(back, d.data);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(render_tree(t).find("[0]") != std::string::npos);
  }
  CHECK_THROWS_AS(tree_from_json(Json::parse("{\"format\": \"other\"}")), SchemaError);
}

TEST_CASE("config json and numbers") {
  MbtConfig c;
  c.algorithm = Algorithm::kCtree;
  c.alpha = 0.01;
  c.n_quantiles = 7;
  c.leaf = LeafModelSpec::lasso_bic(4);
  const MbtConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.leaf == c.leaf);
  CHECK_THROWS_AS(config_from_json(Json::parse("{\"bogus\": 1}")), ConfigError);
  CHECK(std::isinf(num_from_json(num_to_json(-INFINITY))));
  CHECK(std::isnan(num_from_json(num_to_json(NAN))));
  CHECK(num_from_json(num_to_json(0.1)) == 0.1);
  CHECK(format_number(0.1) == "0.1");
  CHECK(csv_escape("a,b") == "\"a,b\"");
}

}  // TEST_SUITE
