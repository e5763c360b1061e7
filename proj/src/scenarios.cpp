#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mbt/errors.hpp"
#include "mbt/leaf_models.hpp"
#include "mbt/rng.hpp"
#include "mbt/sim.hpp"

namespace mbt {

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "linear_smooth",        "linear_categorical", "linear_mixed",   "independence_numeric",
      "independence_mixed",   "interaction_nn",     "interaction_bc", "interaction_nb",
      "interaction_nc",       "linear_smooth_noise", "nonlinear",     "guide_replication"};
  return names;
}

namespace {

bool is_independence(const std::string& name) {
  return name == "independence_numeric" || name == "independence_mixed" ||
         name == "guide_replication";
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool to_number(const std::string& s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Factor parse_factor(const std::string& text) {
  Factor f;
  if (text.empty()) throw ConfigError("empty formula factor");
  if (text.rfind("I(", 0) == 0 && text.back() == ')') {
    const std::string body = trim(text.substr(2, text.size() - 3));
    for (const char* op : {"==", "<=", ">", " in "}) {
      const auto pos = body.find(op);
      if (pos == std::string::npos) continue;
      f.feature = trim(body.substr(0, pos));
      const std::string rhs = trim(body.substr(pos + std::string(op).size()));
      const std::string o = op;
      if (o == " in ") {
        f.type = Factor::Type::kInSet;
        f.levels = split(rhs, '|');
      } else {
        f.type = o == "==" ? Factor::Type::kEqual
                 : o == "<=" ? Factor::Type::kLessEq
                             : Factor::Type::kGreater;
        if (!to_number(rhs, f.value)) {
          if (f.type != Factor::Type::kEqual) {
            throw ConfigError("comparison needs a number in '" + text + "'");
          }
          f.levels = {rhs};
        }
      }
      return f;
    }
    throw ConfigError("cannot parse indicator '" + text + "'");
  }
  if (text.rfind("xlogx(", 0) == 0 && text.back() == ')') {
    f.type = Factor::Type::kXLogAbs;
    f.feature = trim(text.substr(6, text.size() - 7));
    return f;
  }
  if (text.size() > 2 && text.substr(text.size() - 2) == "^2") {
    f.type = Factor::Type::kSquare;
    f.feature = trim(text.substr(0, text.size() - 2));
    return f;
  }
  f.type = Factor::Type::kLinear;
  f.feature = text;
  return f;
}

Factor lin(const std::string& x) { return {Factor::Type::kLinear, x, 0.0, {}}; }
Factor eq(const std::string& x, double v) { return {Factor::Type::kEqual, x, v, {}}; }
Factor le(const std::string& x, double v) { return {Factor::Type::kLessEq, x, v, {}}; }
Factor gt(const std::string& x, double v) { return {Factor::Type::kGreater, x, v, {}}; }
Factor in_set(const std::string& x, std::vector<std::string> levels) {
  return {Factor::Type::kInSet, x, 0.0, std::move(levels)};
}

std::vector<std::string> letters(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

class Builder {
 public:
  explicit Builder(std::uint64_t seed, std::size_t n) : rng_(seed), n_(n) {}

  void uniform(const std::string& name, double lo, double hi) {
    std::vector<double> v(n_);
    for (auto& x : v) x = rng_.uniform(lo, hi);
    cols_.push_back({name, ColumnKind::numeric(), std::move(v)});
  }
  // Uniform on {0, 1/steps, ..., 1}.
  void grid(const std::string& name, int steps) {
    std::vector<double> v(n_);
    for (auto& x : v) x = static_cast<double>(rng_.index(static_cast<std::size_t>(steps) + 1)) / steps;
    cols_.push_back({name, ColumnKind::numeric(), std::move(v)});
  }
  void bernoulli(const std::string& name) {
    std::vector<double> v(n_);
    for (auto& x : v) x = rng_.bernoulli(0.5) ? 1.0 : 0.0;
    cols_.push_back({name, ColumnKind::binary(), std::move(v)});
  }
  void categorical(const std::string& name, int levels) {
    std::vector<double> v(n_);
    for (auto& x : v) x = static_cast<double>(rng_.index(static_cast<std::size_t>(levels)));
    cols_.push_back({name, ColumnKind::categorical(letters(levels)), std::move(v)});
  }

  const std::vector<double>& values(const std::string& name) const {
    for (const auto& c : cols_) {
      if (c.name == name) return c.values;
    }
    throw ConfigError("no column " + name);
  }
  double mean(const std::string& name) const {
    const auto& v = values(name);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  Rng& rng() { return rng_; }
  std::vector<Column> take() { return std::move(cols_); }
  std::size_t n() const { return n_; }

 private:
  Rng rng_;
  std::size_t n_;
  std::vector<Column> cols_;
};

double sample_variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0;
}

}  // namespace

void ScenarioSpec::validate() const {
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  if (n < 10) throw ConfigError("scenario size must be >= 10");
  if (noise_scale && !(*noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");
}

double ScenarioSpec::resolved_noise_scale() const { return noise_scale.value_or(0.01); }

double Factor::eval(const Dataset& ds, std::size_t j, std::size_t row) const {
  const Column& col = ds.column(j);
  const double v = col.values[row];
  if (col.kind.is_categorical()) {
    const std::string& level = col.kind.levels[static_cast<std::size_t>(v)];
    switch (type) {
      case Type::kEqual:
      case Type::kInSet:
        return std::find(levels.begin(), levels.end(), level) != levels.end() ? 1.0 : 0.0;
      default:
        throw ConfigError("factor " + str() + " needs a numeric feature");
    }
  }
  switch (type) {
    case Type::kLinear:
      return v;
    case Type::kSquare:
      return v * v;
    case Type::kXLogAbs:
      return v == 0.0 ? 0.0 : v * std::log(std::abs(v));
    case Type::kEqual:
      return v == value ? 1.0 : 0.0;
    case Type::kLessEq:
      return v <= value ? 1.0 : 0.0;
    case Type::kGreater:
      return v > value ? 1.0 : 0.0;
    case Type::kInSet:
      throw ConfigError("factor " + str() + " needs a categorical feature");
  }
  return 0.0;
}

std::string Factor::str() const {
  auto rhs = [&]() { return levels.empty() ? fmt(value) : levels.front(); };
  switch (type) {
    case Type::kLinear:
      return feature;
    case Type::kSquare:
      return feature + "^2";
    case Type::kXLogAbs:
      return "xlogx(" + feature + ")";
    case Type::kEqual:
      return "I(" + feature + "==" + rhs() + ")";
    case Type::kLessEq:
      return "I(" + feature + "<=" + fmt(value) + ")";
    case Type::kGreater:
      return "I(" + feature + ">" + fmt(value) + ")";
    case Type::kInSet: {
      std::string s = "I(" + feature + " in ";
      for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? "|" : "") + levels[i];
      return s + ")";
    }
  }
  return "?";
}

std::string FormulaTerm::str() const {
  std::string s;
  for (std::size_t i = 0; i < factors.size(); ++i) s += (i ? ":" : "") + factors[i].str();
  return s;
}

std::string Formula::str() const {
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? " + " : "") + terms[i].str();
  return s;
}

Formula Formula::parse(const std::string& text) {
  Formula f;
  for (const std::string& t : split(text, '+')) {
    if (t.empty()) throw ConfigError("empty term in formula '" + text + "'");
    FormulaTerm term;
    for (const std::string& fac : split(t, ':')) term.factors.push_back(parse_factor(fac));
    f.terms.push_back(std::move(term));
  }
  return f;
}

Eigen::MatrixXd Formula::design(const Dataset& ds) const {
  const std::size_t n = ds.n_rows();
  std::vector<Eigen::VectorXd> cols;
  cols.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  for (const auto& term : terms) {
    // A lone categorical main effect expands to reference-coded dummies.
    if (term.factors.size() == 1 && term.factors[0].type == Factor::Type::kLinear) {
      const std::size_t j = ds.index_of(term.factors[0].feature);
      const Column& col = ds.column(j);
      if (col.kind.is_categorical()) {
        for (std::size_t l = 1; l < col.kind.levels.size(); ++l) {
          Eigen::VectorXd c(static_cast<Eigen::Index>(n));
          for (std::size_t i = 0; i < n; ++i) {
            c(static_cast<Eigen::Index>(i)) = col.values[i] == static_cast<double>(l) ? 1.0 : 0.0;
          }
          cols.push_back(std::move(c));
        }
        continue;
      }
    }
    Eigen::VectorXd c = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    for (const auto& fac : term.factors) {
      const std::size_t j = ds.index_of(fac.feature);
      for (std::size_t i = 0; i < n; ++i) c(static_cast<Eigen::Index>(i)) *= fac.eval(ds, j, i);
    }
    cols.push_back(std::move(c));
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = cols[k];
  return X;
}

ScenarioData gen_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const std::string& s = spec.name;
  Builder b(spec.seed, spec.n);
  std::vector<FormulaTerm> extra;
  auto term = [](std::vector<Factor> f) { return FormulaTerm{std::move(f)}; };

  if (s == "linear_smooth" || s == "linear_smooth_noise") {
    const int p = s == "linear_smooth" ? 3 : 10;
    for (int j = 1; j <= p; ++j) b.uniform("x" + std::to_string(j), -1.0, 1.0);
    extra = {term({lin("x2"), lin("x3")})};
  } else if (s == "linear_categorical") {
    b.uniform("x1", -1.0, 1.0);
    b.uniform("x2", -1.0, 1.0);
    b.bernoulli("x3");
    // Breakpoint at the population mean of x1, so the signal is the same
    // function in every run.
    extra = {term({lin("x2"), eq("x3", 0.0)}), term({lin("x2"), gt("x1", 0.0)})};
  } else if (s == "linear_mixed") {
    b.uniform("x1", -1.0, 1.0);
    b.uniform("x2", -1.0, 1.0);
    b.bernoulli("x3");
    b.bernoulli("x4");
    extra = {term({lin("x1"), lin("x2")}), term({lin("x2"), eq("x3", 0.0)}),
             term({lin("x1"), lin("x2"), eq("x4", 1.0)})};
  } else if (s == "independence_numeric") {
    b.uniform("x1", 0.0, 1.0);
    b.uniform("x2", 0.0, 1.0);
    b.grid("x3", 10);
    b.grid("x4", 100);
  } else if (s == "independence_mixed") {
    b.uniform("x1", 0.0, 1.0);
    b.uniform("x2", 0.0, 1.0);
    b.grid("x3", 10);
    b.bernoulli("x4");
    b.categorical("x5", 5);
    b.categorical("x6", 8);
  } else if (s == "guide_replication") {
    b.uniform("x1", 0.0, 1.0);
    b.uniform("x2", 0.0, 1.0);
    b.grid("x3", 10);
    b.categorical("x4", 4);
    b.categorical("x5", 10);
  } else if (s.rfind("interaction_", 0) == 0) {
    const std::string kind = s.substr(12);
    if (kind == "bc") {
      b.bernoulli("x1");
    } else {
      b.uniform("x1", 0.0, 1.0);
    }
    b.uniform("x2", 0.0, 1.0);
    if (kind == "nn") {
      b.grid("x3", 10);
    } else if (kind == "nb") {
      b.bernoulli("x3");
    } else {
      b.categorical("x3", 6);
    }
    b.uniform("x4", 0.0, 1.0);
    const Factor g1 = kind == "bc" ? eq("x1", 0.0) : le("x1", b.mean("x1"));
    const Factor g3 = kind == "nn"   ? le("x3", b.mean("x3"))
                      : kind == "nb" ? eq("x3", 0.0)
                                     : in_set("x3", {"a", "b", "c"});
    extra = {term({g1, lin("x2")}), term({g3, lin("x4")})};
  } else if (s == "nonlinear") {
    for (int j = 1; j <= 5; ++j) b.uniform("x" + std::to_string(j), -1.0, 1.0);
    b.bernoulli("x6");
    extra = {term({{Factor::Type::kSquare, "x2", 0.0, {}}}),
             term({{Factor::Type::kXLogAbs, "x3", 0.0, {}}}), term({lin("x4"), lin("x5")}),
             term({lin("x1"), lin("x4"), eq("x6", 0.0)})};
  }

  std::vector<Column> cols = b.take();
  Dataset features(cols);
  ScenarioData out;
  for (const auto& c : cols) out.formula.terms.push_back(term({lin(c.name)}));
  for (auto& t : extra) out.formula.terms.push_back(t);

  // Signal coefficients, in the order of `extra` after the main effects.
  out.f.assign(spec.n, 0.0);
  auto add = [&](double coef, const FormulaTerm& t) {
    for (std::size_t i = 0; i < spec.n; ++i) {
      double v = coef;
      for (const auto& fac : t.factors) v *= fac.eval(features, features.index_of(fac.feature), i);
      out.f[i] += v;
    }
  };
  auto main = [&](const std::string& x, double coef) { add(coef, term({lin(x)})); };
  if (s == "linear_smooth" || s == "linear_smooth_noise") {
    main("x1", 1.0);
    main("x2", 4.0);
    add(3.0, extra[0]);
  } else if (s == "linear_categorical") {
    main("x1", 1.0);
    main("x2", -8.0);
    add(16.0, extra[0]);
    add(8.0, extra[1]);
  } else if (s == "linear_mixed") {
    main("x2", 4.0);
    main("x4", 2.0);
    add(4.0, extra[0]);
    add(8.0, extra[1]);
    add(8.0, extra[2]);
  } else if (s.rfind("interaction_", 0) == 0) {
    add(1.0, extra[0]);
    add(1.0, extra[1]);
  } else if (s == "nonlinear") {
    main("x1", 1.0);
    add(2.0, extra[0]);
    add(1.0, extra[1]);
    add(1.0, extra[2]);
    add(1.0, extra[3]);
  }

  std::vector<double> y(spec.n);
  if (is_independence(s)) {
    for (auto& v : y) v = b.rng().normal();
  } else {
    const double sd = std::sqrt(spec.resolved_noise_scale() * sample_variance(out.f));
    for (std::size_t i = 0; i < spec.n; ++i) y[i] = out.f[i] + (sd > 0.0 ? b.rng().normal(0.0, sd) : 0.0);
  }
  out.data = Dataset(std::move(cols), std::move(y));
  return out;
}

std::string SurrogateSource::name() const {
  switch (type) {
    case Type::kOracle:
      return "oracle";
    case Type::kFittedLM:
      return formula ? "lm:" + formula->str() : "lm";
    case Type::kExternal:
      return "external:" + column;
  }
  return "?";
}

SurrogateSource parse_source(const std::string& text) {
  if (text == "oracle") return SurrogateSource::oracle();
  if (text == "lm") return SurrogateSource::fitted_lm();
  if (text.rfind("lm:", 0) == 0) return SurrogateSource::fitted_lm(Formula::parse(text.substr(3)));
  if (text.rfind("external:", 0) == 0) return SurrogateSource::external(text.substr(9));
  throw ConfigError("unknown surrogate source '" + text + "'");
}

Surrogate::Surrogate(SurrogateSource source, const Dataset& train, const Formula& default_formula)
    : source_(std::move(source)) {
  if (source_.type != SurrogateSource::Type::kFittedLM) return;
  formula_ = source_.formula ? *source_.formula : default_formula;
  if (!train.has_target()) throw DataError("surrogate fit needs a target");
  const Eigen::MatrixXd X = formula_.design(train);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      train.target().data(), static_cast<Eigen::Index>(train.n_rows()));
  const FittedLeafModel m = fit_linear(X, y);
  if (m.n_active() < static_cast<std::size_t>(X.cols())) {
    throw NumericalError("surrogate formula is rank-deficient: " + formula_.str());
  }
  coef_ = m.coefficients;
}

std::vector<double> Surrogate::predict(const Dataset& ds, const std::vector<double>* oracle) const {
  switch (source_.type) {
    case SurrogateSource::Type::kOracle:
      if (!oracle || oracle->size() != ds.n_rows()) {
        throw ConfigError("oracle source needs the noiseless signal");
      }
      return *oracle;
    case SurrogateSource::Type::kExternal: {
      auto j = ds.find(source_.column);
      if (!j) throw SchemaError("missing column " + source_.column);
      return ds.column(*j).values;
    }
    case SurrogateSource::Type::kFittedLM: {
      const Eigen::VectorXd p = formula_.design(ds) * coef_;
      return std::vector<double>(p.data(), p.data() + p.size());
    }
  }
  return {};
}

std::vector<double> surrogate_targets(const Dataset& ds, const SurrogateSource& source,
                                      const std::vector<double>* oracle,
                                      const Formula* default_formula) {
  Formula main;
  if (!default_formula) {
    for (const auto& c : ds.columns()) main.terms.push_back({{lin(c.name)}});
    default_formula = &main;
  }
  return Surrogate(source, ds, *default_formula).predict(ds, oracle);
}

}  // namespace mbt
