#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbt/dataset.hpp"
#include "mbt/metrics.hpp"
#include "mbt/tree.hpp"

namespace mbt {

// ---- scenarios -------------------------------------------------------------

const std::vector<std::string>& scenario_names();

struct ScenarioSpec {
  std::string name = "linear_smooth";
  std::size_t n = 1500;
  // Noise variance as a multiple of the sample variance of f. Unset uses the
  // scenario default (0.01). Independence scenarios always draw y ~ N(0, 1).
  std::optional<double> noise_scale;
  std::uint64_t seed = 0;

  void validate() const;
  double resolved_noise_scale() const;
};

// One factor of a formula term.
struct Factor {
  enum class Type { kLinear, kSquare, kXLogAbs, kEqual, kLessEq, kGreater, kInSet };
  Type type = Type::kLinear;
  std::string feature;
  double value = 0.0;               // kEqual / kLessEq / kGreater on numeric or binary
  std::vector<std::string> levels;  // kEqual / kInSet on categorical

  double eval(const Dataset& ds, std::size_t feature_index, std::size_t row) const;
  std::string str() const;
  bool operator==(const Factor&) const = default;
};

// Product of factors; the intercept is implicit in every formula.
struct FormulaTerm {
  std::vector<Factor> factors;
  std::string str() const;
  bool operator==(const FormulaTerm&) const = default;
};

struct Formula {
  std::vector<FormulaTerm> terms;

  std::string str() const;
  // Terms separated by '+', factors by ':'. Factor forms: x, x^2, xlogx(x),
  // I(x==v), I(x<=v), I(x>v), I(x in a|b|c).
  static Formula parse(const std::string& text);
  Eigen::MatrixXd design(const Dataset& ds) const;  // intercept first
  bool operator==(const Formula&) const = default;
};

struct ScenarioData {
  Dataset data;           // features with target y
  std::vector<double> f;  // noiseless signal
  Formula formula;        // correctly specified formula (main effects + DGP terms)
};

ScenarioData gen_scenario(const ScenarioSpec& spec);

// ---- surrogate sources ----------------------------------------------------

struct SurrogateSource {
  enum class Type { kOracle, kFittedLM, kExternal };
  Type type = Type::kFittedLM;
  std::optional<Formula> formula;  // FittedLM; unset uses the scenario formula
  std::string column;              // External

  static SurrogateSource oracle() { return {Type::kOracle, std::nullopt, {}}; }
  static SurrogateSource fitted_lm(std::optional<Formula> f = std::nullopt) {
    return {Type::kFittedLM, std::move(f), {}};
  }
  static SurrogateSource external(std::string column) {
    return {Type::kExternal, std::nullopt, std::move(column)};
  }
  std::string name() const;
};

SurrogateSource parse_source(const std::string& text);

// A source resolved against training data: FittedLM holds its fitted
// coefficients so that test rows can be predicted too.
class Surrogate {
 public:
  Surrogate(SurrogateSource source, const Dataset& train, const Formula& default_formula);
  std::vector<double> predict(const Dataset& ds, const std::vector<double>* oracle) const;

 private:
  SurrogateSource source_;
  Formula formula_;
  Eigen::VectorXd coef_;
};

// Targets on the same rows the source is resolved on.
std::vector<double> surrogate_targets(const Dataset& ds, const SurrogateSource& source,
                                      const std::vector<double>* oracle = nullptr,
                                      const Formula* default_formula = nullptr);

// ---- studies ----------------------------------------------------------------

struct StudySetting {
  std::string label;  // e.g. "slim", "guide_corrected"
  MbtConfig config;
  double stop_value() const;  // gamma for SLIM/GUIDE, alpha for MOB/CTree
};

struct FidelityStudyConfig {
  ScenarioSpec scenario;
  SurrogateSource source;
  std::vector<StudySetting> settings;
  int runs = 30;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct RunResult {
  int run = 0;
  std::string setting;
  Algorithm algorithm = Algorithm::kSlim;
  double stop_value = 0.0;
  std::size_t leaves = 0;
  int depth = 0;
  double r2_train = 0.0;
  double r2_test = 0.0;
  double mean_effective_df = 0.0;
  std::string first_split;  // empty for a stump
  std::map<std::string, SplitShare> shares;
  std::string error;  // non-empty when the run failed
};

struct SettingSummary {
  std::string setting;
  Algorithm algorithm = Algorithm::kSlim;
  double stop_value = 0.0;
  int runs_ok = 0;
  int runs_failed = 0;
  double leaves_mean = 0.0;
  std::size_t leaves_min = 0;
  std::size_t leaves_max = 0;
  double r2_train_mean = 0.0;
  double r2_train_sd = 0.0;
  double r2_test_mean = 0.0;
  double r2_test_sd = 0.0;
  double effective_df_mean = 0.0;
  std::map<std::string, double> share_count;     // mean split-count share per feature
  std::map<std::string, double> share_weighted;  // mean observation-weighted share
  std::map<std::string, int> first_split;        // first-split feature counts
};

struct FidelityStudy {
  std::vector<RunResult> rows;  // sorted by (run, setting order)
  std::vector<SettingSummary> summary;
  double surrogate_r2_train_mean = 0.0;  // surrogate vs f on train rows
};

FidelityStudy run_fidelity_study(const FidelityStudyConfig& config);

struct BiasStudyConfig {
  ScenarioSpec scenario;
  std::vector<StudySetting> settings;  // forced first split is applied on top
  int runs = 1000;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct BiasCounts {
  std::string setting;
  std::map<std::string, int> counts;  // feature -> first-split count
  int none = 0;                       // runs without a split
  int runs = 0;
  double frequency(const std::string& feature) const;
};

struct BiasReport {
  std::vector<std::string> features;
  std::vector<BiasCounts> settings;
  std::vector<std::vector<std::string>> first_splits;  // [run][setting]
};

// Forces a first split: depth 2, gamma 0, alpha 1.
MbtConfig forced_first_split(MbtConfig config);

BiasReport run_bias_study(const BiasStudyConfig& config);

struct StabilityConfig {
  ScenarioSpec scenario;
  SurrogateSource source;
  StudySetting setting;
  int runs = 20;
  std::size_t eval_n = 50000;
  std::size_t subsample = 1000;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct StabilityBucket {
  std::size_t leaves = 0;
  std::size_t pairs = 0;
  std::vector<double> ri;  // one per compared pair, pair order
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct StabilityReport {
  std::vector<std::size_t> leaves;  // per run
  std::vector<StabilityBucket> buckets;
  std::size_t total_pairs = 0;
  std::size_t compared_pairs = 0;
  std::string diagnostics;
};

StabilityReport run_stability_study(const StabilityConfig& config);

// Runs fn(i) for i in [0, n) on `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace mbt
