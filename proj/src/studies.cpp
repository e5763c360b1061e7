#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mbt/errors.hpp"
#include "mbt/rng.hpp"
#include "mbt/sim.hpp"

namespace mbt {

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&]() {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

double StudySetting::stop_value() const {
  return config.algorithm == Algorithm::kSlim || config.algorithm == Algorithm::kGuide
             ? config.gamma
             : config.alpha;
}

double BiasCounts::frequency(const std::string& feature) const {
  auto it = counts.find(feature);
  return runs > 0 && it != counts.end() ? static_cast<double>(it->second) / runs : 0.0;
}

MbtConfig forced_first_split(MbtConfig config) {
  config.max_depth = 2;
  config.gamma = 0.0;
  config.alpha = 1.0;
  return config;
}

namespace {

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kTreeStream = 2;
constexpr std::uint64_t kEvalStream = 0xe7a1;

std::vector<double> pick(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

double mean_effective_df(const MbtTree& tree) {
  double s = 0.0;
  const auto leaves = tree.leaves();
  for (int id : leaves) s += tree.node(id).model.effective_df;
  return leaves.empty() ? 0.0 : s / static_cast<double>(leaves.size());
}

double r2_or_nan(const std::vector<double>& ref, const Eigen::VectorXd& pred) {
  return fidelity(ref, std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())))
      .r2.value_or(std::numeric_limits<double>::quiet_NaN());
}

void check_settings(const std::vector<StudySetting>& settings) {
  if (settings.empty()) throw ConfigError("study needs at least one setting");
  for (const auto& s : settings) s.config.validate();
}

struct TrainData {
  Dataset train;  // features with surrogate targets
  Dataset test;
  std::vector<double> sur_test;
  double surrogate_r2 = std::numeric_limits<double>::quiet_NaN();
};

TrainData prepare(const ScenarioSpec& scenario, const SurrogateSource& source, double fraction,
                  std::uint64_t run_seed) {
  ScenarioSpec sp = scenario;
  sp.seed = derive_seed(run_seed, kDataStream);
  ScenarioData sd = gen_scenario(sp);
  const auto [tr, te] = split_indices(sd.data.n_rows(), fraction, derive_seed(run_seed, kSplitStream));
  const Dataset train = sd.data.subset(tr);
  const Dataset test = sd.data.subset(te);
  const std::vector<double> f_tr = pick(sd.f, tr);
  const std::vector<double> f_te = pick(sd.f, te);
  const Surrogate sur(source, train, sd.formula);
  std::vector<double> y_tr = sur.predict(train, &f_tr);
  TrainData out;
  out.sur_test = te.empty() ? std::vector<double>{} : sur.predict(test, &f_te);
  const auto rep = fidelity(f_tr, y_tr);
  if (rep.r2) out.surrogate_r2 = *rep.r2;
  out.train = train.with_target(std::move(y_tr));
  out.test = test.without_target();
  return out;
}

}  // namespace

FidelityStudy run_fidelity_study(const FidelityStudyConfig& config) {
  config.scenario.validate();
  check_settings(config.settings);
  if (config.runs < 1) throw ConfigError("runs must be >= 1");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  const std::size_t k = config.settings.size();
  std::vector<std::vector<RunResult>> per_run(static_cast<std::size_t>(config.runs));
  std::vector<double> sur_r2(static_cast<std::size_t>(config.runs),
                             std::numeric_limits<double>::quiet_NaN());

  parallel_for(config.runs, config.jobs, [&](int r) {
    const std::uint64_t rs = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    auto& out = per_run[static_cast<std::size_t>(r)];
    out.resize(k);
    for (std::size_t s = 0; s < k; ++s) {
      out[s].run = r;
      out[s].setting = config.settings[s].label;
      out[s].algorithm = config.settings[s].config.algorithm;
      out[s].stop_value = config.settings[s].stop_value();
    }
    TrainData td;
    try {
      td = prepare(config.scenario, config.source, config.train_fraction, rs);
    } catch (const std::exception& e) {
      for (auto& row : out) row.error = e.what();
      return;
    }
    sur_r2[static_cast<std::size_t>(r)] = td.surrogate_r2;
    for (std::size_t s = 0; s < k; ++s) {
      RunResult& row = out[s];
      try {
        MbtConfig cfg = config.settings[s].config;
        cfg.seed = derive_seed(rs, kTreeStream + s);
        const MbtTree tree = grow(td.train, cfg);
        row.leaves = tree.leaf_count();
        row.depth = tree.depth();
        row.r2_train = r2_or_nan(td.train.target(), predict_tree(tree, td.train));
        row.r2_test = td.sur_test.size() >= 2 ? r2_or_nan(td.sur_test, predict_tree(tree, td.test))
                                              : std::numeric_limits<double>::quiet_NaN();
        row.mean_effective_df = mean_effective_df(tree);
        const Node& root = tree.node(tree.root());
        if (root.rule) row.first_split = root.rule->feature;
        row.shares = split_share(tree);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  });

  FidelityStudy study;
  for (auto& rows : per_run) {
    for (auto& row : rows) study.rows.push_back(std::move(row));
  }
  int n_sur = 0;
  for (double v : sur_r2) {
    if (std::isfinite(v)) {
      study.surrogate_r2_train_mean += v;
      ++n_sur;
    }
  }
  study.surrogate_r2_train_mean =
      n_sur ? study.surrogate_r2_train_mean / n_sur : std::numeric_limits<double>::quiet_NaN();

  for (std::size_t s = 0; s < k; ++s) {
    SettingSummary sum;
    sum.setting = config.settings[s].label;
    sum.algorithm = config.settings[s].config.algorithm;
    sum.stop_value = config.settings[s].stop_value();
    std::vector<double> r2tr;
    std::vector<double> r2te;
    std::vector<double> leaves;
    for (const auto& row : study.rows) {
      if (row.setting != sum.setting) continue;
      if (!row.error.empty()) {
        ++sum.runs_failed;
        continue;
      }
      ++sum.runs_ok;
      leaves.push_back(static_cast<double>(row.leaves));
      if (sum.runs_ok == 1 || row.leaves < sum.leaves_min) sum.leaves_min = row.leaves;
      sum.leaves_max = std::max(sum.leaves_max, row.leaves);
      if (std::isfinite(row.r2_train)) r2tr.push_back(row.r2_train);
      if (std::isfinite(row.r2_test)) r2te.push_back(row.r2_test);
      sum.effective_df_mean += row.mean_effective_df;
      for (const auto& [f, sh] : row.shares) {
        sum.share_count[f] += sh.count;
        sum.share_weighted[f] += sh.weighted;
      }
      if (!row.first_split.empty()) ++sum.first_split[row.first_split];
    }
    auto mean_sd = [](const std::vector<double>& v, double& m, double& sd) {
      if (v.empty()) {
        m = sd = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    };
    double unused = 0.0;
    mean_sd(leaves, sum.leaves_mean, unused);
    mean_sd(r2tr, sum.r2_train_mean, sum.r2_train_sd);
    mean_sd(r2te, sum.r2_test_mean, sum.r2_test_sd);
    if (sum.runs_ok > 0) {
      sum.effective_df_mean /= sum.runs_ok;
      for (auto& [f, v] : sum.share_count) v /= sum.runs_ok;
      for (auto& [f, v] : sum.share_weighted) v /= sum.runs_ok;
    }
    study.summary.push_back(std::move(sum));
  }
  return study;
}

BiasReport run_bias_study(const BiasStudyConfig& config) {
  config.scenario.validate();
  check_settings(config.settings);
  if (config.runs < 1) throw ConfigError("runs must be >= 1");
  const std::size_t k = config.settings.size();
  BiasReport rep;
  rep.first_splits.assign(static_cast<std::size_t>(config.runs), std::vector<std::string>(k));

  parallel_for(config.runs, config.jobs, [&](int r) {
    const std::uint64_t rs = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    ScenarioSpec sp = config.scenario;
    sp.seed = derive_seed(rs, kDataStream);
    const ScenarioData sd = gen_scenario(sp);
    for (std::size_t s = 0; s < k; ++s) {
      MbtConfig cfg = forced_first_split(config.settings[s].config);
      cfg.seed = derive_seed(rs, kTreeStream + s);
      const MbtTree tree = grow(sd.data, cfg);
      const Node& root = tree.node(tree.root());
      if (root.rule) rep.first_splits[static_cast<std::size_t>(r)][s] = root.rule->feature;
    }
  });

  const ScenarioData probe = gen_scenario(config.scenario);
  for (const auto& c : probe.data.columns()) rep.features.push_back(c.name);
  for (std::size_t s = 0; s < k; ++s) {
    BiasCounts bc;
    bc.setting = config.settings[s].label;
    bc.runs = config.runs;
    for (const auto& f : rep.features) bc.counts[f] = 0;
    for (const auto& run : rep.first_splits) {
      if (run[s].empty()) {
        ++bc.none;
      } else {
        ++bc.counts[run[s]];
      }
    }
    rep.settings.push_back(std::move(bc));
  }
  return rep;
}

StabilityReport run_stability_study(const StabilityConfig& config) {
  config.scenario.validate();
  config.setting.config.validate();
  if (config.runs < 2) throw ConfigError("stability needs at least 2 runs");
  if (config.subsample < 2 || config.subsample > config.eval_n) {
    throw ConfigError("subsample must lie in [2, eval_n]");
  }
  ScenarioSpec ev = config.scenario;
  ev.n = config.eval_n;
  ev.seed = derive_seed(config.seed, kEvalStream);
  const Dataset eval = gen_scenario(ev).data.without_target();

  const auto runs = static_cast<std::size_t>(config.runs);
  StabilityReport rep;
  rep.leaves.assign(runs, 0);
  std::vector<std::vector<int>> parts(runs);
  std::vector<std::string> errors(runs);
  parallel_for(config.runs, config.jobs, [&](int r) {
    const std::uint64_t rs = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    try {
      const TrainData td = prepare(config.scenario, config.source, config.train_fraction, rs);
      MbtConfig cfg = config.setting.config;
      cfg.seed = derive_seed(rs, kTreeStream);
      const MbtTree tree = grow(td.train, cfg);
      rep.leaves[static_cast<std::size_t>(r)] = tree.leaf_count();
      parts[static_cast<std::size_t>(r)] = assign_partition(tree, eval);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  });

  std::ostringstream diag;
  for (std::size_t r = 0; r < runs; ++r) {
    if (!errors[r].empty()) diag << "run " << r << ": " << errors[r] << "\n";
  }

  std::map<std::size_t, StabilityBucket> buckets;
  std::size_t pair_index = 0;
  std::vector<int> a(config.subsample);
  std::vector<int> b(config.subsample);
  for (std::size_t i = 0; i < runs; ++i) {
    for (std::size_t j = i + 1; j < runs; ++j, ++pair_index) {
      ++rep.total_pairs;
      if (!errors[i].empty() || !errors[j].empty() || rep.leaves[i] != rep.leaves[j]) continue;
      Rng rng(derive_seed(derive_seed(config.seed, kEvalStream + 1), pair_index));
      std::vector<std::size_t> perm = rng.permutation(config.eval_n);
      for (std::size_t t = 0; t < config.subsample; ++t) {
        a[t] = parts[i][perm[t]];
        b[t] = parts[j][perm[t]];
      }
      auto& bucket = buckets[rep.leaves[i]];
      bucket.leaves = rep.leaves[i];
      ++bucket.pairs;
      bucket.ri.push_back(rand_index(a, b).ri);
      ++rep.compared_pairs;
    }
  }
  for (auto& [l, bucket] : buckets) {
    bucket.mean = std::accumulate(bucket.ri.begin(), bucket.ri.end(), 0.0) /
                  static_cast<double>(bucket.ri.size());
    bucket.min = *std::min_element(bucket.ri.begin(), bucket.ri.end());
    bucket.max = *std::max_element(bucket.ri.begin(), bucket.ri.end());
    rep.buckets.push_back(std::move(bucket));
  }
  if (rep.compared_pairs == 0) diag << "no pair of runs has equal leaf counts\n";
  rep.diagnostics = diag.str();
  return rep;
}

}  // namespace mbt
