#include "mbt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "mbt/errors.hpp"

namespace mbt {

FidelityReport fidelity(std::span<const double> y_ref, std::span<const double> y_sur) {
  if (y_ref.size() != y_sur.size()) throw ConfigError("fidelity inputs differ in length");
  if (y_ref.size() < 2) throw ConfigError("fidelity needs at least 2 observations");
  FidelityReport rep;
  rep.n = y_ref.size();
  double mean = 0.0;
  for (double v : y_ref) mean += v;
  mean /= static_cast<double>(rep.n);
  double rss = 0.0;
  double tss = 0.0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < rep.n; ++i) {
    const double e = y_ref[i] - y_sur[i];
    rss += e * e;
    abs_sum += std::abs(e);
    rep.max_ae = std::max(rep.max_ae, std::abs(e));
    tss += (y_ref[i] - mean) * (y_ref[i] - mean);
  }
  rep.mse = rss / static_cast<double>(rep.n);
  rep.mae = abs_sum / static_cast<double>(rep.n);
  if (tss > 0.0) rep.r2 = 1.0 - rss / tss;
  return rep;
}

namespace {

std::uint64_t pairs(std::uint64_t m) { return m * (m - 1) / 2; }

template <class K>
std::uint64_t same_pairs(const std::map<K, std::uint64_t>& counts) {
  std::uint64_t s = 0;
  for (const auto& [k, c] : counts) s += pairs(c);
  return s;
}

}  // namespace

RandIndexReport rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ConfigError("labelings differ in length");
  if (a.size() < 2) throw ConfigError("Rand index needs at least 2 observations");
  std::map<int, std::uint64_t> ca;
  std::map<int, std::uint64_t> cb;
  std::map<std::pair<int, int>, std::uint64_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  RandIndexReport rep;
  rep.n_pairs = pairs(a.size());
  const std::uint64_t same_a = same_pairs(ca);
  const std::uint64_t same_b = same_pairs(cb);
  rep.n11 = same_pairs(joint);
  rep.n00 = rep.n_pairs - same_a - same_b + rep.n11;
  rep.ri = static_cast<double>(rep.n11 + rep.n00) / static_cast<double>(rep.n_pairs);
  return rep;
}

}  // namespace mbt
