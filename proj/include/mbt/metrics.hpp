#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace mbt {

struct FidelityReport {
  std::optional<double> r2;  // unset when the reference is constant
  double mse = 0.0;
  double mae = 0.0;
  double max_ae = 0.0;
  std::size_t n = 0;
};

// Residual-based R^2 of surrogate predictions against reference predictions.
FidelityReport fidelity(std::span<const double> y_ref, std::span<const double> y_sur);

struct RandIndexReport {
  std::uint64_t n11 = 0;  // pairs together in both labelings
  std::uint64_t n00 = 0;  // pairs apart in both labelings
  std::uint64_t n_pairs = 0;
  double ri = 1.0;
};

// Pair counts from the joint contingency table, O(n log n).
RandIndexReport rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace mbt
