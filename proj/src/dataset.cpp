#include "mbt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "mbt/errors.hpp"
#include "mbt/rng.hpp"

namespace mbt {

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::kNumeric:
      return "numeric";
    case Kind::kBinary:
      return "binary";
    case Kind::kCategorical:
      return "categorical";
  }
  return "?";
}

Kind parse_kind(const std::string& name) {
  if (name == "numeric") return Kind::kNumeric;
  if (name == "binary") return Kind::kBinary;
  if (name == "categorical") return Kind::kCategorical;
  throw SchemaError("unknown column kind '" + name + "'");
}

ColumnKind ColumnKind::categorical(std::vector<std::string> levels) {
  if (levels.size() < 2) {
    throw SchemaError("categorical column needs at least 2 levels");
  }
  std::set<std::string> seen(levels.begin(), levels.end());
  if (seen.size() != levels.size()) {
    throw SchemaError("categorical levels must be unique");
  }
  return {Kind::kCategorical, std::move(levels)};
}

int ColumnKind::level_code(const std::string& level) const {
  auto it = std::find(levels.begin(), levels.end(), level);
  return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
}

FeatureRoles::FeatureRoles(std::vector<FeatureRole> roles)
    : roles_(std::move(roles)) {
  for (std::size_t j = 0; j < roles_.size(); ++j) {
    if (!roles_[j].regression && !roles_[j].splitting) {
      throw ConfigError("feature " + std::to_string(j) +
                        " is neither a regressor nor a split variable");
    }
  }
}

FeatureRoles FeatureRoles::all(std::size_t n_features) {
  return FeatureRoles(std::vector<FeatureRole>(n_features));
}

namespace {

void validate_column(const Column& c) {
  switch (c.kind.kind) {
    case Kind::kNumeric:
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        if (!std::isfinite(c.values[i])) {
          throw MissingValueError("numeric column " + c.name +
                                  " has a non-finite value at row " +
                                  std::to_string(i));
        }
      }
      break;
    case Kind::kBinary:
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        const double v = c.values[i];
        if (v != 0.0 && v != 1.0) {
          throw DomainError("binary column " + c.name + " has value " +
                            std::to_string(v) + " at row " + std::to_string(i));
        }
      }
      break;
    case Kind::kCategorical: {
      if (c.kind.levels.size() < 2) {
        throw SchemaError("categorical column " + c.name +
                          " needs at least 2 levels");
      }
      const double n_levels = static_cast<double>(c.kind.levels.size());
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        const double v = c.values[i];
        if (v < 0 || v >= n_levels || v != std::floor(v)) {
          throw DomainError("categorical column " + c.name +
                            " has an undeclared level code at row " +
                            std::to_string(i));
        }
      }
      break;
    }
  }
}

}  // namespace

Dataset::Dataset(std::vector<Column> columns,
                 std::optional<std::vector<double>> target)
    : columns_(std::move(columns)), target_(std::move(target)) {
  if (!columns_.empty()) {
    n_rows_ = columns_.front().values.size();
  } else if (target_) {
    n_rows_ = target_->size();
  }
  std::unordered_set<std::string> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name).second) {
      throw SchemaError("duplicate column name " + c.name);
    }
    if (c.values.size() != n_rows_) {
      throw SchemaError("column " + c.name + " has " +
                        std::to_string(c.values.size()) + " rows, expected " +
                        std::to_string(n_rows_));
    }
    validate_column(c);
  }
  if (target_) {
    if (target_->size() != n_rows_) {
      throw SchemaError("target length does not match the row count");
    }
    for (std::size_t i = 0; i < n_rows_; ++i) {
      if (!std::isfinite((*target_)[i])) {
        throw MissingValueError("target has a non-finite value at row " +
                                std::to_string(i));
      }
    }
  }
}

const Column& Dataset::column(const std::string& name) const {
  return columns_[index_of(name)];
}

std::optional<std::size_t> Dataset::find(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t Dataset::index_of(const std::string& name) const {
  auto j = find(name);
  if (!j) throw SchemaError("missing column " + name);
  return *j;
}

const std::vector<double>& Dataset::target() const {
  if (!target_) throw DataError("dataset has no target");
  return *target_;
}

Dataset Dataset::with_target(std::vector<double> target) const {
  return Dataset(columns_, std::move(target));
}

Dataset Dataset::without_target() const { return Dataset(columns_); }

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column out{c.name, c.kind, {}};
    out.values.reserve(rows.size());
    for (auto i : rows) out.values.push_back(c.values.at(i));
    cols.push_back(std::move(out));
  }
  std::optional<std::vector<double>> t;
  if (target_) {
    t.emplace();
    t->reserve(rows.size());
    for (auto i : rows) t->push_back(target_->at(i));
  }
  Dataset out(std::move(cols), std::move(t));
  out.n_rows_ = rows.size();
  return out;
}

Dataset Dataset::select_columns(const std::vector<std::string>& names) const {
  std::vector<Column> cols;
  for (const auto& n : names) cols.push_back(column(n));
  return Dataset(std::move(cols), target_);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n_rows, double train_fraction, std::uint64_t seed) {
  if (n_rows < 2) throw DataError("train/test split needs at least 2 rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n_rows)));
  if (n_train == 0 || n_train == n_rows) {
    throw ConfigError("train fraction leaves one side of the split empty");
  }
  Rng rng(seed);
  auto perm = rng.permutation(n_rows);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + n_train);
  std::vector<std::size_t> test(perm.begin() + n_train, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double train_fraction,
                                             std::uint64_t seed) {
  auto [train, test] = split_indices(ds.n_rows(), train_fraction, seed);
  return {ds.subset(train), ds.subset(test)};
}

}  // namespace mbt
