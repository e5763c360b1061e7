#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mbt {

enum class Kind { kNumeric, kBinary, kCategorical };

const char* kind_name(Kind kind);
Kind parse_kind(const std::string& name);

// Measurement scale of a column. Categorical values are stored as level codes
// (0-based index into `levels`), numeric and binary values verbatim.
struct ColumnKind {
  Kind kind = Kind::kNumeric;
  std::vector<std::string> levels;

  static ColumnKind numeric() { return {Kind::kNumeric, {}}; }
  static ColumnKind binary() { return {Kind::kBinary, {}}; }
  static ColumnKind categorical(std::vector<std::string> levels);

  bool is_categorical() const { return kind == Kind::kCategorical; }
  // Returns the code of `level`, or -1 when it is not declared.
  int level_code(const std::string& level) const;

  bool operator==(const ColumnKind&) const = default;
};

struct Column {
  std::string name;
  ColumnKind kind;
  std::vector<double> values;

  bool operator==(const Column&) const = default;
};

// Per-feature usage flags. A feature flagged for neither role is invalid.
struct FeatureRole {
  bool regression = true;
  bool splitting = true;
  bool operator==(const FeatureRole&) const = default;
};

class FeatureRoles {
 public:
  FeatureRoles() = default;
  explicit FeatureRoles(std::vector<FeatureRole> roles);
  static FeatureRoles all(std::size_t n_features);

  std::size_t size() const { return roles_.size(); }
  const FeatureRole& operator[](std::size_t j) const { return roles_.at(j); }
  FeatureRole& operator[](std::size_t j) { return roles_.at(j); }
  const std::vector<FeatureRole>& roles() const { return roles_; }

  bool operator==(const FeatureRoles&) const = default;

 private:
  std::vector<FeatureRole> roles_;
};

// Immutable column-major table of typed features plus an optional target.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Column> columns,
          std::optional<std::vector<double>> target = std::nullopt);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_features() const { return columns_.size(); }

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t j) const { return columns_.at(j); }
  const Column& column(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  bool has_target() const { return target_.has_value(); }
  const std::vector<double>& target() const;

  Dataset with_target(std::vector<double> target) const;
  Dataset without_target() const;
  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset select_columns(const std::vector<std::string>& names) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::vector<Column> columns_;
  std::optional<std::vector<double>> target_;
};

using Schema = std::vector<std::pair<std::string, ColumnKind>>;

struct CsvOptions {
  // Categorical columns accept levels outside the schema and append them to
  // the level list instead of raising a domain error.
  bool extend_levels = false;
};

// Reads a header-first CSV. Only the schema columns and `target_column`
// (when non-empty) are kept; other columns are ignored.
Dataset load_csv(const std::string& path, const Schema& schema,
                 const std::string& target_column,
                 const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const Schema& schema,
                  const std::string& target_column,
                  const CsvOptions& options = {});

// Builds a schema from the header and cells: columns holding only 0/1 are
// binary, parseable ones numeric, everything else categorical with levels in
// sorted order.
Schema infer_schema(const std::string& text,
                    const std::vector<std::string>& exclude);

std::string to_csv(const Dataset& ds, const std::string& target_name = "y");
void write_csv(const Dataset& ds, const std::string& path,
               const std::string& target_name = "y");

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double train_fraction,
                                             std::uint64_t seed);

// Row index sets for the split, in increasing order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n_rows, double train_fraction, std::uint64_t seed);

}  // namespace mbt
