#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mbt/dataset.hpp"
#include "mbt/errors.hpp"

namespace mbt {
namespace {

using Record = std::vector<std::string>;

// RFC-4180 records: quoted fields may contain separators, doubled quotes and
// line breaks. A trailing CR before LF is dropped.
std::vector<Record> parse_records(const std::string& text) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    current.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(current.size() == 1 && current[0].empty())) {
      records.push_back(std::move(current));
    }
    current.clear();
  };
  while (i < text.size()) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw ParseError("unterminated quoted field", records.size());
  if (!field.empty() || !current.empty()) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    end_record();
  }
  return records;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset parse_csv(const std::string& text, const Schema& schema,
                  const std::string& target_column,
                  const CsvOptions& options) {
  auto records = parse_records(text);
  if (records.empty()) throw SchemaError("CSV has no header row");
  const Record& header = records.front();
  auto position = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> pos;
  for (const auto& [name, kind] : schema) pos.push_back(position(name));
  std::optional<std::size_t> target_pos;
  if (!target_column.empty()) target_pos = position(target_column);

  const std::size_t n = records.size() - 1;
  std::vector<Column> cols;
  for (const auto& [name, kind] : schema) {
    cols.push_back(Column{name, kind, std::vector<double>(n)});
  }
  std::optional<std::vector<double>> target;
  if (target_pos) target.emplace(n);

  for (std::size_t r = 0; r < n; ++r) {
    const Record& rec = records[r + 1];
    if (rec.size() != header.size()) {
      throw ParseError("row " + std::to_string(r) + " has " +
                           std::to_string(rec.size()) + " fields, header has " +
                           std::to_string(header.size()),
                       r);
    }
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string& cell = rec[pos[j]];
      Column& col = cols[j];
      if (cell.empty()) {
        throw MissingValueError("column " + col.name + " is empty at row " +
                                std::to_string(r));
      }
      switch (col.kind.kind) {
        case Kind::kNumeric: {
          double v;
          if (!parse_double(cell, v)) {
            throw ParseError("numeric column " + col.name + " has token '" +
                                 cell + "' at row " + std::to_string(r),
                             r);
          }
          col.values[r] = v;
          break;
        }
        case Kind::kBinary:
          if (cell == "0") {
            col.values[r] = 0.0;
          } else if (cell == "1") {
            col.values[r] = 1.0;
          } else {
            throw DomainError("binary column " + col.name + " has value " +
                              cell + " at row " + std::to_string(r));
          }
          break;
        case Kind::kCategorical: {
          int code = col.kind.level_code(cell);
          if (code < 0) {
            if (!options.extend_levels) {
              throw DomainError("categorical column " + col.name +
                                " has undeclared level '" + cell +
                                "' at row " + std::to_string(r));
            }
            col.kind.levels.push_back(cell);
            code = static_cast<int>(col.kind.levels.size()) - 1;
          }
          col.values[r] = code;
          break;
        }
      }
    }
    if (target_pos) {
      const std::string& cell = rec[*target_pos];
      if (cell.empty()) {
        throw MissingValueError("target " + target_column +
                                " is empty at row " + std::to_string(r));
      }
      double v;
      if (!parse_double(cell, v)) {
        throw ParseError("target " + target_column + " has token '" + cell +
                             "' at row " + std::to_string(r),
                         r);
      }
      (*target)[r] = v;
    }
  }
  return Dataset(std::move(cols), std::move(target));
}

Dataset load_csv(const std::string& path, const Schema& schema,
                 const std::string& target_column,
                 const CsvOptions& options) {
  return parse_csv(read_file(path), schema, target_column, options);
}

Schema infer_schema(const std::string& text,
                    const std::vector<std::string>& exclude) {
  auto records = parse_records(text);
  if (records.empty()) throw SchemaError("CSV has no header row");
  const Record& header = records.front();
  Schema schema;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (std::find(exclude.begin(), exclude.end(), header[j]) != exclude.end()) {
      continue;
    }
    bool numeric = true;
    bool binary = true;
    std::set<std::string> levels;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (j >= records[r].size()) continue;
      const std::string& cell = records[r][j];
      double v;
      if (!parse_double(cell, v)) numeric = false;
      if (cell != "0" && cell != "1") binary = false;
      levels.insert(cell);
    }
    if (binary) {
      schema.emplace_back(header[j], ColumnKind::binary());
    } else if (numeric) {
      schema.emplace_back(header[j], ColumnKind::numeric());
    } else {
      schema.emplace_back(
          header[j], ColumnKind::categorical({levels.begin(), levels.end()}));
    }
  }
  return schema;
}

std::string to_csv(const Dataset& ds, const std::string& target_name) {
  std::string out;
  bool first = true;
  for (const auto& c : ds.columns()) {
    if (!first) out += ',';
    out += quote_field(c.name);
    first = false;
  }
  if (ds.has_target()) {
    if (!first) out += ',';
    out += quote_field(target_name);
  }
  out += '\n';
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    first = true;
    for (const auto& c : ds.columns()) {
      if (!first) out += ',';
      first = false;
      const double v = c.values[i];
      if (c.kind.is_categorical()) {
        out += quote_field(c.kind.levels[static_cast<std::size_t>(v)]);
      } else if (c.kind.kind == Kind::kBinary) {
        out += v == 0.0 ? "0" : "1";
      } else {
        out += format_double(v);
      }
    }
    if (ds.has_target()) {
      if (!first) out += ',';
      out += format_double(ds.target()[i]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& target_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_csv(ds, target_name);
}

}  // namespace mbt
