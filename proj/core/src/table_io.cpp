#include "causalsoil/table_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "causalsoil/error.hpp"
#include "causalsoil/kvconfig.hpp"

namespace causalsoil::io {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

void check_token(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\"") != std::string::npos) {
    throw SchemaError("csv", std::string(what) + " '" + s + "' contains a reserved character");
  }
}

constexpr const char* kMeta[] = {"date", "field_id", "treatment", "interventions"};

}  // namespace

std::string schema_to_text(const Schema& schema) {
  std::ostringstream os;
  os << "# causalsoil table schema\n";
  os << "target = " << schema.target() << "\n";
  os << "columns = " << schema.size() << "\n";
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& c = schema.column(i);
    const auto p = "column." + std::to_string(i) + ".";
    os << p << "name = " << c.name << "\n";
    os << p << "kind = " << to_string(c.kind) << "\n";
    os << p << "cadence = " << to_string(c.cadence) << "\n";
    os << p << "group = " << c.source_group << "\n";
    if (c.kind == ColumnKind::kCategorical) os << p << "categories = " << join(c.categories, '|') << "\n";
  }
  return os.str();
}

Schema schema_from_text(const std::string& text) {
  const auto kv = KeyValues::parse(text, "schema");
  const auto n = kv.get_int("columns", -1);
  if (n < 0) throw SchemaError("schema", "missing 'columns' count");
  std::vector<ColumnSpec> cols;
  for (long long i = 0; i < n; ++i) {
    const auto p = "column." + std::to_string(i) + ".";
    ColumnSpec c;
    auto name = kv.get(p + "name");
    if (!name || name->empty()) throw SchemaError("schema", "column " + std::to_string(i) + " has no name");
    c.name = *name;
    c.kind = parse_column_kind(kv.get_string(p + "kind", "continuous"));
    c.cadence = parse_cadence(kv.get_string(p + "cadence", "daily"));
    c.source_group = kv.get_string(p + "group", "");
    if (auto cats = kv.get(p + "categories"); cats && !cats->empty()) c.categories = split(*cats, '|');
    cols.push_back(std::move(c));
  }
  Schema schema(std::move(cols), kv.get_string("target", ""));
  schema.validate();
  return schema;
}

std::string table_to_csv(const Table& table) {
  std::string out;
  out += "date,field_id,treatment,interventions";
  for (const auto& c : table.schema.columns()) {
    check_token(c.name, "column name");
    out += "," + c.name;
  }
  out += "\n";
  char buf[64];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    check_token(table.field_ids[r], "field id");
    check_token(table.treatments[r], "treatment");
    out += format_iso_date(table.dates[r]);
    out += "," + table.field_ids[r] + "," + table.treatments[r] + ",";
    if (!table.interventions.empty()) out += join(table.interventions[r], ';');
    for (std::size_t j = 0; j < table.cols(); ++j) {
      const double v = table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
      out += ",";
      if (std::isnan(v)) continue;
      const auto& spec = table.schema.column(j);
      if (spec.kind == ColumnKind::kCategorical) {
        out += spec.categories.at(static_cast<std::size_t>(v));
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

Table table_from_csv(const std::string& csv, const Schema& schema) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("csv", "empty input");
  const auto header = split(line, ',');
  if (header.size() < 4) throw SchemaError("csv", "header lacks metadata columns");
  for (std::size_t k = 0; k < 4; ++k) {
    if (header[k] != kMeta[k]) throw SchemaError("csv", "expected header column '" + std::string(kMeta[k]) + "'");
  }
  std::vector<std::size_t> col_of;
  for (std::size_t k = 4; k < header.size(); ++k) col_of.push_back(schema.index_of(header[k], "csv"));
  if (col_of.size() != schema.size()) throw SchemaError("csv", "header does not cover every schema column");

  Table t;
  t.schema = schema;
  std::vector<std::vector<double>> rows;
  bool any_tags = false;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw SchemaError("csv", "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " cells");
    }
    t.dates.push_back(parse_iso_date(cells[0]));
    t.field_ids.push_back(cells[1]);
    t.treatments.push_back(cells[2]);
    std::vector<std::string> tags;
    if (!cells[3].empty()) tags = split(cells[3], ';');
    any_tags = any_tags || !tags.empty();
    t.interventions.push_back(std::move(tags));
    std::vector<double> row(schema.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 4; k < cells.size(); ++k) {
      const auto j = col_of[k - 4];
      const auto& cell = cells[k];
      if (cell.empty()) continue;
      const auto& spec = schema.column(j);
      if (spec.kind == ColumnKind::kCategorical) {
        auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (it == spec.categories.end()) {
          throw SchemaError("csv", "line " + std::to_string(line_no) + ": unknown category '" + cell +
                                       "' in column '" + spec.name + "'");
        }
        row[j] = static_cast<double>(it - spec.categories.begin());
      } else {
        try {
          std::size_t used = 0;
          row[j] = std::stod(cell, &used);
          if (used != cell.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw SchemaError("csv", "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
        }
      }
    }
    rows.push_back(std::move(row));
  }
  if (!any_tags) t.interventions.clear();
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
    }
  }
  return t;
}

void write_table(const std::string& csv_path, const Table& table) {
  write_file(csv_path, table_to_csv(table));
  write_file(csv_path + ".schema", schema_to_text(table.schema));
}

Table read_table(const std::string& csv_path, const std::string& schema_path) {
  const auto schema = schema_from_text(read_file(schema_path.empty() ? csv_path + ".schema" : schema_path));
  return table_from_csv(read_file(csv_path), schema);
}

}  // namespace causalsoil::io
