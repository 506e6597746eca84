#include "causalsoil/table.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "causalsoil/error.hpp"

namespace causalsoil {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kOneHot: return "one_hot";
    case ColumnKind::kEventCount: return "event_count";
    case ColumnKind::kCategorical: return "categorical";
  }
  return "continuous";
}

std::string_view to_string(Cadence cadence) {
  switch (cadence) {
    case Cadence::kDaily: return "daily";
    case Cadence::kSubDaily: return "sub_daily";
    case Cadence::kSparseEvent: return "sparse_event";
  }
  return "daily";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "continuous") return ColumnKind::kContinuous;
  if (text == "one_hot") return ColumnKind::kOneHot;
  if (text == "event_count") return ColumnKind::kEventCount;
  if (text == "categorical") return ColumnKind::kCategorical;
  throw SchemaError("schema", "unknown column kind '" + std::string(text) + "'");
}

Cadence parse_cadence(std::string_view text) {
  if (text == "daily") return Cadence::kDaily;
  if (text == "sub_daily") return Cadence::kSubDaily;
  if (text == "sparse_event") return Cadence::kSparseEvent;
  throw SchemaError("schema", "unknown cadence '" + std::string(text) + "'");
}

Date parse_iso_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string s(text);
  const bool shape = s.size() == 10 && s[4] == '-' && s[7] == '-' &&
                     std::all_of(s.begin(), s.end(), [](char c) { return c == '-' || (c >= '0' && c <= '9'); });
  if (!shape || std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw SchemaError("date", "expected YYYY-MM-DD, got '" + s + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw SchemaError("date", "invalid calendar date '" + s + "'");
  return Date{static_cast<int>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
}

std::string format_iso_date(Date date) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{date.days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Schema::Schema(std::vector<ColumnSpec> columns, std::string target)
    : columns_(std::move(columns)), target_(std::move(target)) {
  reindex();
}

void Schema::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < columns_.size(); ++i) index_.emplace(columns_[i].name, i);
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Schema::index_of(std::string_view name, std::string_view where) const {
  if (auto i = find(name)) return *i;
  throw SchemaError(std::string(where), "unknown column '" + std::string(name) + "'");
}

void Schema::set_target(std::string name) { target_ = std::move(name); }

std::optional<std::size_t> Schema::target_index() const {
  if (target_.empty()) return std::nullopt;
  return find(target_);
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

void Schema::push_back(ColumnSpec spec) {
  columns_.push_back(std::move(spec));
  index_.emplace(columns_.back().name, columns_.size() - 1);
}

void Schema::validate() const {
  if (index_.size() != columns_.size()) {
    throw SchemaError("schema", "column names are not unique");
  }
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("schema", "empty column name");
    if (c.kind == ColumnKind::kOneHot && c.source_group.empty()) {
      throw SchemaError("schema", "one-hot column '" + c.name + "' has no source group");
    }
  }
  if (!target_.empty() && !contains(target_)) {
    throw SchemaError("schema", "target column '" + target_ + "' not in schema");
  }
}

Eigen::VectorXd Table::column(std::string_view name) const {
  return values.col(static_cast<Eigen::Index>(schema.index_of(name, "table")));
}

void Table::validate(bool require_finite) const {
  schema.validate();
  const std::size_t n = rows();
  if (cols() != schema.size()) {
    throw SchemaError("table", "value matrix width does not match schema");
  }
  if (dates.size() != n || field_ids.size() != n || treatments.size() != n) {
    throw SchemaError("table", "row metadata length mismatch");
  }
  if (!interventions.empty() && interventions.size() != n) {
    throw SchemaError("table", "intervention tags length mismatch");
  }
  if (require_finite && !values.allFinite()) {
    throw SchemaError("table", "non-finite values present");
  }
  std::unordered_map<std::string, Date> last;
  for (std::size_t r = 0; r < n; ++r) {
    auto it = last.find(field_ids[r]);
    if (it != last.end() && !(it->second < dates[r])) {
      throw SchemaError("table", "dates not strictly increasing within field '" +
                                     field_ids[r] + "'");
    }
    last[field_ids[r]] = dates[r];
  }
}

Table Table::select_rows(const std::vector<std::size_t>& idx) const {
  Table out;
  out.schema = schema;
  out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.values.row(static_cast<Eigen::Index>(k)) = values.row(static_cast<Eigen::Index>(idx[k]));
    out.dates.push_back(dates[idx[k]]);
    out.field_ids.push_back(field_ids[idx[k]]);
    out.treatments.push_back(treatments[idx[k]]);
    if (!interventions.empty()) out.interventions.push_back(interventions[idx[k]]);
  }
  return out;
}

Table Table::select_rows(const RowMask& mask) const {
  if (mask.size() != rows()) throw SchemaError("table", "row mask length mismatch");
  return select_rows(mask_to_indices(mask));
}

Table Table::select_columns(const std::vector<std::string>& names) const {
  Table out;
  std::vector<ColumnSpec> specs;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto j = schema.index_of(names[k], "select_columns");
    specs.push_back(schema.column(j));
    out.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(j));
  }
  out.schema = Schema(std::move(specs));
  if (out.schema.contains(schema.target())) out.schema.set_target(schema.target());
  out.dates = dates;
  out.field_ids = field_ids;
  out.treatments = treatments;
  out.interventions = interventions;
  return out;
}

Table Table::sorted_by_field_and_date() const {
  std::vector<std::size_t> order(rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (field_ids[a] != field_ids[b]) return field_ids[a] < field_ids[b];
    return dates[a] < dates[b];
  });
  return select_rows(order);
}

bool Table::has_interventions() const {
  return std::any_of(interventions.begin(), interventions.end(),
                     [](const auto& t) { return !t.empty(); });
}

Table concat_rows(const std::vector<Table>& tables) {
  Table out;
  if (tables.empty()) return out;
  out.schema = tables.front().schema;
  Eigen::Index n = 0;
  bool any_tags = false;
  for (const auto& t : tables) {
    if (!(t.schema == out.schema)) throw SchemaError("concat_rows", "schemas differ");
    n += t.values.rows();
    any_tags = any_tags || !t.interventions.empty();
  }
  out.values.resize(n, static_cast<Eigen::Index>(out.schema.size()));
  Eigen::Index at = 0;
  for (const auto& t : tables) {
    out.values.middleRows(at, t.values.rows()) = t.values;
    at += t.values.rows();
    out.dates.insert(out.dates.end(), t.dates.begin(), t.dates.end());
    out.field_ids.insert(out.field_ids.end(), t.field_ids.begin(), t.field_ids.end());
    out.treatments.insert(out.treatments.end(), t.treatments.begin(), t.treatments.end());
    if (any_tags) {
      if (t.interventions.empty()) {
        out.interventions.resize(out.interventions.size() + t.rows());
      } else {
        out.interventions.insert(out.interventions.end(), t.interventions.begin(),
                                 t.interventions.end());
      }
    }
  }
  return out;
}

std::vector<std::size_t> mask_to_indices(const RowMask& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(i);
  }
  return idx;
}

}  // namespace causalsoil
