#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace causalsoil {

enum class ColumnKind { kContinuous, kOneHot, kEventCount, kCategorical };
enum class Cadence { kDaily, kSubDaily, kSparseEvent };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(Cadence cadence);
ColumnKind parse_column_kind(std::string_view text);
Cadence parse_cadence(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  // For one-hot members: the categorical column they were expanded from.
  // For lag columns: the event column they count.
  std::string source_group;
  Cadence cadence = Cadence::kDaily;
  // Categorical columns store the index into this label list.
  std::vector<std::string> categories;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

// Calendar day, counted from 1970-01-01.
struct Date {
  int days = 0;
  friend auto operator<=>(const Date&, const Date&) = default;
};

Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date date);

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns, std::string target = {});

  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
  std::size_t size() const noexcept { return columns_.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws SchemaError naming `where` when the column is absent.
  std::size_t index_of(std::string_view name, std::string_view where = "schema") const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  const std::string& target() const noexcept { return target_; }
  void set_target(std::string name);
  std::optional<std::size_t> target_index() const;

  std::vector<std::string> names() const;
  void push_back(ColumnSpec spec);

  // Names unique, one-hot members carry a source group, target (if set) present.
  void validate() const;

  friend bool operator==(const Schema& a, const Schema& b) {
    return a.columns_ == b.columns_ && a.target_ == b.target_;
  }

 private:
  void reindex();

  std::vector<ColumnSpec> columns_;
  std::string target_;
  std::unordered_map<std::string, std::size_t> index_;
};

using RowMask = std::vector<bool>;

// Dense table with one row per (field, day). Values are column-major so that
// per-column transforms stay cache friendly.
struct Table {
  Schema schema;
  Eigen::MatrixXd values;
  std::vector<Date> dates;
  std::vector<std::string> field_ids;
  std::vector<std::string> treatments;
  // Per-row intervention targets (node names, sorted). Empty = observational.
  std::vector<std::vector<std::string>> interventions;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }

  Eigen::VectorXd column(std::string_view name) const;

  // Structural checks: metadata lengths, schema validity, strictly increasing
  // dates within each field and (when require_finite) no NaN/Inf values.
  void validate(bool require_finite = true) const;

  Table select_rows(const std::vector<std::size_t>& rows) const;
  Table select_rows(const RowMask& mask) const;
  Table select_columns(const std::vector<std::string>& names) const;

  // Sort rows by (field_id, date); stable for equal keys.
  Table sorted_by_field_and_date() const;

  bool has_interventions() const;
};

// Row-wise concatenation of tables that share an identical schema.
Table concat_rows(const std::vector<Table>& tables);

std::vector<std::size_t> mask_to_indices(const RowMask& mask);

}  // namespace causalsoil
