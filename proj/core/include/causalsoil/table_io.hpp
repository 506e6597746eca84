#pragma once

#include <string>

#include "causalsoil/table.hpp"

namespace causalsoil::io {

// Schema sidecar, plain "key = value" text:
//
//   target = total_C
//   columns = 2
//   column.0.name = pH
//   column.0.kind = continuous        (continuous | one_hot | event_count | categorical)
//   column.0.cadence = daily          (daily | sub_daily | sparse_event)
//   column.0.group =                  (source group; required for one_hot)
//   column.0.categories = a|b|c       (categorical only)
std::string schema_to_text(const Schema& schema);
Schema schema_from_text(const std::string& text);

// CSV layout: date,field_id,treatment,interventions,<schema columns...>
// Dates are ISO-8601, interventions are ';'-joined node names, categorical
// values are written as labels, empty cells read back as NaN.
std::string table_to_csv(const Table& table);
Table table_from_csv(const std::string& csv, const Schema& schema);

// Writes <path> and <path>.schema.
void write_table(const std::string& csv_path, const Table& table);
// Reads <path> with schema from `schema_path` (defaults to <path>.schema).
Table read_table(const std::string& csv_path, const std::string& schema_path = {});

}  // namespace causalsoil::io
