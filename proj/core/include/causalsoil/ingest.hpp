#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "causalsoil/table.hpp"

namespace causalsoil::ingest {

// Windows (days) standing in for "1.5 months, 6 months, 1 year, 2 years".
inline const std::vector<int> kDefaultLagWindows{45, 182, 365, 730};

// Replaces each named column by one binary column per observed category,
// ordered lexicographically by label and named "<column>=<label>".
// Categorical columns use their label list; integer-coded numeric columns use
// the decimal value as label.
Table one_hot_encode(const Table& table, const std::vector<std::string>& columns);

struct ScalerParams {
  std::vector<std::string> columns;
  std::vector<double> min;
  std::vector<double> max;
  std::size_t fitted_on = 0;

  std::string to_text() const;
  static ScalerParams from_text(const std::string& text);
  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

ScalerParams min_max_fit(const Table& table, const std::vector<std::string>& columns,
                         const RowMask& train_mask);

// x -> (x - min) / (max - min); constant columns map to 0. Values outside the
// fitted range are not clipped.
Table min_max_apply(const Table& table, const ScalerParams& params);
Table min_max_inverse(const Table& table, const ScalerParams& params);

// Appends "<event>_lag<w>d" for every event_count column and window w, counting
// the event total over the half-open day range (t - w, t] within the field.
Table lag_counts(const Table& events, const std::vector<int>& windows = kDefaultLagWindows);

// Collapses inputs to one row per (field, day): continuous values averaged,
// event counts summed, one-hot indicators max-ed. Missing continuous values are
// forward-filled within field, then leading gaps back-filled.
Table daily_merge(const std::vector<Table>& tables);

}  // namespace causalsoil::ingest
