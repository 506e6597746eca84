#include "causalsoil/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "causalsoil/error.hpp"

namespace causalsoil::ingest {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string label_for(const ColumnSpec& spec, double v) {
  if (spec.kind == ColumnKind::kCategorical) {
    const auto k = static_cast<std::size_t>(v);
    if (v < 0 || static_cast<double>(k) != v || k >= spec.categories.size()) {
      throw SchemaError("one_hot_encode", "value out of category range in '" + spec.name + "'");
    }
    return spec.categories[k];
  }
  if (std::floor(v) != v || !std::isfinite(v)) {
    throw SchemaError("one_hot_encode", "column '" + spec.name + "' is not integer coded");
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
  return buf;
}

}  // namespace

Table one_hot_encode(const Table& table, const std::vector<std::string>& columns) {
  std::set<std::size_t> encode;
  for (const auto& name : columns) encode.insert(table.schema.index_of(name, "one_hot_encode"));

  std::vector<ColumnSpec> specs;
  std::vector<Eigen::VectorXd> data;
  const auto n = table.values.rows();
  for (std::size_t j = 0; j < table.cols(); ++j) {
    const auto& spec = table.schema.column(j);
    const auto col = table.values.col(static_cast<Eigen::Index>(j));
    if (!encode.count(j)) {
      specs.push_back(spec);
      data.emplace_back(col);
      continue;
    }
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    std::set<std::string> observed;
    for (Eigen::Index r = 0; r < n; ++r) {
      labels[static_cast<std::size_t>(r)] = label_for(spec, col(r));
      observed.insert(labels[static_cast<std::size_t>(r)]);
    }
    for (const auto& label : observed) {
      ColumnSpec out;
      out.name = spec.name + "=" + label;
      out.kind = ColumnKind::kOneHot;
      out.source_group = spec.name;
      out.cadence = spec.cadence;
      Eigen::VectorXd ind(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        ind(r) = labels[static_cast<std::size_t>(r)] == label ? 1.0 : 0.0;
      }
      specs.push_back(std::move(out));
      data.push_back(std::move(ind));
    }
  }

  Table out = table;
  out.values.resize(n, static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = data[j];
  const std::string target = table.schema.target();
  out.schema = Schema(std::move(specs));
  if (out.schema.contains(target)) out.schema.set_target(target);
  out.schema.validate();
  return out;
}

std::string ScalerParams::to_text() const {
  std::ostringstream os;
  os << "# min-max scaler: column<TAB>min<TAB>max\n";
  os << "fitted_on\t" << fitted_on << "\n";
  char buf[128];
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "\t%.17g\t%.17g\n", min[i], max[i]);
    os << columns[i] << buf;
  }
  return os.str();
}

ScalerParams ScalerParams::from_text(const std::string& text) {
  ScalerParams p;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name;
    std::getline(ls, name, '\t');
    if (name == "fitted_on") {
      ls >> p.fitted_on;
      continue;
    }
    double lo = 0;
    double hi = 0;
    if (!(ls >> lo >> hi)) throw SchemaError("scaler", "malformed line '" + line + "'");
    p.columns.push_back(name);
    p.min.push_back(lo);
    p.max.push_back(hi);
  }
  return p;
}

ScalerParams min_max_fit(const Table& table, const std::vector<std::string>& columns,
                         const RowMask& train_mask) {
  if (train_mask.size() != table.rows()) {
    throw SchemaError("min_max_fit", "train mask length does not match table");
  }
  const auto rows = mask_to_indices(train_mask);
  if (rows.empty()) throw ConfigError("min_max_fit", "no training rows to fit on");
  ScalerParams p;
  p.fitted_on = rows.size();
  for (const auto& name : columns) {
    const auto j = static_cast<Eigen::Index>(table.schema.index_of(name, "min_max_fit"));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto r : rows) {
      const double v = table.values(static_cast<Eigen::Index>(r), j);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    p.columns.push_back(name);
    p.min.push_back(lo);
    p.max.push_back(hi);
  }
  return p;
}

Table min_max_apply(const Table& table, const ScalerParams& params) {
  Table out = table;
  for (std::size_t i = 0; i < params.columns.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(table.schema.index_of(params.columns[i], "min_max_apply"));
    const double lo = params.min[i];
    const double range = params.max[i] - params.min[i];
    auto col = out.values.col(j);
    if (range > 0) {
      col = (col.array() - lo) / range;
    } else {
      col.setZero();
    }
  }
  return out;
}

Table min_max_inverse(const Table& table, const ScalerParams& params) {
  Table out = table;
  for (std::size_t i = 0; i < params.columns.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(table.schema.index_of(params.columns[i], "min_max_inverse"));
    const double range = params.max[i] - params.min[i];
    auto col = out.values.col(j);
    col = col.array() * range + params.min[i];
  }
  return out;
}

Table lag_counts(const Table& events, const std::vector<int>& windows) {
  for (int w : windows) {
    if (w <= 0) throw ConfigError("lag_counts", "window must be positive, got " + std::to_string(w));
  }
  std::vector<std::size_t> event_cols;
  for (std::size_t j = 0; j < events.cols(); ++j) {
    if (events.schema.column(j).kind == ColumnKind::kEventCount) event_cols.push_back(j);
  }

  // Row indices per field in date order.
  std::map<std::string, std::vector<std::size_t>> by_field;
  for (std::size_t r = 0; r < events.rows(); ++r) by_field[events.field_ids[r]].push_back(r);
  for (auto& [field, idx] : by_field) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return events.dates[a] < events.dates[b]; });
  }

  Table out = events;
  const auto n = events.values.rows();
  const auto base = events.values.cols();
  out.values.conservativeResize(n, base + static_cast<Eigen::Index>(event_cols.size() * windows.size()));
  Eigen::Index at = base;
  for (auto j : event_cols) {
    const auto& spec = events.schema.column(j);
    for (int w : windows) {
      ColumnSpec lag;
      lag.name = spec.name + "_lag" + std::to_string(w) + "d";
      lag.kind = ColumnKind::kContinuous;
      lag.source_group = spec.name;
      lag.cadence = Cadence::kDaily;
      out.schema.push_back(std::move(lag));
      for (const auto& [field, idx] : by_field) {
        // Two-pointer sweep: `lo` is the first row whose date lies inside (t-w, t].
        std::size_t lo = 0;
        double running = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          running += events.values(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(j));
          const int t = events.dates[idx[k]].days;
          while (events.dates[idx[lo]].days <= t - w) {
            running -= events.values(static_cast<Eigen::Index>(idx[lo]), static_cast<Eigen::Index>(j));
            ++lo;
          }
          out.values(static_cast<Eigen::Index>(idx[k]), at) = running;
        }
      }
      ++at;
    }
  }
  out.schema.validate();
  return out;
}

Table daily_merge(const std::vector<Table>& tables) {
  // Column union in order of first appearance; identical duplicates share a slot.
  std::vector<ColumnSpec> specs;
  std::map<std::string, std::size_t> slot;
  std::string target;
  for (const auto& t : tables) {
    if (target.empty()) target = t.schema.target();
    for (const auto& c : t.schema.columns()) {
      auto it = slot.find(c.name);
      if (it == slot.end()) {
        slot.emplace(c.name, specs.size());
        specs.push_back(c);
      } else if (!(specs[it->second] == c)) {
        throw SchemaError("daily_merge", "conflicting definitions of column '" + c.name + "'");
      }
    }
  }
  const std::size_t width = specs.size();

  struct Cell {
    double sum = 0.0;
    int count = 0;
  };
  struct DayRow {
    std::vector<Cell> cells;
    std::string treatment;
    std::set<std::string> interventions;
  };
  std::map<std::pair<std::string, int>, DayRow> grouped;

  for (const auto& t : tables) {
    std::vector<std::size_t> map_to(t.cols());
    for (std::size_t j = 0; j < t.cols(); ++j) map_to[j] = slot.at(t.schema.column(j).name);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto& row = grouped[{t.field_ids[r], t.dates[r].days}];
      if (row.cells.empty()) row.cells.resize(width);
      if (row.treatment.empty()) row.treatment = t.treatments[r];
      if (!t.interventions.empty()) {
        row.interventions.insert(t.interventions[r].begin(), t.interventions[r].end());
      }
      for (std::size_t j = 0; j < t.cols(); ++j) {
        const double v = t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
        if (std::isnan(v)) continue;
        auto& cell = row.cells[map_to[j]];
        const auto kind = specs[map_to[j]].kind;
        if (kind == ColumnKind::kOneHot || kind == ColumnKind::kCategorical) {
          cell.sum = cell.count == 0 ? v : std::max(cell.sum, v);
          cell.count = 1;
        } else {
          cell.sum += v;
          ++cell.count;
        }
      }
    }
  }

  Table out;
  out.schema = Schema(specs);
  if (out.schema.contains(target)) out.schema.set_target(target);
  out.values.resize(static_cast<Eigen::Index>(grouped.size()), static_cast<Eigen::Index>(width));
  bool any_tags = false;
  for (const auto& t : tables) any_tags = any_tags || !t.interventions.empty();

  Eigen::Index r = 0;
  for (const auto& [key, row] : grouped) {
    out.field_ids.push_back(key.first);
    out.dates.push_back(Date{key.second});
    out.treatments.push_back(row.treatment);
    if (any_tags) out.interventions.emplace_back(row.interventions.begin(), row.interventions.end());
    for (std::size_t j = 0; j < width; ++j) {
      const auto& cell = row.cells[j];
      double v = kNaN;
      switch (specs[j].kind) {
        case ColumnKind::kContinuous:
          if (cell.count > 0) v = cell.sum / cell.count;
          break;
        case ColumnKind::kEventCount:
          v = cell.sum;
          break;
        case ColumnKind::kOneHot:
          v = cell.count > 0 ? cell.sum : 0.0;
          break;
        case ColumnKind::kCategorical:
          if (cell.count > 0) v = cell.sum;
          break;
      }
      out.values(r, static_cast<Eigen::Index>(j)) = v;
    }
    ++r;
  }

  // Fill gaps within each field (rows are already grouped by field, date order).
  const auto n = out.values.rows();
  for (std::size_t j = 0; j < width; ++j) {
    const auto kind = specs[j].kind;
    if (kind != ColumnKind::kContinuous && kind != ColumnKind::kCategorical) continue;
    auto col = out.values.col(static_cast<Eigen::Index>(j));
    Eigen::Index start = 0;
    while (start < n) {
      Eigen::Index end = start;
      while (end < n && out.field_ids[static_cast<std::size_t>(end)] ==
                            out.field_ids[static_cast<std::size_t>(start)]) {
        ++end;
      }
      double last = kNaN;
      for (Eigen::Index i = start; i < end; ++i) {
        if (std::isnan(col(i))) col(i) = last;
        else last = col(i);
      }
      double next = kNaN;
      for (Eigen::Index i = end; i-- > start;) {
        if (std::isnan(col(i))) col(i) = next;
        else next = col(i);
      }
      if (std::isnan(col(start))) {
        throw SchemaError("daily_merge", "column '" + specs[j].name + "' has no observations in field '" +
                                             out.field_ids[static_cast<std::size_t>(start)] + "'");
      }
      start = end;
    }
  }
  return out;
}

}  // namespace causalsoil::ingest
