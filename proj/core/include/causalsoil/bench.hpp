#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalsoil/discovery.hpp"
#include "causalsoil/ingest.hpp"
#include "causalsoil/kvconfig.hpp"
#include "causalsoil/scm.hpp"
#include "causalsoil/table.hpp"

namespace causalsoil::bench {

struct Split {
  std::set<std::string> train_treatments;
  std::set<std::string> test_treatments;
  RowMask train;
  RowMask test;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t train_fields = 0;
  std::size_t test_fields = 0;
};

// Throws ConfigError when either set is empty or they overlap, SchemaError
// when a side selects no rows.
Split split_by_treatment(const Table& table, const std::set<std::string>& train = {"red", "blue"},
                         const std::set<std::string>& test = {"green"});

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
};
Metrics evaluate(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels);

struct BenchConfig {
  std::uint64_t seed = 0;
  int seeds = 5;
  int n_days = 80;
  double noise_scale = 1.0;
  std::vector<int> lag_windows = ingest::kDefaultLagWindows;
  discovery::DiscoveryConfig discovery;
  int gnn_hidden = 16;
  int gnn_epochs = 500;
  double sage_lr = 0.0015;
  double ecc_lr = 0.0020;
  bool ecc_ancestors = false;
  int random_edges = 50;
  int rf_trees = 100;
  int gbt_estimators = 100;
  int gbt_depth = 20;
  double gbt_lr = 0.1;
  int mlp_epochs = 300;
  bool oracle = true;  // also train GNNs on the true DAG
  std::vector<std::string> methods;  // method keys; empty = all
  int jobs = 1;

  void validate() const;
  KeyValues to_kv() const;
  static BenchConfig from_kv(const KeyValues& kv);
  static BenchConfig from_kv(const KeyValues& kv, const BenchConfig& defaults);
  std::string hash() const;  // hex digest of to_kv().to_text()
};

// Method keys in report order: pc-sage pc-ecc ges-sage ges-ecc gies-sage
// gies-ecc random-sage gbt mlp rf.
const std::vector<std::string>& method_keys();
std::string method_name(const std::string& key);
bool method_is_causal(const std::string& key);

struct ResultRow {
  std::string method;
  bool causal = false;
  std::string skeleton;  // pc / ges / gies / oracle / random / none
  double mse = 0.0;
  double mae = 0.0;
  std::uint64_t seed = 0;
  int seed_index = 0;
  std::size_t warnings = 0;
  bool failed = false;
  std::string error;
};

struct ModelTable {
  Table table;  // one-hot fields, lag columns, min-max scaled except the target
  Split split;
  ingest::ScalerParams scaler;
  std::vector<std::string> discovery_columns;
};

// Field one-hot, lag counts, split, scaler fitted on training rows only.
ModelTable prepare_model_table(const Table& raw, const std::vector<std::string>& discovery_columns,
                               const std::vector<int>& lag_windows = ingest::kDefaultLagWindows,
                               const std::set<std::string>& train = {"red", "blue"},
                               const std::set<std::string>& test = {"green"});

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& text);
std::string hex(std::uint64_t v);
// Hash of the (field_id, date) keys of the selected rows.
std::uint64_t row_set_hash(const Table& table, const RowMask& mask);

struct SeedOutput {
  std::vector<ResultRow> rows;
  std::vector<ResultRow> oracle_rows;
  std::map<std::string, std::string> dots;  // file name -> DOT text
  // Fingerprints of fitted artefacts: "scaler", "graph.<algo>", "params.<method>".
  std::map<std::string, std::uint64_t> fingerprints;
  // Row-set hash consumed by each fitting stage, plus "train" and "test".
  std::map<std::string, std::uint64_t> audit;
};

// Runs every configured method on one benchmark draw.
SeedOutput run_seed(const scm::SCMSpec& scm, const Table& raw, const BenchConfig& config, int seed_index,
                    std::uint64_t seed);

struct Histogram {
  std::string column;
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::string> groups;
  std::vector<std::vector<std::size_t>> counts;  // per group, per bin
  std::string to_csv() const;
};

// Common bin edges over all rows; a constant column yields a single bin.
Histogram distribution_summary(const Table& table, const std::string& column, int bins = 20);

struct MatrixOutput {
  std::vector<ResultRow> rows;
  std::vector<ResultRow> oracle_rows;
  std::map<std::string, std::string> dots;
  std::map<std::string, Histogram> histograms;
  std::vector<std::map<std::string, std::uint64_t>> audits;  // per seed
};

MatrixOutput run_matrix(const BenchConfig& config);

struct MethodSummary {
  std::string method;
  bool causal = false;
  double median_mse = 0.0;
  double median_mae = 0.0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t warnings = 0;
};
// Medians over successful seeds, in input method order.
std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows);

std::string results_csv(const std::vector<ResultRow>& rows);
std::string render_report(const MatrixOutput& out, const BenchConfig& config);

// Writes results.csv, oracle.csv, report.md, histograms/*.csv, graphs/*.dot.
void write_outputs(const std::string& dir, const MatrixOutput& out, const BenchConfig& config);

}  // namespace causalsoil::bench
