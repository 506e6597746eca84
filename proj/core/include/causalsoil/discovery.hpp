#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "causalsoil/graph.hpp"
#include "causalsoil/stat_tests.hpp"
#include "causalsoil/table.hpp"

namespace causalsoil::discovery {

enum class Algorithm { kPc, kGes, kGies };
Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algo);

struct DiscoveryConfig {
  double alpha = 0.05;
  int max_cond_size = 3;
  int max_parents = 5;
  bool use_interventions = true;
  // Worker threads for PC pair tests within a level; results do not depend on it.
  int jobs = 1;

  void validate() const;
};

struct PcResult {
  graph::Cpdag cpdag;
  // Separating set per removed pair (i < j), as node indices.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> sepsets;
  std::size_t tests_run = 0;
  std::size_t ridge_fallbacks = 0;
  std::vector<std::string> degenerate;  // isolated zero-variance columns
};

struct ScoreSearchResult {
  graph::Cpdag cpdag;
  graph::Dag dag;                  // final DAG member of the class
  std::vector<double> trajectory;  // total score after each accepted move
  std::size_t forward_moves = 0;
  std::size_t backward_moves = 0;
  std::size_t turning_moves = 0;
  std::size_t ridge_fallbacks = 0;
  std::size_t empty_warnings = 0;
};

// Order-stable PC: adjacencies frozen per conditioning-set size, removals
// applied at level end, subsets enumerated in label order so the result does
// not depend on column order.
PcResult pc(const stats::CiTest& test, const std::vector<std::string>& labels, const DiscoveryConfig& config);
PcResult pc(const Table& table, const std::vector<std::string>& columns, const DiscoveryConfig& config);

// Greedy edge additions in DAG space, mapping to the equivalence class, then
// greedy deletions evaluated on a consistent extension.
ScoreSearchResult ges(const stats::GaussianBicScorer& scorer, const DiscoveryConfig& config);
ScoreSearchResult ges(const Table& table, const std::vector<std::string>& columns, const DiscoveryConfig& config);

// GES phases under the interventional score plus a turning phase that
// reverses edges touching intervened nodes; repeated until turning is idle.
ScoreSearchResult gies(const stats::GaussianBicScorer& scorer, const DiscoveryConfig& config);
ScoreSearchResult gies(const Table& table, const std::vector<std::string>& columns, const DiscoveryConfig& config);

// Essential graph of `dag` given intervention target sets (one flag vector per
// regime): v-structures plus every edge with exactly one intervened endpoint
// in some regime are directed, then Meek closure.
graph::Cpdag interventional_essential_graph(const graph::Dag& dag,
                                            const std::vector<std::vector<char>>& target_sets);

struct DiscoveryOutput {
  graph::Cpdag cpdag;
  graph::Extension extension;
  std::size_t warnings = 0;
};

// Dispatches on the algorithm and extends the result to a DAG.
DiscoveryOutput discover(Algorithm algo, const Table& table, const std::vector<std::string>& columns,
                         const DiscoveryConfig& config);

}  // namespace causalsoil::discovery
