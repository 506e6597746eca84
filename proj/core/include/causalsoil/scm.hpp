#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalsoil/graph.hpp"
#include "causalsoil/table.hpp"

namespace causalsoil::scm {

enum class MechanismKind {
  kLinearGaussian,  // intercept + sum w_i * parent_i + N(0, noise_sd^2)
  kBernoulliEvent,  // P(1) = sigmoid(logit(base_rate) + sum w_i * parent_i)
  kConstant,        // hard intervention: always `intercept`
};

struct Mechanism {
  std::string node;
  MechanismKind kind = MechanismKind::kLinearGaussian;
  std::vector<std::string> parents;
  std::vector<double> weights;
  double intercept = 0.0;
  double noise_sd = 1.0;
  double base_rate = 0.5;

  static Mechanism linear(std::string node, std::vector<std::pair<std::string, double>> parents,
                          double intercept, double noise_sd);
  static Mechanism event(std::string node, double base_rate,
                         std::vector<std::pair<std::string, double>> parents = {});
  static Mechanism constant(std::string node, double value);

  // Observational mechanisms need sd > 0 and a rate strictly inside (0, 1);
  // intervention replacements may pin the rate to 0 or 1.
  void validate(bool as_intervention = false) const;
};

enum class Role { kManagement, kSoil, kTarget };
std::string to_string(Role role);

struct SCMSpec {
  graph::Dag dag;
  std::map<std::string, Mechanism> mechanisms;
  std::map<std::string, Role> roles;
  std::string target;

  // Acyclic, exactly one target, one mechanism per node whose parent list
  // matches the DAG.
  void validate() const;
};

struct EnvironmentSpec {
  std::string name;       // field id prefix, e.g. "red_01"
  std::string treatment;  // red / blue / green analogue
  std::vector<Mechanism> interventions;
  int n_fields = 1;
  int n_days = 365;
  std::uint64_t seed = 0;

  std::vector<std::string> field_ids() const;
};

struct BenchmarkOptions {
  int n_days = 365;
  std::uint64_t seed = 0;
  // Multiplies every continuous noise sd.
  double noise_scale = 1.0;
};

struct Benchmark {
  SCMSpec scm;
  std::vector<EnvironmentSpec> train;
  std::vector<EnvironmentSpec> test;
};

// Farm surrogate: management events (plough, fertilize, manure, graze, sow,
// pesticide), soil observables and total carbon. Training environments are 7
// red + 8 blue with ploughing forced frequent (blue also fertilizes less);
// the 7 green test environments are never ploughed.
Benchmark default_farm_benchmark(const BenchmarkOptions& options = {});

inline const std::string kFieldColumn = "Field";
inline const std::string kDefaultStartDate = "2013-04-01";

// One row per (field, day). Columns are the SCM nodes in DAG label order
// followed by the categorical Field column whose categories are
// `field_universe` (defaults to this environment's own fields).
Table sample_environment(const SCMSpec& scm, const EnvironmentSpec& env,
                         const std::vector<std::string>& field_universe = {});

std::vector<std::string> field_universe(const std::vector<EnvironmentSpec>& envs);
// Samples every environment against the shared field universe and stacks them.
Table sample_all(const SCMSpec& scm, const std::vector<EnvironmentSpec>& envs,
                 const std::vector<std::string>& universe);

graph::Cpdag true_cpdag(const SCMSpec& scm);

// Population covariance of the observational SCM, rows in DAG label order.
// Bernoulli nodes must be roots (variance p(1-p)).
Eigen::MatrixXd analytic_covariance(const SCMSpec& scm);

// SCM restricted to `nodes`; parent terms outside the set are dropped.
SCMSpec induced(const SCMSpec& scm, const std::vector<std::string>& nodes);

// Role per node for DOT styling.
std::map<std::string, std::string> role_names(const SCMSpec& scm);

}  // namespace causalsoil::scm
