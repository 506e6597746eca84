#include "causalsoil/scm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "causalsoil/error.hpp"
#include "causalsoil/rng.hpp"

namespace causalsoil::scm {

namespace {

void split_parents(Mechanism& m, std::vector<std::pair<std::string, double>> parents) {
  std::sort(parents.begin(), parents.end());
  for (auto& [name, w] : parents) {
    m.parents.push_back(std::move(name));
    m.weights.push_back(w);
  }
}

// Checks everything except the target requirement.
void check_structure(const SCMSpec& scm) {
  if (!graph::is_acyclic(scm.dag)) throw ConfigError("scm", "dag is cyclic");
  for (std::size_t i = 0; i < scm.dag.size(); ++i) {
    const auto& node = scm.dag.label(i);
    const auto it = scm.mechanisms.find(node);
    if (it == scm.mechanisms.end()) throw ConfigError("scm", "node '" + node + "' has no mechanism");
    it->second.validate();
    std::set<std::string> expected;
    for (auto p : scm.dag.parents(i)) expected.insert(scm.dag.label(p));
    const std::set<std::string> given(it->second.parents.begin(), it->second.parents.end());
    if (expected != given || given.size() != it->second.parents.size()) {
      throw ConfigError("scm", "mechanism parents of '" + node + "' do not match the dag");
    }
  }
  if (scm.mechanisms.size() != scm.dag.size()) throw ConfigError("scm", "mechanism for unknown node");
}

std::string two_digits(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", k);
  return buf;
}

}  // namespace

Mechanism Mechanism::linear(std::string node, std::vector<std::pair<std::string, double>> parents,
                            double intercept, double noise_sd) {
  Mechanism m;
  m.node = std::move(node);
  m.kind = MechanismKind::kLinearGaussian;
  m.intercept = intercept;
  m.noise_sd = noise_sd;
  split_parents(m, std::move(parents));
  return m;
}

Mechanism Mechanism::event(std::string node, double base_rate, std::vector<std::pair<std::string, double>> parents) {
  Mechanism m;
  m.node = std::move(node);
  m.kind = MechanismKind::kBernoulliEvent;
  m.base_rate = base_rate;
  split_parents(m, std::move(parents));
  return m;
}

Mechanism Mechanism::constant(std::string node, double value) {
  Mechanism m;
  m.node = std::move(node);
  m.kind = MechanismKind::kConstant;
  m.intercept = value;
  return m;
}

void Mechanism::validate(bool as_intervention) const {
  if (node.empty()) throw ConfigError("mechanism", "empty node name");
  if (parents.size() != weights.size()) throw ConfigError("mechanism", node + ": parents/weights length mismatch");
  for (double w : weights) {
    if (!std::isfinite(w)) throw ConfigError("mechanism", node + ": non-finite weight");
  }
  switch (kind) {
    case MechanismKind::kLinearGaussian:
      if (!(noise_sd > 0) || !std::isfinite(noise_sd)) throw ConfigError("mechanism", node + ": noise sd must be > 0");
      break;
    case MechanismKind::kBernoulliEvent:
      if (as_intervention ? !(base_rate >= 0 && base_rate <= 1) : !(base_rate > 0 && base_rate < 1)) {
        throw ConfigError("mechanism", node + ": base rate out of range");
      }
      break;
    case MechanismKind::kConstant:
      if (!as_intervention) throw ConfigError("mechanism", node + ": constant mechanisms are interventions only");
      if (!parents.empty()) throw ConfigError("mechanism", node + ": constant mechanism with parents");
      break;
  }
}

std::string to_string(Role role) {
  switch (role) {
    case Role::kManagement: return "management";
    case Role::kSoil: return "soil";
    case Role::kTarget: return "target";
  }
  return "soil";
}

void SCMSpec::validate() const {
  check_structure(*this);
  std::size_t targets = 0;
  for (const auto& [node, role] : roles) {
    if (!dag.nodes().find(node)) throw ConfigError("scm", "role for unknown node '" + node + "'");
    if (role == Role::kTarget) ++targets;
  }
  if (targets != 1 || target.empty() || roles.count(target) == 0 || roles.at(target) != Role::kTarget) {
    throw ConfigError("scm", "exactly one target node required");
  }
}

std::vector<std::string> EnvironmentSpec::field_ids() const {
  if (n_fields == 1) return {name};
  std::vector<std::string> ids;
  for (int k = 1; k <= n_fields; ++k) ids.push_back(name + "_f" + two_digits(k));
  return ids;
}

Benchmark default_farm_benchmark(const BenchmarkOptions& options) {
  if (options.n_days < 1) throw ConfigError("benchmark", "n_days must be >= 1");
  if (!(options.noise_scale > 0)) throw ConfigError("benchmark", "noise_scale must be > 0");
  const std::string plough = "Field_Operation_plough";
  const std::string fert = "Field_Operation_fertilize";
  const std::string manure = "Field_Operation_manure";
  const std::string graze = "Field_Operation_graze";
  const std::string sow = "Field_Operation_sow";
  const std::string pest = "Field_Operation_pesticide";
  const double s = options.noise_scale;

  std::vector<Mechanism> mechs{
      Mechanism::event(plough, 0.3),
      Mechanism::event(fert, 0.4),
      Mechanism::event(manure, 0.3),
      Mechanism::event(graze, 0.5),
      Mechanism::event(sow, 0.1),
      Mechanism::event(pest, 0.05),
      Mechanism::linear("soil_moisture", {}, 30.0, 3.0 * s),
      Mechanism::linear("pH", {{plough, 0.8}}, 5.8, 0.04 * s),
      Mechanism::linear("total_N", {{fert, 0.4}, {manure, 0.4}}, 0.25, 0.04 * s),
      Mechanism::linear("herbage_N", {{"total_N", 2.0}}, 1.0, 0.1 * s),
      Mechanism::linear("sward_height", {{sow, 3.0}, {graze, -2.0}, {"soil_moisture", 0.1}}, 8.0, 0.5 * s),
      Mechanism::linear("total_C", {{"pH", -1.5}, {"total_N", -1.5}}, 14.0, 0.25 * s),
  };

  Benchmark b;
  std::vector<std::string> labels;
  for (const auto& m : mechs) labels.push_back(m.node);
  std::sort(labels.begin(), labels.end());
  b.scm.dag = graph::Dag(labels);
  for (const auto& m : mechs) {
    for (const auto& p : m.parents) b.scm.dag.add_edge(b.scm.dag.nodes().index_of(p), b.scm.dag.nodes().index_of(m.node));
    b.scm.mechanisms.emplace(m.node, m);
    const bool event = m.kind == MechanismKind::kBernoulliEvent;
    b.scm.roles[m.node] = event ? Role::kManagement : Role::kSoil;
  }
  b.scm.target = "total_C";
  b.scm.roles[b.scm.target] = Role::kTarget;
  b.scm.validate();

  std::uint64_t stream = 0;
  auto make = [&](const std::string& treatment, int k, std::vector<Mechanism> iv) {
    EnvironmentSpec env;
    env.name = treatment + "_" + two_digits(k);
    env.treatment = treatment;
    env.interventions = std::move(iv);
    env.n_days = options.n_days;
    env.seed = derive_seed(options.seed, ++stream);
    return env;
  };
  for (int k = 1; k <= 7; ++k) b.train.push_back(make("red", k, {Mechanism::event(plough, 0.85)}));
  for (int k = 1; k <= 8; ++k) {
    b.train.push_back(make("blue", k, {Mechanism::event(plough, 0.85), Mechanism::event(fert, 0.15)}));
  }
  for (int k = 1; k <= 7; ++k) b.test.push_back(make("green", k, {Mechanism::event(plough, 0.0)}));
  return b;
}

Table sample_environment(const SCMSpec& scm, const EnvironmentSpec& env, const std::vector<std::string>& universe) {
  check_structure(scm);
  if (env.n_fields < 1 || env.n_days < 1) throw ConfigError("sample_environment", "n_fields and n_days must be >= 1");
  std::map<std::string, Mechanism> mech = scm.mechanisms;
  std::vector<std::string> targets;
  for (const auto& iv : env.interventions) {
    if (!scm.dag.nodes().find(iv.node)) {
      throw ConfigError("sample_environment", "intervention on unknown node '" + iv.node + "'");
    }
    iv.validate(true);
    for (const auto& p : iv.parents) {
      if (!scm.dag.nodes().find(p)) throw ConfigError("sample_environment", "unknown parent '" + p + "'");
    }
    mech[iv.node] = iv;
    targets.push_back(iv.node);
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  // Intervention mechanisms may add parents, so recompute the order.
  graph::Dag order_dag(scm.dag.labels());
  for (const auto& [node, m] : mech) {
    const auto to = order_dag.nodes().index_of(node);
    for (const auto& p : m.parents) order_dag.add_edge_unchecked(order_dag.nodes().index_of(p), to);
  }
  const auto order = graph::topological_sort(order_dag);

  const auto fields = env.field_ids();
  const auto cats = universe.empty() ? fields : universe;
  std::vector<double> field_code;
  for (const auto& f : fields) {
    const auto it = std::find(cats.begin(), cats.end(), f);
    if (it == cats.end()) throw ConfigError("sample_environment", "field '" + f + "' missing from field universe");
    field_code.push_back(static_cast<double>(it - cats.begin()));
  }

  const auto n_nodes = scm.dag.size();
  std::vector<ColumnSpec> cols;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    ColumnSpec c;
    c.name = scm.dag.label(i);
    const bool event = scm.mechanisms.at(c.name).kind == MechanismKind::kBernoulliEvent;
    c.kind = event ? ColumnKind::kEventCount : ColumnKind::kContinuous;
    c.cadence = event ? Cadence::kSparseEvent : Cadence::kDaily;
    cols.push_back(std::move(c));
  }
  ColumnSpec field;
  field.name = kFieldColumn;
  field.kind = ColumnKind::kCategorical;
  field.categories = cats;
  cols.push_back(field);

  Table t;
  t.schema = Schema(std::move(cols), scm.target);
  const auto rows = static_cast<Eigen::Index>(fields.size()) * env.n_days;
  t.values.resize(rows, static_cast<Eigen::Index>(n_nodes + 1));
  const Date start = parse_iso_date(kDefaultStartDate);

  std::vector<std::vector<std::size_t>> parent_idx(n_nodes);
  std::vector<const Mechanism*> by_node(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    by_node[i] = &mech.at(scm.dag.label(i));
    for (const auto& p : by_node[i]->parents) parent_idx[i].push_back(scm.dag.nodes().index_of(p));
  }

  Eigen::Index r = 0;
  std::vector<double> x(n_nodes);
  for (std::size_t f = 0; f < fields.size(); ++f) {
    Rng rng(derive_seed(env.seed, f));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int d = 0; d < env.n_days; ++d, ++r) {
      for (auto i : order) {
        const Mechanism& m = *by_node[i];
        double lin = 0.0;
        for (std::size_t q = 0; q < parent_idx[i].size(); ++q) lin += m.weights[q] * x[parent_idx[i][q]];
        switch (m.kind) {
          case MechanismKind::kLinearGaussian:
            x[i] = m.intercept + lin + m.noise_sd * gauss(rng);
            break;
          case MechanismKind::kBernoulliEvent: {
            double p = m.base_rate;
            if (!m.parents.empty() && p > 0 && p < 1) p = 1.0 / (1.0 + std::exp(-(std::log(p / (1 - p)) + lin)));
            x[i] = unif(rng) < p ? 1.0 : 0.0;
            break;
          }
          case MechanismKind::kConstant:
            x[i] = m.intercept;
            break;
        }
      }
      for (std::size_t i = 0; i < n_nodes; ++i) t.values(r, static_cast<Eigen::Index>(i)) = x[i];
      t.values(r, static_cast<Eigen::Index>(n_nodes)) = field_code[f];
      t.dates.push_back(Date{start.days + d});
      t.field_ids.push_back(fields[f]);
      t.treatments.push_back(env.treatment);
      t.interventions.push_back(targets);
    }
  }
  return t;
}

std::vector<std::string> field_universe(const std::vector<EnvironmentSpec>& envs) {
  std::vector<std::string> out;
  for (const auto& e : envs) {
    for (auto& f : e.field_ids()) out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ConfigError("field_universe", "duplicate field id");
  return out;
}

Table sample_all(const SCMSpec& scm, const std::vector<EnvironmentSpec>& envs, const std::vector<std::string>& universe) {
  std::vector<Table> parts;
  parts.reserve(envs.size());
  for (const auto& e : envs) parts.push_back(sample_environment(scm, e, universe));
  return concat_rows(parts);
}

graph::Cpdag true_cpdag(const SCMSpec& scm) { return graph::cpdag_of(scm.dag); }

Eigen::MatrixXd analytic_covariance(const SCMSpec& scm) {
  check_structure(scm);
  const auto n = static_cast<Eigen::Index>(scm.dag.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);  // b(i, j): weight of parent j in node i
  Eigen::VectorXd noise(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = scm.mechanisms.at(scm.dag.label(static_cast<std::size_t>(i)));
    if (m.kind == MechanismKind::kBernoulliEvent) {
      if (!m.parents.empty()) throw ConfigError("analytic_covariance", m.node + ": event nodes must be roots");
      noise(i) = m.base_rate * (1 - m.base_rate);
    } else {
      noise(i) = m.noise_sd * m.noise_sd;
    }
    for (std::size_t q = 0; q < m.parents.size(); ++q) {
      b(i, static_cast<Eigen::Index>(scm.dag.nodes().index_of(m.parents[q]))) = m.weights[q];
    }
  }
  const Eigen::MatrixXd a = (Eigen::MatrixXd::Identity(n, n) - b).inverse();
  return a * noise.asDiagonal() * a.transpose();
}

SCMSpec induced(const SCMSpec& scm, const std::vector<std::string>& nodes) {
  std::vector<std::string> labels = nodes;
  std::sort(labels.begin(), labels.end());
  SCMSpec out;
  out.dag = graph::Dag(labels);
  for (const auto& node : labels) {
    Mechanism m = scm.mechanisms.at(node);
    Mechanism kept = m;
    kept.parents.clear();
    kept.weights.clear();
    for (std::size_t q = 0; q < m.parents.size(); ++q) {
      if (!std::binary_search(labels.begin(), labels.end(), m.parents[q])) continue;
      kept.parents.push_back(m.parents[q]);
      kept.weights.push_back(m.weights[q]);
      out.dag.add_edge(out.dag.nodes().index_of(m.parents[q]), out.dag.nodes().index_of(node));
    }
    out.mechanisms.emplace(node, std::move(kept));
    if (scm.roles.count(node)) out.roles[node] = scm.roles.at(node);
  }
  if (out.roles.count(scm.target)) out.target = scm.target;
  return out;
}

std::map<std::string, std::string> role_names(const SCMSpec& scm) {
  std::map<std::string, std::string> out;
  for (const auto& [node, role] : scm.roles) out[node] = to_string(role);
  return out;
}

}  // namespace causalsoil::scm
