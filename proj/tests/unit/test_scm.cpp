#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "causalsoil/error.hpp"
#include "causalsoil/graph.hpp"
#include "causalsoil/ingest.hpp"
#include "causalsoil/scm.hpp"
#include "causalsoil/stat_tests.hpp"
#include "causalsoil/table_io.hpp"
#include "oracles.hpp"

using namespace causalsoil;
using namespace causalsoil::scm;

namespace {

SCMSpec two_node(double weight, double sd) {
  SCMSpec s;
  s.dag = graph::Dag::from_edges({"X", "Y"}, {{"X", "Y"}});
  s.mechanisms.emplace("X", Mechanism::linear("X", {}, 0.0, 1.0));
  s.mechanisms.emplace("Y", Mechanism::linear("Y", {{"X", weight}}, 0.5, sd));
  s.roles = {{"X", Role::kSoil}, {"Y", Role::kTarget}};
  s.target = "Y";
  return s;
}

EnvironmentSpec env_of(int days, std::uint64_t seed, std::vector<Mechanism> iv = {}) {
  EnvironmentSpec e;
  e.name = "env";
  e.treatment = "red";
  e.n_days = days;
  e.seed = seed;
  e.interventions = std::move(iv);
  return e;
}

}  // namespace

TEST(Mechanism, Validation) {
  EXPECT_THROW(Mechanism::linear("a", {}, 0, 0).validate(), ConfigError);
  EXPECT_THROW(Mechanism::event("a", 1.0).validate(), ConfigError);
  EXPECT_THROW(Mechanism::event("a", 0.0).validate(), ConfigError);
  EXPECT_NO_THROW(Mechanism::event("a", 0.0).validate(true));
  EXPECT_THROW(Mechanism::constant("a", 0).validate(), ConfigError);
  EXPECT_NO_THROW(Mechanism::constant("a", 0).validate(true));
}

TEST(SCMSpec, Validation) {
  EXPECT_NO_THROW(two_node(2, 1).validate());
  SCMSpec wrong_parents = two_node(2, 1);
  wrong_parents.mechanisms.at("Y") = Mechanism::linear("Y", {}, 0, 1);
  EXPECT_THROW(wrong_parents.validate(), ConfigError);
  SCMSpec missing = two_node(2, 1);
  missing.mechanisms.erase("X");
  EXPECT_THROW(missing.validate(), ConfigError);
  SCMSpec two_targets = two_node(2, 1);
  two_targets.roles["X"] = Role::kTarget;
  EXPECT_THROW(two_targets.validate(), ConfigError);
}

TEST(Sampling, RecoversRegressionSlope) {
  const Table t = sample_environment(two_node(2.0, 0.01), env_of(10000, 3));
  Eigen::MatrixXd x = t.column("X");
  const Eigen::VectorXd beta = oracle::ols(x, t.column("Y"));
  EXPECT_GE(beta(1), 1.98);
  EXPECT_LE(beta(1), 2.02);
}

TEST(Sampling, HardInterventionPinsNode) {
  const Table t = sample_environment(two_node(2.0, 0.1), env_of(500, 3, {Mechanism::constant("X", 0.0)}));
  EXPECT_TRUE((t.column("X").array() == 0.0).all());
  EXPECT_EQ(t.interventions[0], std::vector<std::string>{"X"});
  EXPECT_THROW(sample_environment(two_node(2.0, 0.1), env_of(5, 3, {Mechanism::constant("Q", 0.0)})), ConfigError);
}

TEST(Sampling, DeterministicAndPerFieldSeeds) {
  const auto bench = default_farm_benchmark({.n_days = 50, .seed = 9, .noise_scale = 1.0});
  EnvironmentSpec env = bench.train[0];
  env.n_fields = 3;
  const Table a = sample_environment(bench.scm, env);
  const Table b = sample_environment(bench.scm, env);
  EXPECT_EQ(io::table_to_csv(a), io::table_to_csv(b));
  const Eigen::VectorXd ph = a.column("pH");
  EXPECT_NE(ph.segment(0, 50), ph.segment(50, 50));
  EXPECT_NE(ph.segment(50, 50), ph.segment(100, 50));
  EXPECT_EQ(env.field_ids().size(), 3u);
}

TEST(Benchmark, Structure) {
  const auto b = default_farm_benchmark();
  const auto& dag = b.scm.dag;
  EXPECT_GE(dag.size(), 12u);
  EXPECT_LE(dag.size(), 20u);
  auto has = [&](const std::string& a, const std::string& c) {
    return dag.has_edge(dag.nodes().index_of(a), dag.nodes().index_of(c));
  };
  EXPECT_TRUE(has("Field_Operation_fertilize", "total_N"));
  EXPECT_TRUE(has("Field_Operation_manure", "total_N"));
  EXPECT_TRUE(has("Field_Operation_plough", "pH"));
  EXPECT_TRUE(has("pH", "total_C"));
  EXPECT_TRUE(has("total_N", "total_C"));
  EXPECT_EQ(b.scm.target, "total_C");
  EXPECT_EQ(b.train.size(), 15u);
  EXPECT_EQ(b.test.size(), 7u);
  EXPECT_EQ(std::count_if(b.train.begin(), b.train.end(), [](const auto& e) { return e.treatment == "red"; }), 7);
  EXPECT_EQ(std::count_if(b.train.begin(), b.train.end(), [](const auto& e) { return e.treatment == "blue"; }), 8);
  for (const auto& e : b.test) EXPECT_EQ(e.treatment, "green");
  std::set<std::uint64_t> seeds;
  for (const auto& e : b.train) seeds.insert(e.seed);
  for (const auto& e : b.test) seeds.insert(e.seed);
  EXPECT_EQ(seeds.size(), 22u);
}

TEST(Benchmark, GreenIsNeverPloughedAndTablesValidate) {
  const auto b = default_farm_benchmark({.n_days = 120, .seed = 4, .noise_scale = 1.0});
  const auto universe = field_universe([&] {
    auto all = b.train;
    all.insert(all.end(), b.test.begin(), b.test.end());
    return all;
  }());
  EXPECT_EQ(universe.size(), 22u);
  const Table green = sample_all(b.scm, b.test, universe);
  EXPECT_TRUE((green.column("Field_Operation_plough").array() == 0.0).all());
  EXPECT_NO_THROW(green.validate());
  const Table train = sample_all(b.scm, b.train, universe);
  EXPECT_NO_THROW(train.validate());
  EXPECT_GT(train.column("Field_Operation_plough").mean(), 0.7);
  EXPECT_EQ(train.schema.target(), "total_C");
  // The table flows through preprocessing without changes to its own columns.
  const Table encoded = ingest::lag_counts(ingest::one_hot_encode(train, {kFieldColumn}));
  EXPECT_NO_THROW(encoded.validate());
  EXPECT_EQ(encoded.column("pH"), train.column("pH"));
}

TEST(Benchmark, RootMomentsWithinThreeStandardErrors) {
  const auto b = default_farm_benchmark({.n_days = 10000, .seed = 2, .noise_scale = 1.0});
  EnvironmentSpec obs = b.train[0];
  obs.interventions.clear();
  const Table t = sample_environment(b.scm, obs);
  const double n = static_cast<double>(t.rows());
  for (const auto& [node, m] : b.scm.mechanisms) {
    if (!m.parents.empty()) continue;
    const Eigen::VectorXd x = t.column(node);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (n - 1);
    if (m.kind == MechanismKind::kLinearGaussian) {
      const double s2 = m.noise_sd * m.noise_sd;
      EXPECT_LE(std::abs(mean - m.intercept), 3 * m.noise_sd / std::sqrt(n)) << node;
      EXPECT_LE(std::abs(var - s2), 3 * s2 * std::sqrt(2.0 / (n - 1))) << node;
    } else {
      const double p = m.base_rate;
      EXPECT_LE(std::abs(mean - p), 3 * std::sqrt(p * (1 - p) / n)) << node;
    }
  }
}

TEST(Benchmark, NonDescendantsUnchangedUnderIntervention) {
  const auto b = default_farm_benchmark({.n_days = 5000, .seed = 8, .noise_scale = 1.0});
  EnvironmentSpec obs = b.test[0];
  obs.interventions.clear();
  obs.seed = 1001;
  EnvironmentSpec cut = b.test[0];
  cut.seed = 2002;
  const Table a = sample_environment(b.scm, obs);
  const Table c = sample_environment(b.scm, cut);
  const auto plough = b.scm.dag.nodes().index_of("Field_Operation_plough");
  const auto desc_of_plough = [&](std::size_t v) { return graph::ancestors(b.scm.dag, v).count(plough) > 0; };
  const double crit = oracle::ks_critical(0.01, 5000, 5000);
  int checked = 0;
  for (std::size_t v = 0; v < b.scm.dag.size(); ++v) {
    if (v == plough || desc_of_plough(v)) continue;
    const auto& name = b.scm.dag.label(v);
    const Eigen::VectorXd x = a.column(name);
    const Eigen::VectorXd y = c.column(name);
    const double d = oracle::ks_two_sample({x.data(), x.data() + x.size()}, {y.data(), y.data() + y.size()});
    EXPECT_LT(d, crit) << name;
    ++checked;
  }
  EXPECT_GE(checked, 8);
  // Descendants do move.
  const Eigen::VectorXd x = a.column("pH");
  const Eigen::VectorXd y = c.column("pH");
  EXPECT_GT(oracle::ks_two_sample({x.data(), x.data() + x.size()}, {y.data(), y.data() + y.size()}), crit);
}

TEST(TrueCpdag, ChainAndCollider) {
  SCMSpec chain = two_node(1.0, 1.0);
  EXPECT_EQ(true_cpdag(chain).undirected_count(), 1u);
  SCMSpec col;
  col.dag = graph::Dag::from_edges({"X", "Y", "Z"}, {{"X", "Z"}, {"Y", "Z"}});
  col.mechanisms.emplace("X", Mechanism::linear("X", {}, 0, 1));
  col.mechanisms.emplace("Y", Mechanism::linear("Y", {}, 0, 1));
  col.mechanisms.emplace("Z", Mechanism::linear("Z", {{"X", 1}, {"Y", 1}}, 0, 1));
  col.roles = {{"X", Role::kSoil}, {"Y", Role::kSoil}, {"Z", Role::kTarget}};
  col.target = "Z";
  const auto c = true_cpdag(col);
  EXPECT_EQ(c.directed_count(), 2u);
  EXPECT_EQ(c.undirected_count(), 0u);
}

TEST(TrueCpdag, InducedSubgraphsMatchEnumeration) {
  const auto b = default_farm_benchmark();
  const auto labels = b.scm.dag.labels();
  const auto n = labels.size();
  const auto universe = oracle::all_dags(4);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        for (std::size_t l = k + 1; l < n; ++l) {
          const SCMSpec sub = induced(b.scm, {labels[i], labels[j], labels[k], labels[l]});
          oracle::SmallDag g{4, 0};
          for (const auto& [a, c] : sub.dag.edges()) g.bits |= 1u << (a * 4 + c);
          const auto cp = true_cpdag(sub);
          for (int a = 0; a < 4; ++a) {
            for (int c = a + 1; c < 4; ++c) {
              const int want = oracle::class_pattern(g, universe).at({a, c});
              int got = 0;
              if (cp.is_directed(static_cast<std::size_t>(a), static_cast<std::size_t>(c))) got = 1;
              if (cp.is_directed(static_cast<std::size_t>(c), static_cast<std::size_t>(a))) got = 2;
              if (cp.is_undirected(static_cast<std::size_t>(a), static_cast<std::size_t>(c))) got = 3;
              ASSERT_EQ(got, want);
            }
          }
          ++checked;
        }
      }
    }
  }
  EXPECT_EQ(checked, n * (n - 1) * (n - 2) * (n - 3) / 24);
}

TEST(AnalyticCovariance, MatchesLargeSample) {
  const auto b = default_farm_benchmark({.n_days = 40000, .seed = 6, .noise_scale = 1.0});
  EnvironmentSpec obs = b.train[0];
  obs.interventions.clear();
  const Table t = sample_environment(b.scm, obs);
  const auto sample = stats::suff_stat(t, b.scm.dag.labels());
  const Eigen::MatrixXd cov = analytic_covariance(b.scm);
  ASSERT_EQ(cov.rows(), static_cast<Eigen::Index>(b.scm.dag.size()));
  EXPECT_LE((cov - cov.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / 40000.0);
      EXPECT_LE(std::abs(sample.cov(i, j) - cov(i, j)), 5 * se) << i << "," << j;
    }
  }
}

TEST(Induced, DropsOutsideParents) {
  const auto b = default_farm_benchmark();
  const SCMSpec sub = induced(b.scm, {"pH", "total_C"});
  EXPECT_EQ(sub.dag.size(), 2u);
  EXPECT_EQ(sub.mechanisms.at("pH").parents.size(), 0u);
  EXPECT_EQ(sub.mechanisms.at("total_C").parents, std::vector<std::string>{"pH"});
  EXPECT_EQ(sub.target, "total_C");
  EXPECT_NO_THROW(sub.validate());
}
