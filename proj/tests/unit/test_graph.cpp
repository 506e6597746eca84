#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "causalsoil/error.hpp"
#include "causalsoil/graph.hpp"
#include "causalsoil/scm.hpp"
#include "oracles.hpp"

using namespace causalsoil;
using namespace causalsoil::graph;

namespace {

std::vector<std::string> labels_for(int n) {
  std::vector<std::string> l;
  for (int i = 0; i < n; ++i) l.push_back(std::string(1, static_cast<char>('a' + i)));
  return l;
}

Dag to_dag(const oracle::SmallDag& g) {
  Dag d(labels_for(g.n));
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (g.edge(i, j)) d.add_edge(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }
  }
  return d;
}

oracle::SmallDag to_small(const Dag& d) {
  oracle::SmallDag g{static_cast<int>(d.size()), 0};
  for (const auto& [a, b] : d.edges()) g.bits |= 1u << (a * d.size() + b);
  return g;
}

oracle::Pattern pattern_of(const Cpdag& p) {
  oracle::Pattern out;
  for (NodeId i = 0; i < p.size(); ++i) {
    for (NodeId j = i + 1; j < p.size(); ++j) {
      int s = 0;
      if (p.is_directed(i, j)) s = 1;
      if (p.is_directed(j, i)) s = 2;
      if (p.is_undirected(i, j)) s = 3;
      out[{static_cast<int>(i), static_cast<int>(j)}] = s;
    }
  }
  return out;
}

Dag random_dag(int n, double density, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution keep(density);
  Dag d(labels_for(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (keep(rng)) d.add_edge(static_cast<NodeId>(order[static_cast<std::size_t>(i)]),
                                static_cast<NodeId>(order[static_cast<std::size_t>(j)]));
    }
  }
  return d;
}

Cpdag random_pdag(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> state(0, 3);
  Cpdag p(labels_for(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      switch (state(rng)) {
        case 1: p.set_directed(static_cast<NodeId>(i), static_cast<NodeId>(j)); break;
        case 2: p.set_directed(static_cast<NodeId>(j), static_cast<NodeId>(i)); break;
        case 3: p.set_undirected(static_cast<NodeId>(i), static_cast<NodeId>(j)); break;
        default: break;
      }
    }
  }
  return p;
}

// DAGs consistent with a PDAG: same skeleton, directed edges kept, and the
// same v-structures as the PDAG's directed part.
std::set<std::uint32_t> extensions(const Cpdag& p, const std::vector<oracle::SmallDag>& universe) {
  std::set<std::tuple<int, int, int>> pv;
  const int n = static_cast<int>(p.size());
  for (int c = 0; c < n; ++c) {
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (a == c || b == c) continue;
        if (p.is_directed(static_cast<NodeId>(a), static_cast<NodeId>(c)) &&
            p.is_directed(static_cast<NodeId>(b), static_cast<NodeId>(c)) &&
            !p.adjacent(static_cast<NodeId>(a), static_cast<NodeId>(b))) {
          pv.emplace(a, c, b);
        }
      }
    }
  }
  std::set<std::uint32_t> out;
  for (const auto& g : universe) {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = 0; j < n && ok; ++j) {
        if (i == j) continue;
        if (g.adjacent(i, j) != p.adjacent(static_cast<NodeId>(i), static_cast<NodeId>(j))) ok = false;
        if (p.is_directed(static_cast<NodeId>(i), static_cast<NodeId>(j)) && !g.edge(i, j)) ok = false;
      }
    }
    if (ok && oracle::vstructs(g) == pv) out.insert(g.bits);
  }
  return out;
}

}  // namespace

TEST(Dag, RejectsSelfLoopsCyclesAndUnknownLabels) {
  EXPECT_THROW(Dag::from_edges({"a", "b"}, {{"a", "a"}}), ConfigError);
  EXPECT_THROW(Dag::from_edges({"a", "b"}, {{"a", "b"}, {"b", "a"}}), ConfigError);
  EXPECT_THROW(Dag::from_edges({"a", "b"}, {{"a", "z"}}), ConfigError);
  EXPECT_THROW(Dag({"a", "a"}), ConfigError);
}

TEST(Dag, AncestorsOfChainAndEmptyGraph) {
  const Dag chain = Dag::from_edges({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  EXPECT_EQ(ancestors(chain, 2), (std::set<NodeId>{0, 1}));
  EXPECT_TRUE(ancestors(Dag({"x", "y"}), 0).empty());
  EXPECT_EQ(in_neighbors(chain, 2), (std::set<NodeId>{1}));
}

TEST(Dag, AncestorsMatchTransitiveClosure) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const Dag d = random_dag(10, 0.3, rng);
    // Boolean repeated squaring of (I + A).
    Eigen::MatrixXi r = Eigen::MatrixXi::Identity(10, 10);
    for (const auto& [a, b] : d.edges()) r(static_cast<int>(a), static_cast<int>(b)) = 1;
    for (int k = 0; k < 4; ++k) r = ((r * r).array() > 0).cast<int>().matrix();
    for (NodeId v = 0; v < 10; ++v) {
      std::set<NodeId> expect;
      for (NodeId u = 0; u < 10; ++u) {
        if (u != v && r(static_cast<int>(u), static_cast<int>(v))) expect.insert(u);
      }
      EXPECT_EQ(ancestors(d, v), expect);
    }
  }
}

TEST(Dag, TopologicalSortBreaksTiesByLabel) {
  const Dag d = Dag::from_edges({"c", "a", "b", "d"}, {{"d", "b"}});
  const auto order = topological_sort(d);
  std::vector<std::string> names;
  for (auto i : order) names.push_back(d.label(i));
  EXPECT_EQ(names, (std::vector<std::string>{"a", "c", "d", "b"}));
}

TEST(VStructures, ColliderAndChain) {
  const Dag collider = Dag::from_edges({"X", "Y", "Z"}, {{"X", "Z"}, {"Y", "Z"}});
  const auto vs = v_structures(collider);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0], (VStructure{0, 2, 1}));
  EXPECT_TRUE(v_structures(Dag::from_edges({"X", "Y", "Z"}, {{"X", "Y"}, {"Y", "Z"}})).empty());
}

TEST(VStructures, MatchBruteForceOnAllFourNodeDags) {
  const auto all = oracle::all_dags(4);
  ASSERT_EQ(all.size(), 543u);
  for (const auto& g : all) {
    std::set<std::tuple<int, int, int>> got;
    for (const auto& v : v_structures(to_dag(g))) {
      got.emplace(static_cast<int>(v.a), static_cast<int>(v.collider), static_cast<int>(v.b));
    }
    EXPECT_EQ(got, oracle::vstructs(g));
  }
}

TEST(Cpdag, ChainIsUndirectedColliderIsDirected) {
  const Cpdag chain = cpdag_of(Dag::from_edges({"X", "Y", "Z"}, {{"X", "Y"}, {"Y", "Z"}}));
  EXPECT_EQ(chain.undirected_count(), 2u);
  EXPECT_EQ(chain.directed_count(), 0u);
  const Cpdag col = cpdag_of(Dag::from_edges({"X", "Y", "Z"}, {{"X", "Z"}, {"Y", "Z"}}));
  EXPECT_EQ(col.directed_count(), 2u);
  EXPECT_EQ(col.undirected_count(), 0u);
}

TEST(Cpdag, MatchesEquivalenceClassEnumeration) {
  for (int n = 1; n <= 4; ++n) {
    const auto all = oracle::all_dags(n);
    for (const auto& g : all) {
      const Cpdag c = cpdag_of(to_dag(g));
      ASSERT_NO_THROW(c.validate());
      EXPECT_EQ(pattern_of(c), oracle::class_pattern(g, all));
    }
  }
}

TEST(Cpdag, IsAClassFunction) {
  const auto all = oracle::all_dags(4);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Cpdag ci = cpdag_of(to_dag(all[i]));
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (oracle::equivalent(all[i], all[j])) {
        EXPECT_EQ(ci, cpdag_of(to_dag(all[j])));
      }
    }
  }
}

TEST(Extension, EquivalentToSourceDag) {
  for (const auto& g : oracle::all_dags(4)) {
    const Dag d = to_dag(g);
    const auto ext = consistent_extension(cpdag_of(d));
    EXPECT_FALSE(ext.used_fallback);
    EXPECT_TRUE(is_acyclic(ext.dag));
    EXPECT_TRUE(oracle::equivalent(to_small(ext.dag), g));
    EXPECT_TRUE(markov_equivalent(ext.dag, d));
  }
}

TEST(Extension, FullyDirectedIsIdentityAndPairUsesLabelOrder) {
  const Dag d = Dag::from_edges({"a", "b", "c"}, {{"a", "c"}, {"b", "c"}});
  EXPECT_EQ(consistent_extension(Cpdag::from_dag(d)).dag, d);
  Cpdag p({"X", "Y"});
  p.set_undirected(0, 1);
  const auto ext = consistent_extension(p);
  EXPECT_TRUE(ext.dag.has_edge(0, 1));
  EXPECT_FALSE(ext.used_fallback);
}

TEST(Extension, FallbackFlaggedWhenNoneExists) {
  // An undirected 4-cycle admits no extension without a new v-structure.
  Cpdag p({"a", "b", "c", "d"});
  p.set_undirected(0, 1);
  p.set_undirected(1, 2);
  p.set_undirected(2, 3);
  p.set_undirected(0, 3);
  const auto ext = consistent_extension(p);
  EXPECT_TRUE(ext.used_fallback);
  EXPECT_TRUE(is_acyclic(ext.dag));
  EXPECT_EQ(ext.dag.edge_count(), 4u);
}

TEST(Meek, RuleOne) {
  Cpdag p({"a", "b", "c"});
  p.set_directed(0, 1);
  p.set_undirected(1, 2);
  const Cpdag m = meek_closure(p);
  EXPECT_TRUE(m.is_directed(1, 2));
}

TEST(Meek, RuleTwo) {
  Cpdag p({"a", "b", "c"});
  p.set_directed(0, 1);
  p.set_directed(1, 2);
  p.set_undirected(0, 2);
  EXPECT_TRUE(meek_closure(p).is_directed(0, 2));
}

TEST(Meek, RuleThree) {
  // a - c, b - c, d - c, a -> d <- b with a, b non-adjacent: orient c -> d.
  Cpdag p({"a", "b", "c", "d"});
  p.set_undirected(0, 2);
  p.set_undirected(1, 2);
  p.set_undirected(2, 3);
  p.set_directed(0, 3);
  p.set_directed(1, 3);
  EXPECT_TRUE(meek_closure(p).is_directed(2, 3));
}

TEST(Meek, RuleFour) {
  // a - b, a - c, a - d, d -> c -> b, d and b non-adjacent: orient a -> b.
  Cpdag p({"a", "b", "c", "d"});
  p.set_undirected(0, 1);
  p.set_undirected(0, 2);
  p.set_undirected(0, 3);
  p.set_directed(3, 2);
  p.set_directed(2, 1);
  EXPECT_TRUE(meek_closure(p).is_directed(0, 1));
}

TEST(Meek, IdempotentMonotoneAndExtensionPreserving) {
  std::mt19937_64 rng(5);
  const auto universe = oracle::all_dags(4);
  int checked = 0;
  for (int rep = 0; rep < 3000 && checked < 300; ++rep) {
    const Cpdag p = random_pdag(4, rng);
    if (!is_acyclic(p)) continue;
    const auto before = extensions(p, universe);
    if (before.empty()) continue;
    ++checked;
    const Cpdag m = meek_closure(p);
    EXPECT_EQ(meek_closure(m), m);
    for (const auto& [a, b] : p.directed_edges()) EXPECT_TRUE(m.is_directed(a, b));
    EXPECT_EQ(skeleton_shd(p, m), 0);
    EXPECT_TRUE(is_acyclic(m));
    EXPECT_EQ(extensions(m, universe), before);
  }
  EXPECT_GE(checked, 100);
}

TEST(Shd, BasicCases) {
  const Cpdag a = cpdag_of(Dag::from_edges({"X", "Y", "Z"}, {{"X", "Z"}, {"Y", "Z"}}));
  EXPECT_EQ(shd(a, a), 0);
  Cpdag b = a;
  b.set_directed(2, 0);
  EXPECT_EQ(shd(a, b), 1);
  Cpdag c = a;
  c.set_undirected(0, 2);
  c.remove(1, 2);
  EXPECT_EQ(shd(a, c), 2);
  EXPECT_EQ(skeleton_shd(a, c), 1);
}

TEST(Shd, MatchesPairwiseScanAndIsAMetric) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    const Cpdag a = random_pdag(6, rng);
    const Cpdag b = random_pdag(6, rng);
    const Cpdag c = random_pdag(6, rng);
    const auto pa = pattern_of(a);
    const auto pb = pattern_of(b);
    int expect = 0;
    for (const auto& [k, v] : pa) expect += v != pb.at(k);
    EXPECT_EQ(shd(a, b), expect);
    EXPECT_EQ(shd(a, b), shd(b, a));
    EXPECT_EQ(shd(a, a), 0);
    EXPECT_LE(shd(a, c), shd(a, b) + shd(b, c));
    if (shd(a, b) == 0) {
      EXPECT_EQ(a, b);
    }
  }
}

TEST(Dot, EmptyGraphHasOnlyNodeDeclarations) {
  const auto parsed = oracle::parse_dot(to_dot(Dag({"a", "b"})));
  EXPECT_EQ(parsed.nodes, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(parsed.directed.empty());
  EXPECT_TRUE(parsed.undirected.empty());
}

TEST(Dot, SingleEdgeStatement) {
  const std::string dot = to_dot(Dag::from_edges({"a", "b"}, {{"a", "b"}}));
  EXPECT_NE(dot.find("\"a\" -> \"b\";"), std::string::npos);
  std::size_t arrows = 0;
  for (std::size_t p = dot.find("->"); p != std::string::npos; p = dot.find("->", p + 1)) ++arrows;
  EXPECT_EQ(arrows, 1u);
}

TEST(Dot, BenchmarkTruthRoundTrips) {
  const auto bench = scm::default_farm_benchmark();
  const Cpdag truth = scm::true_cpdag(bench.scm);
  const auto parsed = oracle::parse_dot(to_dot(truth, scm::role_names(bench.scm), "truth"));
  EXPECT_EQ(parsed.nodes, truth.labels());
  std::set<std::pair<std::string, std::string>> dir;
  std::set<std::pair<std::string, std::string>> und;
  for (const auto& [a, b] : truth.directed_edges()) dir.insert({truth.label(a), truth.label(b)});
  for (const auto& [a, b] : truth.undirected_edges()) und.insert(std::minmax(truth.label(a), truth.label(b)));
  EXPECT_EQ(parsed.directed, dir);
  EXPECT_EQ(parsed.undirected, und);

  const auto dag = oracle::parse_dot(to_dot(bench.scm.dag));
  EXPECT_EQ(dag.directed.size(), bench.scm.dag.edge_count());
}

TEST(Dot, QuotesAwkwardLabels) {
  const Dag d = Dag::from_edges({"Field=a b", "x\"y"}, {{"Field=a b", "x\"y"}});
  const auto parsed = oracle::parse_dot(to_dot(d));
  EXPECT_EQ(parsed.directed.count({"Field=a b", "x\"y"}), 1u);
}

TEST(EdgeList, TextRoundTrip) {
  const Dag d = Dag::from_edges({"a", "b", "c"}, {{"a", "b"}, {"c", "b"}});
  const EdgeList edges = to_edge_list(d);
  ASSERT_EQ(edges.size(), 2u);
  for (const auto& e : edges) EXPECT_EQ(e.attribute, 1.0);
  EXPECT_EQ(edge_list_from_text(edge_list_to_text(edges)), edges);
  EXPECT_EQ(dag_from_edge_list(d.labels(), edges), d);
}

TEST(Cpdag, ValidateRejectsBrokenGraphs) {
  Cpdag p({"a", "b", "c"});
  p.set_directed(0, 1);
  p.set_directed(1, 2);
  p.set_directed(2, 0);
  EXPECT_THROW(p.validate(), ConfigError);
  Cpdag q({"a", "b"});
  q.set_directed(0, 1);
  q.set_undirected(0, 1);
  EXPECT_FALSE(q.is_directed(0, 1));
  EXPECT_NO_THROW(q.validate());
}
