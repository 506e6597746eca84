#include "causalsoil/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <numeric>
#include <thread>

#include "causalsoil/error.hpp"

namespace causalsoil::discovery {

using graph::Cpdag;
using graph::Dag;
using graph::NodeId;

Algorithm parse_algorithm(const std::string& name) {
  if (name == "pc") return Algorithm::kPc;
  if (name == "ges") return Algorithm::kGes;
  if (name == "gies") return Algorithm::kGies;
  throw ConfigError("discovery", "unknown algorithm '" + name + "' (expected pc, ges or gies)");
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::kPc: return "pc";
    case Algorithm::kGes: return "ges";
    case Algorithm::kGies: return "gies";
  }
  return "pc";
}

void DiscoveryConfig::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("discovery", "alpha must lie in (0, 1)");
  if (max_cond_size < 0) throw ConfigError("discovery", "max_cond_size must be >= 0");
  if (max_parents < 0) throw ConfigError("discovery", "max_parents must be >= 0");
  if (jobs < 1) throw ConfigError("discovery", "jobs must be >= 1");
}

// ---------------------------------------------------------------- PC

namespace {

// Calls fn(subset) for every size-k subset of `items` in lexicographic order
// until fn returns true.
template <typename Fn>
bool for_each_subset(const std::vector<std::size_t>& items, std::size_t k, Fn&& fn) {
  if (k > items.size()) return false;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t t = 0; t < k; ++t) subset[t] = items[pick[t]];
    if (fn(subset)) return true;
    std::size_t t = k;
    while (t > 0 && pick[t - 1] == items.size() - k + t - 1) --t;
    if (t == 0) return false;
    ++pick[t - 1];
    for (std::size_t u = t; u < k; ++u) pick[u] = pick[u - 1] + 1;
  }
}

struct PairJob {
  std::size_t i = 0;
  std::size_t j = 0;
  bool remove = false;
  std::vector<std::size_t> sepset;
  std::size_t tests = 0;
  std::size_t ridge = 0;
};

}  // namespace

PcResult pc(const stats::CiTest& test, const std::vector<std::string>& labels, const DiscoveryConfig& config) {
  config.validate();
  const std::size_t n = labels.size();
  if (test.num_vars() != n) throw ConfigError("pc", "CI test width does not match labels");

  // Rank by label so enumeration order is independent of column order.
  std::vector<std::size_t> by_label(n);
  std::iota(by_label.begin(), by_label.end(), 0);
  std::sort(by_label.begin(), by_label.end(), [&](auto a, auto b) { return labels[a] < labels[b]; });

  PcResult result;
  std::vector<char> adj(n * n, 0);
  std::vector<char> degenerate(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    degenerate[i] = test.degenerate(i) ? 1 : 0;
    if (degenerate[i]) result.degenerate.push_back(labels[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && !degenerate[i] && !degenerate[j]) adj[i * n + j] = 1;
    }
  }

  auto neighbours = [&](const std::vector<char>& a, std::size_t x, std::size_t excl) {
    std::vector<std::size_t> out;
    for (auto y : by_label) {
      if (y != excl && a[x * n + y]) out.push_back(y);
    }
    return out;
  };

  for (int level = 0; level <= config.max_cond_size; ++level) {
    const auto k = static_cast<std::size_t>(level);
    const std::vector<char> frozen = adj;
    std::vector<PairJob> jobs;
    bool any_testable = false;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const auto i = std::min(by_label[a], by_label[b]);
        const auto j = std::max(by_label[a], by_label[b]);
        if (!frozen[i * n + j]) continue;
        PairJob job;
        job.i = by_label[a];
        job.j = by_label[b];
        jobs.push_back(std::move(job));
      }
    }
    auto run = [&](PairJob& job) {
      for (int side = 0; side < 2 && !job.remove; ++side) {
        const auto x = side == 0 ? job.i : job.j;
        const auto y = side == 0 ? job.j : job.i;
        const auto nb = neighbours(frozen, x, y);
        for_each_subset(nb, k, [&](const std::vector<std::size_t>& s) {
          const auto res = test.test(x, y, s);
          ++job.tests;
          if (res.regularized) ++job.ridge;
          if (res.independent) {
            job.remove = true;
            job.sepset = s;
            return true;
          }
          return false;
        });
      }
    };
    for (const auto& job : jobs) {
      if (neighbours(frozen, job.i, job.j).size() >= k || neighbours(frozen, job.j, job.i).size() >= k) {
        any_testable = true;
      }
    }
    if (!any_testable) break;

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), std::max<std::size_t>(jobs.size(), 1));
    if (workers <= 1) {
      for (auto& job : jobs) run(job);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t q = w; q < jobs.size(); q += workers) run(jobs[q]);
        });
      }
      for (auto& t : pool) t.join();
    }
    for (const auto& job : jobs) {
      result.tests_run += job.tests;
      result.ridge_fallbacks += job.ridge;
      if (!job.remove) continue;
      adj[job.i * n + job.j] = adj[job.j * n + job.i] = 0;
      result.sepsets[{std::min(job.i, job.j), std::max(job.i, job.j)}] = job.sepset;
    }
  }

  Cpdag g(labels);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adj[i * n + j]) g.set_undirected(i, j);
    }
  }
  // Unshielded triples a - c - b with c outside sepset(a, b) become colliders.
  for (auto c : by_label) {
    for (auto a : by_label) {
      for (auto b : by_label) {
        if (labels[a] >= labels[b] || a == c || b == c) continue;
        if (!adj[a * n + c] || !adj[b * n + c] || adj[a * n + b]) continue;
        const auto it = result.sepsets.find({std::min(a, b), std::max(a, b)});
        if (it != result.sepsets.end() && std::find(it->second.begin(), it->second.end(), c) != it->second.end()) {
          continue;
        }
        for (auto from : {a, b}) {
          if (g.is_directed(c, from)) continue;  // conflicting orientation: first one wins
          Cpdag trial = g;
          trial.set_directed(from, c);
          if (graph::is_acyclic(trial)) g = std::move(trial);
        }
      }
    }
  }
  result.cpdag = graph::meek_closure(g);
  return result;
}

PcResult pc(const Table& table, const std::vector<std::string>& columns, const DiscoveryConfig& config) {
  stats::FisherZTest test(stats::suff_stat(table, columns), config.alpha);
  return pc(test, columns, config);
}

// ---------------------------------------------------------------- score search

namespace {

constexpr double kMinGain = 1e-9;

bool better(double gain, const std::string& a1, const std::string& b1, double best,
            const std::string& a2, const std::string& b2) {
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  if (gain > best + tol) return true;
  if (gain < best - tol) return false;
  return std::tie(a1, b1) < std::tie(a2, b2);
}

std::vector<NodeId> with(std::vector<NodeId> v, NodeId x) {
  v.push_back(x);
  return v;
}

std::vector<NodeId> without(std::vector<NodeId> v, NodeId x) {
  v.erase(std::remove(v.begin(), v.end(), x), v.end());
  return v;
}

struct Search {
  const stats::GaussianBicScorer& scorer;
  const DiscoveryConfig& config;
  std::vector<std::vector<char>> targets;  // empty for plain GES
  Dag dag;
  ScoreSearchResult out;

  Search(const stats::GaussianBicScorer& s, const DiscoveryConfig& c, std::vector<std::vector<char>> t)
      : scorer(s), config(c), targets(std::move(t)), dag(s.names()) {}

  const std::string& label(NodeId i) const { return dag.label(i); }

  void record() { out.trajectory.push_back(scorer.graph(dag)); }

  Cpdag essential() const {
    return targets.empty() ? graph::cpdag_of(dag) : interventional_essential_graph(dag, targets);
  }

  void remap() {
    const auto ext = graph::consistent_extension(essential());
    dag = ext.dag;
  }

  bool forward() {
    bool any = false;
    const auto n = dag.size();
    while (true) {
      double best = -std::numeric_limits<double>::infinity();
      NodeId ba = 0;
      NodeId bb = 0;
      bool found = false;
      for (NodeId b = 0; b < n; ++b) {
        const auto pa = dag.parents(b);
        if (static_cast<int>(pa.size()) >= config.max_parents) continue;
        const double base = scorer.local(b, pa);
        for (NodeId a = 0; a < n; ++a) {
          if (a == b || dag.adjacent(a, b) || dag.reaches(b, a)) continue;
          const double gain = scorer.local(b, with(pa, a)) - base;
          if (!found || better(gain, label(a), label(b), best, label(ba), label(bb))) {
            best = gain;
            ba = a;
            bb = b;
            found = true;
          }
        }
      }
      if (!found || !(best > kMinGain)) break;
      dag.add_edge(ba, bb);
      ++out.forward_moves;
      any = true;
      record();
    }
    return any;
  }

  bool backward() {
    bool any = false;
    remap();
    while (true) {
      double best = -std::numeric_limits<double>::infinity();
      NodeId ba = 0;
      NodeId bb = 0;
      bool found = false;
      for (const auto& [a, b] : dag.edges()) {
        const auto pa = dag.parents(b);
        const double gain = scorer.local(b, without(pa, a)) - scorer.local(b, pa);
        if (!found || better(gain, label(a), label(b), best, label(ba), label(bb))) {
          best = gain;
          ba = a;
          bb = b;
          found = true;
        }
      }
      if (!found || !(best > kMinGain)) break;
      dag.remove_edge(ba, bb);
      remap();
      ++out.backward_moves;
      any = true;
      record();
    }
    return any;
  }

  bool touches_target(NodeId a, NodeId b) const {
    for (const auto& t : targets) {
      if (t[a] || t[b]) return true;
    }
    return false;
  }

  bool turning() {
    bool any = false;
    while (true) {
      double best = -std::numeric_limits<double>::infinity();
      NodeId ba = 0;
      NodeId bb = 0;
      bool found = false;
      for (const auto& [a, b] : dag.edges()) {
        if (!touches_target(a, b)) continue;
        const auto pa_a = dag.parents(a);
        if (static_cast<int>(pa_a.size()) >= config.max_parents) continue;
        Dag trial = dag;
        trial.remove_edge(a, b);
        if (trial.reaches(a, b)) continue;  // b -> a would close a cycle
        const auto pa_b = dag.parents(b);
        const double gain = scorer.local(a, with(pa_a, b)) + scorer.local(b, without(pa_b, a)) -
                            scorer.local(a, pa_a) - scorer.local(b, pa_b);
        if (!found || better(gain, label(a), label(b), best, label(ba), label(bb))) {
          best = gain;
          ba = a;
          bb = b;
          found = true;
        }
      }
      if (!found || !(best > kMinGain)) break;
      dag.remove_edge(ba, bb);
      dag.add_edge(bb, ba);
      ++out.turning_moves;
      any = true;
      record();
    }
    return any;
  }

  ScoreSearchResult finish() {
    out.cpdag = essential();
    out.dag = dag;
    out.ridge_fallbacks = scorer.ridge_fallbacks();
    out.empty_warnings = scorer.empty_warnings();
    return std::move(out);
  }
};

}  // namespace

ScoreSearchResult ges(const stats::GaussianBicScorer& scorer, const DiscoveryConfig& config) {
  config.validate();
  Search s(scorer, config, {});
  s.record();
  s.forward();
  s.backward();
  return s.finish();
}

ScoreSearchResult gies(const stats::GaussianBicScorer& scorer, const DiscoveryConfig& config) {
  config.validate();
  Search s(scorer, config, scorer.target_sets());
  s.record();
  // Bound the outer loop; each round strictly raises the score so it ends anyway.
  for (int round = 0; round < 100; ++round) {
    s.forward();
    s.backward();
    if (!s.turning()) break;
  }
  return s.finish();
}

ScoreSearchResult ges(const Table& table, const std::vector<std::string>& columns, const DiscoveryConfig& config) {
  stats::GaussianBicScorer scorer(table, columns, false);
  return ges(scorer, config);
}

ScoreSearchResult gies(const Table& table, const std::vector<std::string>& columns, const DiscoveryConfig& config) {
  if (config.use_interventions && table.interventions.empty()) {
    throw SchemaError("gies", "table carries no intervention tags");
  }
  stats::GaussianBicScorer scorer(table, columns, config.use_interventions);
  return gies(scorer, config);
}

Cpdag interventional_essential_graph(const Dag& dag, const std::vector<std::vector<char>>& target_sets) {
  Cpdag g(dag.labels());
  for (const auto& [a, b] : dag.edges()) g.set_undirected(a, b);
  for (const auto& v : graph::v_structures(dag)) {
    g.set_directed(v.a, v.collider);
    g.set_directed(v.b, v.collider);
  }
  for (const auto& [a, b] : dag.edges()) {
    for (const auto& t : target_sets) {
      if ((t[a] != 0) != (t[b] != 0)) {
        g.set_directed(a, b);
        break;
      }
    }
  }
  return graph::meek_closure(g);
}

DiscoveryOutput discover(Algorithm algo, const Table& table, const std::vector<std::string>& columns,
                         const DiscoveryConfig& config) {
  DiscoveryOutput out;
  switch (algo) {
    case Algorithm::kPc: {
      auto r = pc(table, columns, config);
      out.cpdag = std::move(r.cpdag);
      out.warnings = r.ridge_fallbacks + r.degenerate.size();
      break;
    }
    case Algorithm::kGes: {
      auto r = ges(table, columns, config);
      out.cpdag = std::move(r.cpdag);
      out.warnings = r.ridge_fallbacks + r.empty_warnings;
      break;
    }
    case Algorithm::kGies: {
      auto r = gies(table, columns, config);
      out.cpdag = std::move(r.cpdag);
      out.warnings = r.ridge_fallbacks + r.empty_warnings;
      break;
    }
  }
  out.extension = graph::consistent_extension(out.cpdag);
  if (out.extension.used_fallback) ++out.warnings;
  return out;
}

}  // namespace causalsoil::discovery
