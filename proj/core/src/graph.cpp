#include "causalsoil/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <queue>
#include <sstream>

#include "causalsoil/error.hpp"

namespace causalsoil::graph {

NodeSet::NodeSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw ConfigError("graph", "empty node label");
    if (!seen.insert(l).second) throw ConfigError("graph", "duplicate node label '" + l + "'");
  }
}

std::optional<NodeId> NodeSet::find(std::string_view label) const {
  for (NodeId i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

NodeId NodeSet::index_of(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw ConfigError("graph", "unknown node '" + std::string(label) + "'");
}

// ---------------------------------------------------------------- Dag

Dag::Dag(std::vector<std::string> labels)
    : nodes_(std::move(labels)), adj_(nodes_.size() * nodes_.size(), 0) {}

Dag Dag::from_edges(std::vector<std::string> labels,
                    const std::vector<std::pair<std::string, std::string>>& edges) {
  Dag d(std::move(labels));
  for (const auto& [a, b] : edges) d.add_edge(d.nodes_.index_of(a), d.nodes_.index_of(b));
  return d;
}

void Dag::add_edge(NodeId from, NodeId to) {
  if (from == to) throw ConfigError("graph", "self-loop on '" + nodes_.label(from) + "'");
  if (has_edge(from, to)) return;
  if (reaches(to, from)) {
    throw ConfigError("graph", "edge " + nodes_.label(from) + "->" + nodes_.label(to) + " closes a cycle");
  }
  adj_[from * size() + to] = 1;
}

void Dag::add_edge_unchecked(NodeId from, NodeId to) {
  if (from == to) throw ConfigError("graph", "self-loop on '" + nodes_.label(from) + "'");
  adj_[from * size() + to] = 1;
}

void Dag::remove_edge(NodeId from, NodeId to) { adj_[from * size() + to] = 0; }

std::vector<NodeId> Dag::parents(NodeId node) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i) {
    if (has_edge(i, node)) out.push_back(i);
  }
  return out;
}

std::vector<NodeId> Dag::children(NodeId node) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i) {
    if (has_edge(node, i)) out.push_back(i);
  }
  return out;
}

std::vector<Edge> Dag::edges() const {
  std::vector<Edge> out;
  for (NodeId a = 0; a < size(); ++a) {
    for (NodeId b = 0; b < size(); ++b) {
      if (has_edge(a, b)) out.emplace_back(a, b);
    }
  }
  return out;
}

std::size_t Dag::edge_count() const {
  return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1));
}

bool Dag::reaches(NodeId from, NodeId to) const {
  if (from == to) return true;
  std::vector<char> seen(size(), 0);
  std::vector<NodeId> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v = 0; v < size(); ++v) {
      if (!has_edge(u, v) || seen[v]) continue;
      if (v == to) return true;
      seen[v] = 1;
      stack.push_back(v);
    }
  }
  return false;
}

// ---------------------------------------------------------------- Cpdag

Cpdag::Cpdag(std::vector<std::string> labels)
    : nodes_(std::move(labels)),
      dir_(nodes_.size() * nodes_.size(), 0),
      und_(nodes_.size() * nodes_.size(), 0) {}

Cpdag Cpdag::from_dag(const Dag& dag) {
  Cpdag p(dag.labels());
  for (const auto& [a, b] : dag.edges()) p.set_directed(a, b);
  return p;
}

void Cpdag::set_directed(NodeId from, NodeId to) {
  if (from == to) throw ConfigError("graph", "self-loop on '" + nodes_.label(from) + "'");
  remove(from, to);
  dir_[from * size() + to] = 1;
}

void Cpdag::set_undirected(NodeId a, NodeId b) {
  if (a == b) throw ConfigError("graph", "self-loop on '" + nodes_.label(a) + "'");
  remove(a, b);
  und_[a * size() + b] = 1;
  und_[b * size() + a] = 1;
}

void Cpdag::remove(NodeId a, NodeId b) {
  dir_[a * size() + b] = 0;
  dir_[b * size() + a] = 0;
  und_[a * size() + b] = 0;
  und_[b * size() + a] = 0;
}

std::vector<Edge> Cpdag::directed_edges() const {
  std::vector<Edge> out;
  for (NodeId a = 0; a < size(); ++a) {
    for (NodeId b = 0; b < size(); ++b) {
      if (is_directed(a, b)) out.emplace_back(a, b);
    }
  }
  return out;
}

std::vector<Edge> Cpdag::undirected_edges() const {
  std::vector<Edge> out;
  for (NodeId a = 0; a < size(); ++a) {
    for (NodeId b = a + 1; b < size(); ++b) {
      if (is_undirected(a, b)) out.emplace_back(a, b);
    }
  }
  return out;
}

std::size_t Cpdag::directed_count() const {
  return static_cast<std::size_t>(std::count(dir_.begin(), dir_.end(), 1));
}

std::size_t Cpdag::undirected_count() const {
  return static_cast<std::size_t>(std::count(und_.begin(), und_.end(), 1)) / 2;
}

std::vector<NodeId> Cpdag::adjacent_nodes(NodeId node) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i) {
    if (i != node && adjacent(node, i)) out.push_back(i);
  }
  return out;
}

void Cpdag::validate() const {
  for (NodeId a = 0; a < size(); ++a) {
    if (is_directed(a, a) || is_undirected(a, a)) throw ConfigError("cpdag", "self-loop");
    for (NodeId b = 0; b < size(); ++b) {
      if (is_directed(a, b) && (is_directed(b, a) || is_undirected(a, b))) {
        throw ConfigError("cpdag", "edge " + nodes_.label(a) + "-" + nodes_.label(b) + " has two statuses");
      }
      if (is_undirected(a, b) != is_undirected(b, a)) throw ConfigError("cpdag", "asymmetric undirected edge");
    }
  }
  if (!is_acyclic(*this)) throw ConfigError("cpdag", "directed part has a cycle");
}

// ---------------------------------------------------------------- algorithms

namespace {

// Kahn's algorithm on an arbitrary directed adjacency predicate.
template <typename HasEdge>
std::optional<std::vector<NodeId>> kahn(std::size_t n, const std::vector<std::string>& labels,
                                        HasEdge has_edge) {
  std::vector<int> indeg(n, 0);
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = 0; b < n; ++b) {
      if (has_edge(a, b)) ++indeg[b];
    }
  }
  auto later = [&](NodeId x, NodeId y) { return labels[x] > labels[y]; };
  std::priority_queue<NodeId, std::vector<NodeId>, decltype(later)> ready(later);
  for (NodeId i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<NodeId> order;
  while (!ready.empty()) {
    const NodeId u = ready.top();
    ready.pop();
    order.push_back(u);
    for (NodeId v = 0; v < n; ++v) {
      if (has_edge(u, v) && --indeg[v] == 0) ready.push(v);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

}  // namespace

bool is_acyclic(const Dag& dag) {
  return kahn(dag.size(), dag.labels(), [&](NodeId a, NodeId b) { return dag.has_edge(a, b); }).has_value();
}

bool is_acyclic(const Cpdag& pdag) {
  return kahn(pdag.size(), pdag.labels(), [&](NodeId a, NodeId b) { return pdag.is_directed(a, b); })
      .has_value();
}

std::vector<NodeId> topological_sort(const Dag& dag) {
  auto order = kahn(dag.size(), dag.labels(), [&](NodeId a, NodeId b) { return dag.has_edge(a, b); });
  if (!order) throw ConfigError("topological_sort", "graph has a cycle");
  return *order;
}

std::set<NodeId> ancestors(const Dag& dag, NodeId node) {
  std::set<NodeId> out;
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId p : dag.parents(u)) {
      if (out.insert(p).second) stack.push_back(p);
    }
  }
  out.erase(node);
  return out;
}

std::set<NodeId> in_neighbors(const Dag& dag, NodeId node) {
  const auto p = dag.parents(node);
  return {p.begin(), p.end()};
}

std::vector<VStructure> v_structures(const Dag& dag) {
  std::vector<VStructure> out;
  for (NodeId c = 0; c < dag.size(); ++c) {
    const auto pa = dag.parents(c);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      for (std::size_t j = i + 1; j < pa.size(); ++j) {
        if (!dag.adjacent(pa[i], pa[j])) out.push_back({pa[i], c, pa[j]});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool markov_equivalent(const Dag& a, const Dag& b) {
  if (!(a.nodes() == b.nodes())) return false;
  for (NodeId i = 0; i < a.size(); ++i) {
    for (NodeId j = i + 1; j < a.size(); ++j) {
      if (a.adjacent(i, j) != b.adjacent(i, j)) return false;
    }
  }
  return v_structures(a) == v_structures(b);
}

Cpdag cpdag_of(const Dag& dag) {
  Cpdag p(dag.labels());
  for (const auto& [a, b] : dag.edges()) p.set_undirected(a, b);
  for (const auto& v : v_structures(dag)) {
    p.set_directed(v.a, v.collider);
    p.set_directed(v.b, v.collider);
  }
  return meek_closure(p);
}

namespace {

// One sweep over all undirected edges; returns true if something got oriented.
bool meek_sweep(Cpdag& g) {
  const std::size_t n = g.size();
  bool changed = false;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = 0; b < n; ++b) {
      if (a == b || !g.is_undirected(a, b)) continue;
      bool orient = false;
      // R1: c->a, a-b, c and b non-adjacent  =>  a->b
      for (NodeId c = 0; c < n && !orient; ++c) {
        if (c != b && g.is_directed(c, a) && !g.adjacent(c, b)) orient = true;
      }
      // R2: a->c->b and a-b  =>  a->b
      for (NodeId c = 0; c < n && !orient; ++c) {
        if (g.is_directed(a, c) && g.is_directed(c, b)) orient = true;
      }
      // R3: a-c->b, a-d->b, c and d non-adjacent, a-b  =>  a->b
      for (NodeId c = 0; c < n && !orient; ++c) {
        if (!(g.is_undirected(a, c) && g.is_directed(c, b))) continue;
        for (NodeId d = c + 1; d < n && !orient; ++d) {
          if (g.is_undirected(a, d) && g.is_directed(d, b) && !g.adjacent(c, d)) orient = true;
        }
      }
      // R4: a-c->d->b, c and b non-adjacent, a adjacent to d, a-b  =>  a->b
      for (NodeId c = 0; c < n && !orient; ++c) {
        if (c == b || !g.is_undirected(a, c) || g.adjacent(c, b)) continue;
        for (NodeId d = 0; d < n && !orient; ++d) {
          if (g.is_directed(c, d) && g.is_directed(d, b) && g.adjacent(a, d)) orient = true;
        }
      }
      if (orient) {
        g.set_directed(a, b);
        changed = true;
      }
    }
  }
  return changed;
}

}  // namespace

Cpdag meek_closure(const Cpdag& pdag) {
  Cpdag g = pdag;
  while (meek_sweep(g)) {
  }
  return g;
}

Extension consistent_extension(const Cpdag& pdag) {
  const std::size_t n = pdag.size();
  Cpdag work = pdag;
  Dag out(pdag.labels());
  for (const auto& [a, b] : pdag.directed_edges()) out.add_edge_unchecked(a, b);

  std::vector<char> alive(n, 1);
  std::size_t remaining = n;
  bool fallback = false;
  while (remaining > 0) {
    std::optional<NodeId> pick;
    for (NodeId x = 0; x < n; ++x) {
      if (!alive[x]) continue;
      bool sink = true;
      for (NodeId y = 0; y < n && sink; ++y) {
        if (alive[y] && work.is_directed(x, y)) sink = false;
      }
      if (!sink) continue;
      bool ok = true;
      for (NodeId y = 0; y < n && ok; ++y) {
        if (!alive[y] || !work.is_undirected(x, y)) continue;
        for (NodeId z = 0; z < n && ok; ++z) {
          if (z == y || z == x || !alive[z] || !work.adjacent(x, z)) continue;
          if (!work.adjacent(y, z)) ok = false;
        }
      }
      if (ok && (!pick || pdag.label(x) > pdag.label(*pick))) pick = x;
    }
    if (!pick) {
      fallback = true;
      break;
    }
    const NodeId x = *pick;
    for (NodeId y = 0; y < n; ++y) {
      if (alive[y] && work.is_undirected(x, y)) out.add_edge_unchecked(y, x);
    }
    alive[x] = 0;
    --remaining;
  }

  if (fallback) {
    // Orient what is left along a label-ordered topological order of the
    // directed part, which cannot introduce a cycle.
    const auto order = kahn(n, pdag.labels(), [&](NodeId a, NodeId b) { return out.has_edge(a, b); });
    if (!order) throw ConfigError("consistent_extension", "directed part has a cycle");
    std::vector<std::size_t> pos(n);
    for (std::size_t k = 0; k < n; ++k) pos[(*order)[k]] = k;
    for (NodeId a = 0; a < n; ++a) {
      for (NodeId b = a + 1; b < n; ++b) {
        if (!alive[a] || !alive[b] || !work.is_undirected(a, b)) continue;
        if (pos[a] < pos[b]) out.add_edge_unchecked(a, b);
        else out.add_edge_unchecked(b, a);
      }
    }
  }
  return {std::move(out), fallback};
}

namespace {

int pair_status(const Cpdag& g, NodeId i, NodeId j) {
  if (g.is_undirected(i, j)) return 1;
  if (g.is_directed(i, j)) return 2;
  if (g.is_directed(j, i)) return 3;
  return 0;
}

void require_same_nodes(const Cpdag& a, const Cpdag& b) {
  if (!(a.nodes() == b.nodes())) throw ConfigError("shd", "graphs have different node sets");
}

}  // namespace

int shd(const Cpdag& a, const Cpdag& b) {
  require_same_nodes(a, b);
  int d = 0;
  for (NodeId i = 0; i < a.size(); ++i) {
    for (NodeId j = i + 1; j < a.size(); ++j) {
      if (pair_status(a, i, j) != pair_status(b, i, j)) ++d;
    }
  }
  return d;
}

int skeleton_shd(const Cpdag& a, const Cpdag& b) {
  require_same_nodes(a, b);
  int d = 0;
  for (NodeId i = 0; i < a.size(); ++i) {
    for (NodeId j = i + 1; j < a.size(); ++j) {
      if (a.adjacent(i, j) != b.adjacent(i, j)) ++d;
    }
  }
  return d;
}

EdgeList to_edge_list(const Dag& dag) {
  EdgeList out;
  for (const auto& [a, b] : dag.edges()) out.push_back({dag.labels()[a], dag.labels()[b], 1.0});
  return out;
}

Dag dag_from_edge_list(const std::vector<std::string>& labels, const EdgeList& edges) {
  Dag d(labels);
  for (const auto& e : edges) d.add_edge(d.nodes().index_of(e.source), d.nodes().index_of(e.target));
  return d;
}

std::string edge_list_to_text(const EdgeList& edges) {
  std::string out;
  char buf[64];
  for (const auto& e : edges) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.attribute);
    out += e.source + "\t" + e.target + "\t" + buf + "\n";
  }
  return out;
}

EdgeList edge_list_from_text(const std::string& text) {
  EdgeList out;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw SchemaError("edge_list", "line " + std::to_string(line_no) + ": expected src<TAB>dst<TAB>attr");
    }
    EdgeAttribute e;
    e.source = line.substr(0, t1);
    e.target = line.substr(t1 + 1, t2 - t1 - 1);
    try {
      e.attribute = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw SchemaError("edge_list", "line " + std::to_string(line_no) + ": bad attribute");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string cpdag_to_text(const Cpdag& pdag) {
  std::string out;
  for (const auto& [a, b] : pdag.directed_edges()) {
    out += pdag.labels()[a] + "\t" + pdag.labels()[b] + "\tdirected\n";
  }
  for (const auto& [a, b] : pdag.undirected_edges()) {
    out += pdag.labels()[a] + "\t" + pdag.labels()[b] + "\tundirected\n";
  }
  return out;
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

std::string role_style(const std::string& role) {
  if (role == "management") return " [shape=box, color=darkgreen]";
  if (role == "soil") return " [shape=ellipse, color=saddlebrown]";
  if (role == "target") return " [shape=doublecircle, color=black, style=bold]";
  if (role == "field") return " [shape=box, style=dashed, color=gray50]";
  if (role == "lag") return " [shape=note, color=gray40]";
  return "";
}

std::string dot_impl(const NodeSet& nodes, const std::vector<Edge>& directed, const std::vector<Edge>& undirected,
                     const std::map<std::string, std::string>& roles, const std::string& name) {
  std::string out = "digraph " + quoted(name) + " {\n";
  for (const auto& l : nodes.labels()) {
    auto it = roles.find(l);
    out += "  " + quoted(l) + (it == roles.end() ? std::string() : role_style(it->second)) + ";\n";
  }
  for (const auto& [a, b] : directed) out += "  " + quoted(nodes.label(a)) + " -> " + quoted(nodes.label(b)) + ";\n";
  for (const auto& [a, b] : undirected) {
    out += "  " + quoted(nodes.label(a)) + " -> " + quoted(nodes.label(b)) + " [dir=none];\n";
  }
  return out + "}\n";
}

}  // namespace

std::string to_dot(const Cpdag& pdag, const std::map<std::string, std::string>& roles, const std::string& name) {
  return dot_impl(pdag.nodes(), pdag.directed_edges(), pdag.undirected_edges(), roles, name);
}

std::string to_dot(const Dag& dag, const std::map<std::string, std::string>& roles, const std::string& name) {
  return dot_impl(dag.nodes(), dag.edges(), {}, roles, name);
}

}  // namespace causalsoil::graph
