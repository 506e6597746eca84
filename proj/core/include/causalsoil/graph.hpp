#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace causalsoil::graph {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

// Node labels with a dense adjacency matrix. Graphs in scope stay below a
// few hundred nodes, so O(n^2) storage is fine.
class NodeSet {
 public:
  NodeSet() = default;
  explicit NodeSet(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(NodeId i) const { return labels_.at(i); }
  NodeId index_of(std::string_view label) const;
  std::optional<NodeId> find(std::string_view label) const;

  friend bool operator==(const NodeSet&, const NodeSet&) = default;

 private:
  std::vector<std::string> labels_;
};

class Dag {
 public:
  Dag() = default;
  explicit Dag(std::vector<std::string> labels);
  // Throws ConfigError on self-loops, unknown labels or cycles.
  static Dag from_edges(std::vector<std::string> labels,
                        const std::vector<std::pair<std::string, std::string>>& edges);

  const NodeSet& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::string>& labels() const noexcept { return nodes_.labels(); }
  const std::string& label(NodeId i) const { return nodes_.label(i); }

  bool has_edge(NodeId from, NodeId to) const { return adj_[from * size() + to] != 0; }
  bool adjacent(NodeId a, NodeId b) const { return has_edge(a, b) || has_edge(b, a); }
  // Adds from->to; rejects self-loops and edges that would close a cycle.
  void add_edge(NodeId from, NodeId to);
  // Adds without the cycle check; callers restore acyclicity themselves.
  void add_edge_unchecked(NodeId from, NodeId to);
  void remove_edge(NodeId from, NodeId to);

  std::vector<NodeId> parents(NodeId node) const;
  std::vector<NodeId> children(NodeId node) const;
  // Sorted by (from, to).
  std::vector<Edge> edges() const;
  std::size_t edge_count() const;

  bool reaches(NodeId from, NodeId to) const;

  friend bool operator==(const Dag& a, const Dag& b) { return a.nodes_ == b.nodes_ && a.adj_ == b.adj_; }

 private:
  NodeSet nodes_;
  std::vector<unsigned char> adj_;
};

// Partially directed graph; directed and undirected edge sets are disjoint.
class Cpdag {
 public:
  Cpdag() = default;
  explicit Cpdag(std::vector<std::string> labels);
  static Cpdag from_dag(const Dag& dag);  // every edge directed

  const NodeSet& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::string>& labels() const noexcept { return nodes_.labels(); }
  const std::string& label(NodeId i) const { return nodes_.label(i); }

  bool is_directed(NodeId from, NodeId to) const { return dir_[from * size() + to] != 0; }
  bool is_undirected(NodeId a, NodeId b) const { return und_[a * size() + b] != 0; }
  bool adjacent(NodeId a, NodeId b) const {
    return is_directed(a, b) || is_directed(b, a) || is_undirected(a, b);
  }

  void set_directed(NodeId from, NodeId to);    // replaces any existing a-b edge
  void set_undirected(NodeId a, NodeId b);      // replaces any existing a-b edge
  void remove(NodeId a, NodeId b);

  std::vector<Edge> directed_edges() const;    // sorted (from, to)
  std::vector<Edge> undirected_edges() const;  // sorted, first < second
  std::size_t directed_count() const;
  std::size_t undirected_count() const;

  std::vector<NodeId> adjacent_nodes(NodeId node) const;

  // Throws ConfigError unless edge sets are disjoint, loop-free and the
  // directed part is acyclic.
  void validate() const;

  friend bool operator==(const Cpdag& a, const Cpdag& b) {
    return a.nodes_ == b.nodes_ && a.dir_ == b.dir_ && a.und_ == b.und_;
  }

 private:
  NodeSet nodes_;
  std::vector<unsigned char> dir_;
  std::vector<unsigned char> und_;
};

struct VStructure {
  NodeId a;
  NodeId collider;
  NodeId b;
  friend auto operator<=>(const VStructure&, const VStructure&) = default;
};

struct EdgeAttribute {
  std::string source;
  std::string target;
  double attribute = 1.0;
  friend bool operator==(const EdgeAttribute&, const EdgeAttribute&) = default;
};
using EdgeList = std::vector<EdgeAttribute>;

struct Extension {
  Dag dag;
  bool used_fallback = false;  // no consistent extension existed
};

bool is_acyclic(const Dag& dag);
bool is_acyclic(const Cpdag& pdag);  // directed part only
// Kahn's algorithm, ties broken by label order. Throws on a cycle.
std::vector<NodeId> topological_sort(const Dag& dag);
std::set<NodeId> ancestors(const Dag& dag, NodeId node);
std::set<NodeId> in_neighbors(const Dag& dag, NodeId node);

// Triples a->c<-b with a, b non-adjacent; a < b by node index.
std::vector<VStructure> v_structures(const Dag& dag);
bool markov_equivalent(const Dag& a, const Dag& b);

Cpdag cpdag_of(const Dag& dag);
// Meek rules R1-R4 applied to a fixed point.
Cpdag meek_closure(const Cpdag& pdag);
// Dor-Tarsi sink elimination; among candidate sinks the largest label is
// removed first, so an isolated undirected pair X-Y becomes X->Y.
Extension consistent_extension(const Cpdag& pdag);

// Pairs whose status (absent / undirected / directed with direction) differs.
int shd(const Cpdag& a, const Cpdag& b);
// Pairs whose adjacency differs, ignoring orientation.
int skeleton_shd(const Cpdag& a, const Cpdag& b);

// Returns a DAG with the same nodes whose edges are given by label pairs.
EdgeList to_edge_list(const Dag& dag);
Dag dag_from_edge_list(const std::vector<std::string>& labels, const EdgeList& edges);

// "src<TAB>dst<TAB>attr" per line.
std::string edge_list_to_text(const EdgeList& edges);
EdgeList edge_list_from_text(const std::string& text);

// "a<TAB>b<TAB>directed|undirected" per line.
std::string cpdag_to_text(const Cpdag& pdag);

// Deterministic DOT digraph; undirected edges use dir=none. `roles` maps a
// node label to management / soil / target / field / lag for styling.
std::string to_dot(const Cpdag& pdag, const std::map<std::string, std::string>& roles = {},
                   const std::string& name = "G");
std::string to_dot(const Dag& dag, const std::map<std::string, std::string>& roles = {},
                   const std::string& name = "G");

}  // namespace causalsoil::graph
