#pragma once

#include <string>
#include <vector>

#include "bridgesentry/types.hpp"
#include "bridgesentry/xbhg.hpp"

namespace bridgesentry::metapath {

// A sequence of node-type symbols, e.g. "URT". Instances are directed walks
// (vertices may repeat, edges of any type) whose node types match.
struct MetaPath {
  std::vector<NodeType> seq;

  MetaPath() = default;
  explicit MetaPath(std::vector<NodeType> s) : seq(std::move(s)) {}
  static MetaPath from_string(const std::string& symbols);

  std::size_t length() const { return seq.size(); }
  std::string str() const;

  bool operator==(const MetaPath&) const = default;
  auto operator<=>(const MetaPath&) const = default;
};

inline const std::vector<NodeType>& default_node_types() {
  static const std::vector<NodeType> types = {NodeType::User,  NodeType::Router,
                                              NodeType::Token, NodeType::Other,
                                              NodeType::Log,   NodeType::Relay};
  return types;
}

// All |types|^l sequences of length l, in lexicographic order of the given
// type ordering. l < 2 is rejected: only two nodes can form an edge.
std::vector<MetaPath> enumerate_metapaths(int l, const std::vector<NodeType>& types);

// True iff the graph contains a directed walk whose node types equal seq.
bool contains_instance(const xbhg::XbhgGraph& graph, const MetaPath& path);

// Number of matching walks, counted with multiplicity.
double count_instances(const xbhg::XbhgGraph& graph, const MetaPath& path);

// Terminal vertices of all matching walks starting at `node`, plus the node
// itself. If the node's type differs from the first symbol the result is
// just {node}.
std::vector<int> metapath_neighbors(const xbhg::XbhgGraph& graph, const MetaPath& path,
                                    int node);

// Nontrivial neighbor rows of one (graph, path): nodes whose neighbor set
// exceeds {self}. One layered bitset sweep serves every start node.
struct PathNeighborRows {
  std::vector<std::pair<int, std::vector<int>>> rows;
  bool empty() const { return rows.empty(); }
};
PathNeighborRows neighbor_rows(const xbhg::XbhgGraph& graph, const MetaPath& path);

enum class FreqMode {
  Indicator,  // per-graph 0/1 occurrence
  MeanCount,  // instances counted with multiplicity (fre_diff may exceed 1)
};

struct PathStats {
  MetaPath path;
  double count_attack = 0.0;
  double count_normal = 0.0;
  double fre_attack = 0.0;
  double fre_normal = 0.0;
  double fre_diff = 0.0;
};

struct FreqTable {
  std::vector<PathStats> stats;
  std::size_t n_attack = 0;
  std::size_t n_normal = 0;
  FreqMode mode = FreqMode::Indicator;
};

// Label-conditional occurrence frequencies over a labeled corpus. The three
// attack classes are pooled into one attack bucket. Requires at least one
// graph on each side.
FreqTable label_frequencies(const std::vector<const xbhg::XbhgGraph*>& graphs,
                            const std::vector<MetaPath>& paths,
                            FreqMode mode = FreqMode::Indicator);

struct SelectionResult {
  std::vector<PathStats> selected;
  bool fell_back = false;

  std::vector<MetaPath> paths() const;
};

// Paths with fre_diff > theta, sorted by fre_diff descending (ties broken
// lexicographically). An empty result falls back to all table paths, with
// the fallback flagged.
SelectionResult select_differential(const FreqTable& table, double theta);

struct MinedSelection {
  double theta = 0.0;
  FreqMode mode = FreqMode::Indicator;
  int lmin = 2;
  int lmax = 4;
  std::size_t n_attack = 0;
  std::size_t n_normal = 0;
  bool fell_back = false;
  std::vector<PathStats> selected;
};

std::string serialize_selection(const MinedSelection& sel);
MinedSelection parse_selection(const std::string& json_text);
MinedSelection load_selection(const std::string& path);
void save_selection(const MinedSelection& sel, const std::string& path);

}  // namespace bridgesentry::metapath
