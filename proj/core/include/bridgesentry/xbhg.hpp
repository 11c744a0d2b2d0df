#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bridgesentry/ingest.hpp"
#include "bridgesentry/types.hpp"

namespace bridgesentry::xbhg {

struct Node {
  int id = 0;
  NodeType ntype = NodeType::Other;
  Side side = Side::Source;
  std::vector<double> features;
  // Function/event text attached to the node (log payloads, callee function
  // lists). Feeds init_features; not part of the serialized graph.
  std::string text;
};

struct Edge {
  int src = 0;
  int dst = 0;
  EdgeType etype = EdgeType::Call;
  bool operator==(const Edge&) const = default;
};

// Typed directed multigraph of one cross-chain behavior. Node ids are dense
// 0..N-1; parallel edges are kept (repetition is a signal).
struct XbhgGraph {
  std::string graph_id;
  Label label = Label::Unlabeled;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

struct FeatureConfig {
  int text_dim = 64;
  bool use_external_embeddings = false;
  std::optional<std::string> external_path;
  int common_dim = 64;  // alignment target dimension d
};

struct BuildResult {
  XbhgGraph graph;
  std::vector<std::string> warnings;
};

// Builds the heterogeneous behavior graph: one account node per distinct
// (side, address), one log node per log entry, a single relay node when both
// sides are present, and the six edge construction rules.
BuildResult build_graph(const ingest::CrossChainBehavior& behavior,
                        const ingest::BridgeConfig& config);

// Deterministic token-level signed feature hashing into `dim` buckets,
// L2-normalized. Empty text maps to the zero vector.
std::vector<double> embed_text(const std::string& text, int dim);

// Text -> precomputed vector table, imported from a JSON file. Missing
// entries fall back to the hashed embedder at the same dimension.
struct ExternalEmbeddings {
  int dim = 0;
  std::vector<std::pair<std::string, std::vector<double>>> entries;

  static ExternalEmbeddings load(const std::string& path);
  const std::vector<double>* find(const std::string& text) const;
};

// Populates raw node features: [log1p(out_degree), log1p(in_degree)] ++ text
// block (hashed or external embedding for nodes carrying text, zeros
// otherwise). Feature length is 2 + text_dim for every node type.
void init_features(XbhgGraph& graph, const FeatureConfig& config,
                   const ExternalEmbeddings* external = nullptr);

// Checks structural invariants; throws DataError naming the first violation.
void validate(const XbhgGraph& graph);

std::string serialize_graph(const XbhgGraph& graph);
XbhgGraph parse_graph(const std::string& json_text);
XbhgGraph load_graph(const std::string& path);
void save_graph(const XbhgGraph& graph, const std::string& path);

std::vector<int> out_degrees(const XbhgGraph& graph);
std::vector<int> in_degrees(const XbhgGraph& graph);

}  // namespace bridgesentry::xbhg
