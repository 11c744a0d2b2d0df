#include "bridgesentry/xbhg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bridgesentry::xbhg {

using nlohmann::json;
using ingest::CrossChainBehavior;
using ingest::TransactionRecord;

namespace {

struct GraphBuilder {
  XbhgGraph graph;
  std::vector<std::string> warnings;
  std::map<std::pair<Side, std::string>, int> account_ids;

  int account_node(Side side, const std::string& addr, NodeType ntype) {
    const auto key = std::make_pair(side, addr);
    const auto it = account_ids.find(key);
    if (it != account_ids.end()) return it->second;
    const int id = graph.num_nodes();
    graph.nodes.push_back({id, ntype, side, {}, {}});
    account_ids.emplace(key, id);
    return id;
  }

  int log_node(Side side, const ingest::LogEntry& log) {
    const int id = graph.num_nodes();
    std::string text = log.event_name;
    if (!log.param_text.empty()) {
      if (!text.empty()) text += ' ';
      text += log.param_text;
    }
    graph.nodes.push_back({id, NodeType::Log, side, {}, std::move(text)});
    return id;
  }

  void edge(int src, int dst, EdgeType etype) { graph.edges.push_back({src, dst, etype}); }
};

void add_side(GraphBuilder& builder, Side side, const TransactionRecord& tx,
              const ingest::BridgeConfig& config) {
  const std::set<ingest::BridgeConfig::ChainAddr> initiators = {{tx.chain_id, tx.from_addr}};
  auto type_of = [&](const std::string& addr) {
    return ingest::classify_address(tx.chain_id, addr, config, initiators);
  };
  auto node = [&](const std::string& addr) {
    return builder.account_node(side, addr, type_of(addr));
  };

  // Node ids follow first-mention order; sequence the lookups explicitly.
  const int tx_from = node(tx.from_addr);
  const int tx_to = node(tx.to_addr);
  builder.edge(tx_from, tx_to, EdgeType::Transaction);
  for (const auto& call : tx.calls) {
    const int caller = node(call.caller);
    const int callee = node(call.callee);
    builder.edge(caller, callee, EdgeType::Call);
    auto& text = builder.graph.nodes[static_cast<std::size_t>(callee)].text;
    if (!call.function_name.empty()) {
      if (!text.empty()) text += ' ';
      text += call.function_name;
    }
  }
  for (const auto& log : tx.logs) {
    const int emitter = node(log.emitter);
    builder.edge(emitter, builder.log_node(side, log), EdgeType::LogRecord);
  }
  for (const auto& transfer : tx.transfers) {
    const int from = node(transfer.from);
    const int to = node(transfer.to);
    builder.edge(from, to, EdgeType::Transfer);
  }
  for (const auto& approval : tx.approvals) {
    // Authorized -> authorizing, i.e. spender -> owner.
    const int spender = node(approval.spender);
    const int owner = node(approval.owner);
    builder.edge(spender, owner, EdgeType::Authorization);
  }
}

// First router node on the given side, in node insertion order.
std::optional<int> find_router(const XbhgGraph& graph, Side side) {
  for (const auto& node : graph.nodes) {
    if (node.side == side && node.ntype == NodeType::Router) return node.id;
  }
  return std::nullopt;
}

}  // namespace

BuildResult build_graph(const CrossChainBehavior& behavior, const ingest::BridgeConfig& config) {
  if (!behavior.source_tx && !behavior.dest_tx) {
    throw DataError("behavior " + behavior.behavior_id + " has no transactions");
  }
  ingest::validate_bridge_config(config);

  GraphBuilder builder;
  builder.graph.graph_id = behavior.behavior_id;
  builder.graph.label = behavior.label;

  if (behavior.source_tx) add_side(builder, Side::Source, *behavior.source_tx, config);
  if (behavior.dest_tx) add_side(builder, Side::Dest, *behavior.dest_tx, config);

  if (behavior.source_tx && behavior.dest_tx) {
    const auto src_router = find_router(builder.graph, Side::Source);
    const auto dst_router = find_router(builder.graph, Side::Dest);
    if (!src_router) {
      builder.warnings.push_back("behavior " + behavior.behavior_id +
                                 ": no router on source side, E_d omitted");
    }
    if (!dst_router) {
      builder.warnings.push_back("behavior " + behavior.behavior_id +
                                 ": no router on dest side, E_d omitted");
    }
    if (src_router || dst_router) {
      const int relay = builder.graph.num_nodes();
      builder.graph.nodes.push_back({relay, NodeType::Relay, Side::Offchain, {}, {}});
      if (src_router) builder.edge(*src_router, relay, EdgeType::CrossChain);
      if (dst_router) builder.edge(relay, *dst_router, EdgeType::CrossChain);
    }
  }
  return {std::move(builder.graph), std::move(builder.warnings)};
}

namespace {

std::uint64_t fnv1a(const char* data, std::size_t len, std::uint64_t h = 1469598103934665603ULL) {
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<double> embed_text(const std::string& text, int dim) {
  if (dim < 1) throw DataError("embed_text: dim must be >= 1");
  std::vector<double> vec(static_cast<std::size_t>(dim), 0.0);

  // Signed counts of FNV-1a-hashed alphanumeric tokens; platform-independent
  // by construction. Low bits pick the bucket, bit 63 the sign.
  std::size_t pos = 0;
  const auto is_token_char = [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
  };
  bool any = false;
  while (pos < text.size()) {
    while (pos < text.size() && !is_token_char(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::size_t begin = pos;
    while (pos < text.size() && is_token_char(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == begin) continue;
    any = true;
    const std::uint64_t h = fnv1a(text.data() + begin, pos - begin);
    const std::size_t bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    vec[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  if (!any) return vec;

  // Two whole-string components with magnitudes keyed to the full 64-bit
  // hash. Token counts are integers and the magnitude ratio is
  // string-specific, so distinct texts keep distinct directions short of a
  // full hash collision.
  const std::uint64_t h = fnv1a(text.data(), text.size());
  const double magnitude = 0.5 + static_cast<double>(h >> 11) * 0x1.0p-54;
  vec[(h >> 7) % static_cast<std::uint64_t>(dim)] += (h >> 63) ? -magnitude : magnitude;
  vec[(h >> 13) % static_cast<std::uint64_t>(dim)] += magnitude * magnitude;

  double norm = 0.0;
  for (const double v : vec) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : vec) v /= norm;
  }
  return vec;
}

ExternalEmbeddings ExternalEmbeddings::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  json j = json::parse(in);
  ExternalEmbeddings table;
  table.dim = j.at("dim").get<int>();
  if (table.dim < 1) throw DataError("embeddings file: dim must be >= 1");
  for (const auto& [text, arr] : j.at("vectors").items()) {
    std::vector<double> vec = arr.get<std::vector<double>>();
    if (static_cast<int>(vec.size()) != table.dim) {
      throw DataError("embeddings file: vector for \"" + text + "\" has wrong length");
    }
    table.entries.emplace_back(text, std::move(vec));
  }
  std::sort(table.entries.begin(), table.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return table;
}

const std::vector<double>* ExternalEmbeddings::find(const std::string& text) const {
  const auto it = std::lower_bound(
      entries.begin(), entries.end(), text,
      [](const auto& entry, const std::string& key) { return entry.first < key; });
  if (it != entries.end() && it->first == text) return &it->second;
  return nullptr;
}

std::vector<int> out_degrees(const XbhgGraph& graph) {
  std::vector<int> deg(graph.nodes.size(), 0);
  for (const auto& e : graph.edges) ++deg[static_cast<std::size_t>(e.src)];
  return deg;
}

std::vector<int> in_degrees(const XbhgGraph& graph) {
  std::vector<int> deg(graph.nodes.size(), 0);
  for (const auto& e : graph.edges) ++deg[static_cast<std::size_t>(e.dst)];
  return deg;
}

void init_features(XbhgGraph& graph, const FeatureConfig& config,
                   const ExternalEmbeddings* external) {
  if (config.text_dim < 1) throw DataError("init_features: text_dim must be >= 1");
  if (config.use_external_embeddings && external && external->dim != config.text_dim) {
    throw DataError("external embedding dim " + std::to_string(external->dim) +
                    " does not match text_dim " + std::to_string(config.text_dim));
  }
  const auto out_deg = out_degrees(graph);
  const auto in_deg = in_degrees(graph);

  for (auto& node : graph.nodes) {
    node.features.assign(2 + static_cast<std::size_t>(config.text_dim), 0.0);
    node.features[0] = std::log1p(static_cast<double>(out_deg[static_cast<std::size_t>(node.id)]));
    node.features[1] = std::log1p(static_cast<double>(in_deg[static_cast<std::size_t>(node.id)]));
    if (node.text.empty()) continue;
    const std::vector<double>* vec = nullptr;
    if (config.use_external_embeddings && external) vec = external->find(node.text);
    std::vector<double> hashed;
    if (!vec) {
      hashed = embed_text(node.text, config.text_dim);
      vec = &hashed;
    }
    std::copy(vec->begin(), vec->end(), node.features.begin() + 2);
  }
}

void validate(const XbhgGraph& graph) {
  const int n = graph.num_nodes();
  for (int i = 0; i < n; ++i) {
    if (graph.nodes[static_cast<std::size_t>(i)].id != i) {
      throw DataError("graph " + graph.graph_id + ": node ids not dense at position " +
                      std::to_string(i));
    }
  }
  int relay_count = 0;
  for (const auto& node : graph.nodes) {
    if (node.ntype == NodeType::Relay) ++relay_count;
  }
  if (relay_count > 1) {
    throw DataError("graph " + graph.graph_id + ": more than one relay node");
  }
  std::vector<int> log_in(graph.nodes.size(), 0);
  std::vector<int> log_out(graph.nodes.size(), 0);
  for (const auto& e : graph.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      throw DataError("graph " + graph.graph_id + ": edge endpoint out of range");
    }
    const NodeType st = graph.nodes[static_cast<std::size_t>(e.src)].ntype;
    const NodeType dt = graph.nodes[static_cast<std::size_t>(e.dst)].ntype;
    if (e.etype == EdgeType::LogRecord && dt != NodeType::Log) {
      throw DataError("graph " + graph.graph_id + ": E_e edge not terminating at a log node");
    }
    if (e.etype == EdgeType::CrossChain) {
      const bool ok = (st == NodeType::Router && dt == NodeType::Relay) ||
                      (st == NodeType::Relay && dt == NodeType::Router);
      if (!ok) throw DataError("graph " + graph.graph_id + ": E_d edge must connect router and relay");
    }
    if (st == NodeType::Log) ++log_out[static_cast<std::size_t>(e.src)];
    if (dt == NodeType::Log) ++log_in[static_cast<std::size_t>(e.dst)];
  }
  for (const auto& node : graph.nodes) {
    if (node.ntype != NodeType::Log) continue;
    if (log_out[static_cast<std::size_t>(node.id)] != 0) {
      throw DataError("graph " + graph.graph_id + ": log node " + std::to_string(node.id) +
                      " has outgoing edges");
    }
    if (log_in[static_cast<std::size_t>(node.id)] < 1) {
      throw DataError("graph " + graph.graph_id + ": log node " + std::to_string(node.id) +
                      " has no incoming E_e edge");
    }
  }
}

std::string serialize_graph(const XbhgGraph& graph) {
  json nodes = json::array();
  for (const auto& node : graph.nodes) {
    nodes.push_back({{"id", node.id},
                     {"ntype", std::string(1, node_type_symbol(node.ntype))},
                     {"side", side_name(node.side)},
                     {"features", node.features}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"etype", edge_type_name(e.etype)}});
  }
  const json j = {{"version", 1},
                  {"graph_id", graph.graph_id},
                  {"label", label_name(graph.label)},
                  {"nodes", nodes},
                  {"edges", edges}};
  return j.dump();
}

XbhgGraph parse_graph(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("version").get<int>() != 1) {
    throw DataError("graph file: unsupported version " + j.at("version").dump());
  }
  XbhgGraph graph;
  graph.graph_id = j.at("graph_id").get<std::string>();
  graph.label = label_from_name(j.at("label").get<std::string>());
  for (const auto& nj : j.at("nodes")) {
    Node node;
    node.id = nj.at("id").get<int>();
    const std::string sym = nj.at("ntype").get<std::string>();
    if (sym.size() != 1) throw DataError("graph file: ntype must be one symbol");
    node.ntype = node_type_from_symbol(sym[0]);
    node.side = side_from_name(nj.at("side").get<std::string>());
    node.features = nj.at("features").get<std::vector<double>>();
    graph.nodes.push_back(std::move(node));
  }
  for (const auto& ej : j.at("edges")) {
    graph.edges.push_back({ej.at("src").get<int>(), ej.at("dst").get<int>(),
                           edge_type_from_name(ej.at("etype").get<std::string>())});
  }
  validate(graph);
  return graph;
}

XbhgGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open graph file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_graph(text.str());
}

void save_graph(const XbhgGraph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write graph file: " + path);
  out << serialize_graph(graph) << '\n';
  if (!out) throw DataError("I/O failure writing: " + path);
}

}  // namespace bridgesentry::xbhg
