#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "test_support.hpp"

using namespace bridgesentry;
using namespace bridgesentry::xbhg;

namespace {

ingest::BridgeConfig two_chain_config() {
  ingest::BridgeConfig config;
  config.router_addrs = {{"ethereum", "0xrsrc"}, {"bsc", "0xrdst"}};
  config.token_addrs = {{"ethereum", "0xtsrc"}, {"bsc", "0xtdst"}};
  return config;
}

ingest::CrossChainBehavior matched_pair() {
  ingest::CrossChainBehavior behavior;
  behavior.behavior_id = "b1";
  behavior.label = Label::Normal;
  ingest::TransactionRecord src;
  src.tx_hash = "0x1";
  src.chain_id = "ethereum";
  src.from_addr = "0xuser";
  src.to_addr = "0xrsrc";
  src.calls.push_back({"0xuser", "0xrsrc", "deposit(address,uint256)", ""});
  src.calls.push_back({"0xrsrc", "0xtsrc", "lockTokens(address,uint256)", ""});
  src.logs.push_back({"0xtsrc", "Lock(address,uint256)", "0xuser"});
  behavior.source_tx = src;
  ingest::TransactionRecord dst;
  dst.tx_hash = "0x2";
  dst.chain_id = "bsc";
  dst.from_addr = "0xop";
  dst.to_addr = "0xrdst";
  dst.calls.push_back({"0xrdst", "0xtdst", "mint(address,uint256)", ""});
  dst.transfers.push_back({"0xtdst", "0xuser", "0xtdst", "5"});
  behavior.dest_tx = dst;
  return behavior;
}

// Multiset fingerprints for isomorphism-up-to-relabeling comparison: node
// records and edge records keyed by endpoint signatures.
using NodeSig = std::tuple<NodeType, Side, std::vector<double>>;

NodeSig node_sig(const Node& n) { return {n.ntype, n.side, n.features}; }

std::multiset<NodeSig> node_multiset(const XbhgGraph& g) {
  std::multiset<NodeSig> out;
  for (const auto& n : g.nodes) out.insert(node_sig(n));
  return out;
}

std::multiset<std::tuple<EdgeType, NodeSig, NodeSig>> edge_multiset(const XbhgGraph& g) {
  std::multiset<std::tuple<EdgeType, NodeSig, NodeSig>> out;
  for (const auto& e : g.edges) {
    out.insert({e.etype, node_sig(g.nodes[static_cast<std::size_t>(e.src)]),
                node_sig(g.nodes[static_cast<std::size_t>(e.dst)])});
  }
  return out;
}

}  // namespace

TEST_CASE("build_graph: single source call gives two nodes, one E_t and one E_c") {
  ingest::CrossChainBehavior behavior;
  behavior.behavior_id = "solo";
  ingest::TransactionRecord tx;
  tx.tx_hash = "0x1";
  tx.chain_id = "ethereum";
  tx.from_addr = "0xa";
  tx.to_addr = "0xb";
  tx.calls.push_back({"0xa", "0xb", "doit()", ""});
  behavior.source_tx = tx;

  const BuildResult built = build_graph(behavior, two_chain_config());
  const XbhgGraph& g = built.graph;
  REQUIRE(g.num_nodes() == 2);
  CHECK(g.nodes[0].ntype == NodeType::User);   // tx initiator
  CHECK(g.nodes[1].ntype == NodeType::Other);  // unmarked callee
  REQUIRE(g.num_edges() == 2);
  std::multiset<EdgeType> etypes;
  for (const auto& e : g.edges) {
    CHECK(e.src == 0);
    CHECK(e.dst == 1);
    etypes.insert(e.etype);
  }
  CHECK(etypes == std::multiset<EdgeType>{EdgeType::Transaction, EdgeType::Call});
  // No relay on a single-sided behavior.
  for (const auto& n : g.nodes) CHECK(n.ntype != NodeType::Relay);
}

TEST_CASE("build_graph: matched pair with routers on both sides gets one relay node") {
  const BuildResult built = build_graph(matched_pair(), two_chain_config());
  const XbhgGraph& g = built.graph;
  CHECK(built.warnings.empty());

  int relay_id = -1;
  int relay_count = 0;
  for (const auto& n : g.nodes) {
    if (n.ntype == NodeType::Relay) {
      relay_id = n.id;
      ++relay_count;
      CHECK(n.side == Side::Offchain);
    }
  }
  REQUIRE(relay_count == 1);
  int in_deg = 0, out_deg = 0;
  for (const auto& e : g.edges) {
    if (e.dst == relay_id) {
      ++in_deg;
      CHECK(e.etype == EdgeType::CrossChain);
      CHECK(g.nodes[static_cast<std::size_t>(e.src)].ntype == NodeType::Router);
      CHECK(g.nodes[static_cast<std::size_t>(e.src)].side == Side::Source);
    }
    if (e.src == relay_id) {
      ++out_deg;
      CHECK(e.etype == EdgeType::CrossChain);
      CHECK(g.nodes[static_cast<std::size_t>(e.dst)].ntype == NodeType::Router);
      CHECK(g.nodes[static_cast<std::size_t>(e.dst)].side == Side::Dest);
    }
  }
  CHECK(in_deg == 1);
  CHECK(out_deg == 1);
  CHECK_NOTHROW(validate(g));
}

TEST_CASE("build_graph: empty behavior is an error") {
  ingest::CrossChainBehavior behavior;
  behavior.behavior_id = "empty";
  CHECK_THROWS_AS(build_graph(behavior, two_chain_config()), DataError);
}

TEST_CASE("build_graph: missing router on one side omits that E_d with a warning") {
  ingest::CrossChainBehavior behavior = matched_pair();
  behavior.dest_tx->to_addr = "0xnotrouter";
  behavior.dest_tx->calls.clear();
  behavior.dest_tx->transfers.clear();
  const BuildResult built = build_graph(behavior, two_chain_config());
  REQUIRE(built.warnings.size() == 1);
  int relay_out = 0, relay_in = 0;
  for (const auto& e : built.graph.edges) {
    if (e.etype != EdgeType::CrossChain) continue;
    if (built.graph.nodes[static_cast<std::size_t>(e.src)].ntype == NodeType::Relay) ++relay_out;
    if (built.graph.nodes[static_cast<std::size_t>(e.dst)].ntype == NodeType::Relay) ++relay_in;
  }
  CHECK(relay_in == 1);
  CHECK(relay_out == 0);
}

TEST_CASE("build_graph: approvals go spender to owner") {
  ingest::CrossChainBehavior behavior;
  behavior.behavior_id = "appr";
  ingest::TransactionRecord tx;
  tx.tx_hash = "0x1";
  tx.chain_id = "ethereum";
  tx.from_addr = "0xowner";
  tx.to_addr = "0xrsrc";
  tx.approvals.push_back({"0xowner", "0xrsrc", "0xtsrc"});
  behavior.source_tx = tx;
  const XbhgGraph g = build_graph(behavior, two_chain_config()).graph;
  bool found = false;
  for (const auto& e : g.edges) {
    if (e.etype != EdgeType::Authorization) continue;
    found = true;
    CHECK(g.nodes[static_cast<std::size_t>(e.src)].ntype == NodeType::Router);  // spender
    CHECK(g.nodes[static_cast<std::size_t>(e.dst)].ntype == NodeType::User);    // owner
  }
  CHECK(found);
}

TEST_CASE("build_graph is permutation-invariant up to relabeling") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    ingest::CrossChainBehavior behavior = matched_pair();
    auto& src = *behavior.source_tx;
    for (int i = 0; i < 3; ++i) {
      src.calls.push_back({"0xa" + std::to_string(rng.below(3)),
                           "0xb" + std::to_string(rng.below(3)), "f()", ""});
      src.logs.push_back({"0xa" + std::to_string(rng.below(3)), "E(uint256)", ""});
      src.transfers.push_back({"0xa" + std::to_string(rng.below(3)), "0xc", "0xt", "1"});
    }
    ingest::CrossChainBehavior shuffled = behavior;
    rng.shuffle(shuffled.source_tx->calls);
    rng.shuffle(shuffled.source_tx->logs);
    rng.shuffle(shuffled.source_tx->transfers);

    xbhg::FeatureConfig fc;
    fc.text_dim = 8;
    XbhgGraph a = build_graph(behavior, two_chain_config()).graph;
    XbhgGraph b = build_graph(shuffled, two_chain_config()).graph;
    init_features(a, fc);
    init_features(b, fc);
    CHECK(node_multiset(a) == node_multiset(b));
    CHECK(edge_multiset(a) == edge_multiset(b));
  }
}

TEST_CASE("embed_text: empty text maps to the zero vector") {
  const auto v = embed_text("", 64);
  REQUIRE(v.size() == 64);
  for (const double x : v) CHECK(x == 0.0);
  // Token-free text too.
  const auto w = embed_text("()[]., ", 8);
  for (const double x : w) CHECK(x == 0.0);
}

TEST_CASE("embed_text: deterministic and L2-normalized") {
  const auto a = embed_text("transfer(address,uint256)", 64);
  const auto b = embed_text("transfer(address,uint256)", 64);
  CHECK(a == b);
  double norm = 0.0;
  for (const double x : a) norm += x * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("embed_text: no collisions over a 1000-string corpus") {
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::string sig = "func" + std::to_string(i) + "(address,uint" +
                            std::to_string(8 * (i % 32 + 1)) + ")";
    const auto [it, inserted] = seen.insert(embed_text(sig, 64));
    CHECK(inserted);
  }
}

TEST_CASE("init_features: degree block and text block") {
  XbhgGraph g;
  g.graph_id = "f";
  g.nodes.push_back({0, NodeType::User, Side::Source, {}, ""});
  g.nodes.push_back({1, NodeType::Other, Side::Source, {}, ""});
  g.nodes.push_back({2, NodeType::Log, Side::Source, {}, "Deposit(address,uint256)"});
  g.edges.push_back({0, 1, EdgeType::Call});
  g.edges.push_back({1, 2, EdgeType::LogRecord});

  FeatureConfig fc;
  fc.text_dim = 16;
  init_features(g, fc);

  // Node 0: out-degree 1, in-degree 0, no text.
  REQUIRE(g.nodes[0].features.size() == 18);
  CHECK(g.nodes[0].features[0] == doctest::Approx(std::log(2.0)));
  CHECK(g.nodes[0].features[1] == 0.0);
  for (std::size_t i = 2; i < 18; ++i) CHECK(g.nodes[0].features[i] == 0.0);

  // Log node: degree block plus embed_text of the event string.
  const auto expected = embed_text("Deposit(address,uint256)", 16);
  CHECK(g.nodes[2].features[0] == 0.0);
  CHECK(g.nodes[2].features[1] == doctest::Approx(std::log(2.0)));
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(g.nodes[2].features[2 + i] == doctest::Approx(expected[i]));
  }
}

TEST_CASE("init_features: isolated node gets the all-zero vector") {
  XbhgGraph g;
  g.nodes.push_back({0, NodeType::Other, Side::Source, {}, ""});
  FeatureConfig fc;
  fc.text_dim = 4;
  init_features(g, fc);
  CHECK(g.nodes[0].features == std::vector<double>(6, 0.0));
}

TEST_CASE("init_features: callee nodes embed their accumulated function list") {
  ingest::CrossChainBehavior behavior;
  behavior.behavior_id = "callee";
  ingest::TransactionRecord tx;
  tx.tx_hash = "0x1";
  tx.chain_id = "ethereum";
  tx.from_addr = "0xa";
  tx.to_addr = "0xb";
  tx.calls.push_back({"0xa", "0xb", "first()", ""});
  tx.calls.push_back({"0xa", "0xb", "second(uint256)", ""});
  behavior.source_tx = tx;
  XbhgGraph g = build_graph(behavior, two_chain_config()).graph;
  FeatureConfig fc;
  fc.text_dim = 8;
  init_features(g, fc);
  const auto expected = embed_text("first() second(uint256)", 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(g.nodes[1].features[2 + i] == doctest::Approx(expected[i]));
  }
}

TEST_CASE("degree sums equal edge count on random graphs") {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const XbhgGraph g = testsupport::random_graph(rng, 12, 30, 0);
    const auto out = out_degrees(g);
    const auto in = in_degrees(g);
    int out_sum = 0, in_sum = 0;
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
      out_sum += out[v];
      in_sum += in[v];
    }
    CHECK(out_sum == g.num_edges());
    CHECK(in_sum == g.num_edges());
  }
}

TEST_CASE("parallel edges are kept and counted in degrees") {
  ingest::CrossChainBehavior behavior;
  behavior.behavior_id = "dup";
  ingest::TransactionRecord tx;
  tx.tx_hash = "0x1";
  tx.chain_id = "ethereum";
  tx.from_addr = "0xa";
  tx.to_addr = "0xb";
  tx.calls.push_back({"0xa", "0xb", "reenter()", ""});
  tx.calls.push_back({"0xa", "0xb", "reenter()", ""});
  behavior.source_tx = tx;
  XbhgGraph g = build_graph(behavior, two_chain_config()).graph;
  CHECK(g.num_edges() == 3);  // E_t + two identical E_c
  FeatureConfig fc;
  fc.text_dim = 4;
  init_features(g, fc);
  CHECK(g.nodes[0].features[0] == doctest::Approx(std::log(4.0)));  // out-degree 3
}

TEST_CASE("graph serialization round-trip is exact") {
  const ingest::CrossChainBehavior behavior = matched_pair();
  XbhgGraph g = build_graph(behavior, two_chain_config()).graph;
  FeatureConfig fc;
  fc.text_dim = 16;
  init_features(g, fc);

  const std::string text = serialize_graph(g);
  const XbhgGraph back = parse_graph(text);
  CHECK(serialize_graph(back) == text);
  CHECK(back.graph_id == g.graph_id);
  CHECK(back.label == g.label);
  REQUIRE(back.num_nodes() == g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    CHECK(back.nodes[iu].ntype == g.nodes[iu].ntype);
    CHECK(back.nodes[iu].side == g.nodes[iu].side);
    CHECK(back.nodes[iu].features == g.nodes[iu].features);
  }
  CHECK(back.edges == g.edges);
}

TEST_CASE("validate rejects structural violations") {
  XbhgGraph g;
  g.graph_id = "bad";
  g.nodes.push_back({0, NodeType::User, Side::Source, {}, ""});
  g.nodes.push_back({1, NodeType::Log, Side::Source, {}, ""});

  SUBCASE("E_e must terminate at a log node") {
    g.edges.push_back({1, 0, EdgeType::LogRecord});
    CHECK_THROWS_AS(validate(g), DataError);
  }
  SUBCASE("log nodes need an incoming E_e") {
    CHECK_THROWS_AS(validate(g), DataError);
  }
  SUBCASE("log nodes must not have outgoing edges") {
    g.edges.push_back({0, 1, EdgeType::LogRecord});
    g.edges.push_back({1, 0, EdgeType::Call});
    CHECK_THROWS_AS(validate(g), DataError);
  }
  SUBCASE("E_d must connect router and relay") {
    g.edges.push_back({0, 1, EdgeType::LogRecord});
    g.edges.push_back({0, 0, EdgeType::CrossChain});
    CHECK_THROWS_AS(validate(g), DataError);
  }
  SUBCASE("at most one relay node") {
    g.edges.push_back({0, 1, EdgeType::LogRecord});
    g.nodes.push_back({2, NodeType::Relay, Side::Offchain, {}, ""});
    g.nodes.push_back({3, NodeType::Relay, Side::Offchain, {}, ""});
    CHECK_THROWS_AS(validate(g), DataError);
  }
}

TEST_CASE("external embeddings override the hashed embedder") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "bsentry_embed.json";
  {
    std::ofstream out(path);
    out << R"json({"dim": 4, "vectors": {"Lock(address,uint256)": [1.0, 2.0, 3.0, 4.0]}})json";
  }
  const ExternalEmbeddings table = ExternalEmbeddings::load(path.string());

  XbhgGraph g;
  g.nodes.push_back({0, NodeType::Other, Side::Source, {}, ""});
  g.nodes.push_back({1, NodeType::Log, Side::Source, {}, "Lock(address,uint256)"});
  g.nodes.push_back({2, NodeType::Log, Side::Source, {}, "Unknown(bytes)"});
  g.edges.push_back({0, 1, EdgeType::LogRecord});
  g.edges.push_back({0, 2, EdgeType::LogRecord});

  FeatureConfig fc;
  fc.text_dim = 4;
  fc.use_external_embeddings = true;
  init_features(g, fc, &table);

  CHECK(g.nodes[1].features == std::vector<double>{0.0, std::log(2.0), 1.0, 2.0, 3.0, 4.0});
  // Missing entries fall back to the hashed embedder.
  const auto hashed = embed_text("Unknown(bytes)", 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(g.nodes[2].features[2 + i] == doctest::Approx(hashed[i]));
  }
  fs::remove(path);
}
