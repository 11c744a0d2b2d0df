#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bridgesentry {

// Behavior class labels. Numeric order is the classifier's class index order
// and the tie-break order for argmax predictions.
enum class Label : int {
  Normal = 0,
  SrcAttack = 1,
  OffAttack = 2,
  DstAttack = 3,
  Unlabeled = 4,
};

inline constexpr int kNumClasses = 4;

// Node types of the cross-chain behavior graph.
enum class NodeType : int {
  User = 0,    // U
  Router = 1,  // R
  Token = 2,   // T
  Other = 3,   // O
  Log = 4,     // L
  Relay = 5,   // D
};

inline constexpr int kNumNodeTypes = 6;

// Edge types of the cross-chain behavior graph.
enum class EdgeType : int {
  Transaction = 0,    // E_t
  Call = 1,           // E_c
  LogRecord = 2,      // E_e
  Transfer = 3,       // E_x
  Authorization = 4,  // E_a
  CrossChain = 5,     // E_d
};

// Which half of the behavior a node belongs to.
enum class Side : int {
  Source = 0,
  Dest = 1,
  Offchain = 2,
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingDiverged : std::runtime_error {
  int epoch;
  explicit TrainingDiverged(int epoch_index)
      : std::runtime_error("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch_index)),
        epoch(epoch_index) {}
};

inline char node_type_symbol(NodeType t) {
  static constexpr char sym[kNumNodeTypes] = {'U', 'R', 'T', 'O', 'L', 'D'};
  return sym[static_cast<int>(t)];
}

inline NodeType node_type_from_symbol(char c) {
  switch (c) {
    case 'U': return NodeType::User;
    case 'R': return NodeType::Router;
    case 'T': return NodeType::Token;
    case 'O': return NodeType::Other;
    case 'L': return NodeType::Log;
    case 'D': return NodeType::Relay;
    default: throw DataError(std::string("unknown node type symbol: ") + c);
  }
}

inline std::string edge_type_name(EdgeType t) {
  static const char* names[] = {"E_t", "E_c", "E_e", "E_x", "E_a", "E_d"};
  return names[static_cast<int>(t)];
}

inline EdgeType edge_type_from_name(std::string_view s) {
  if (s == "E_t") return EdgeType::Transaction;
  if (s == "E_c") return EdgeType::Call;
  if (s == "E_e") return EdgeType::LogRecord;
  if (s == "E_x") return EdgeType::Transfer;
  if (s == "E_a") return EdgeType::Authorization;
  if (s == "E_d") return EdgeType::CrossChain;
  throw DataError("unknown edge type: " + std::string(s));
}

inline std::string label_name(Label l) {
  static const char* names[] = {"Normal", "SrcAttack", "OffAttack", "DstAttack", "Unlabeled"};
  return names[static_cast<int>(l)];
}

inline Label label_from_name(std::string_view s) {
  if (s == "Normal") return Label::Normal;
  if (s == "SrcAttack") return Label::SrcAttack;
  if (s == "OffAttack") return Label::OffAttack;
  if (s == "DstAttack") return Label::DstAttack;
  if (s == "Unlabeled") return Label::Unlabeled;
  throw DataError("unknown label: " + std::string(s));
}

inline std::string side_name(Side s) {
  static const char* names[] = {"source", "dest", "offchain"};
  return names[static_cast<int>(s)];
}

inline Side side_from_name(std::string_view s) {
  if (s == "source") return Side::Source;
  if (s == "dest") return Side::Dest;
  if (s == "offchain") return Side::Offchain;
  throw DataError("unknown side: " + std::string(s));
}

inline bool is_attack(Label l) {
  return l == Label::SrcAttack || l == Label::OffAttack || l == Label::DstAttack;
}

}  // namespace bridgesentry
