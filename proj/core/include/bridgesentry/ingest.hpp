#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bridgesentry/types.hpp"

namespace bridgesentry::ingest {

struct Call {
  std::string caller;
  std::string callee;
  std::string function_name;
  std::string param_text;
  bool operator==(const Call&) const = default;
};

struct LogEntry {
  std::string emitter;
  std::string event_name;
  std::string param_text;
  bool operator==(const LogEntry&) const = default;
};

struct Transfer {
  std::string from;
  std::string to;
  std::string token;
  std::string amount;  // decimal string, opaque to the pipeline
  bool operator==(const Transfer&) const = default;
};

struct Approval {
  std::string owner;
  std::string spender;
  std::string token;
  bool operator==(const Approval&) const = default;
};

// One decoded on-chain transaction. Addresses and hashes are lowercase after
// parsing; hex checksum variants must not split identities.
struct TransactionRecord {
  std::string tx_hash;
  std::string chain_id;
  std::int64_t block_number = 0;
  std::int64_t timestamp = 0;
  std::string from_addr;
  std::string to_addr;
  std::vector<Call> calls;
  std::vector<LogEntry> logs;
  std::vector<Transfer> transfers;
  std::vector<Approval> approvals;
  bool operator==(const TransactionRecord&) const = default;
};

// Role assignment inputs: which (chain, address) pairs are bridge routers,
// token contracts, and (optionally) known user accounts.
struct BridgeConfig {
  using ChainAddr = std::pair<std::string, std::string>;
  std::set<ChainAddr> router_addrs;
  std::set<ChainAddr> token_addrs;
  std::set<ChainAddr> user_addrs;
};

// A matched (source-tx, destination-tx) pair plus relay linkage; the unit of
// classification. At least one side is present.
struct CrossChainBehavior {
  std::string behavior_id;
  std::optional<TransactionRecord> source_tx;
  std::optional<TransactionRecord> dest_tx;
  Label label = Label::Unlabeled;
};

struct LineError {
  int line_number = 0;  // 1-based
  std::string message;
};

struct ParseResult {
  std::vector<TransactionRecord> records;
  std::vector<LineError> errors;
};

struct TxPair {
  std::string src_chain;
  std::string src_tx;
  std::string dst_chain;
  std::string dst_tx;
  Label label = Label::Unlabeled;
};

struct LinkOptions {
  // When set, records not referenced by any pair are emitted as
  // single-sided behaviors.
  bool include_singles = false;
};

struct LinkResult {
  std::vector<CrossChainBehavior> behaviors;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;  // pairs with both sides unresolvable
};

std::string lowercase(std::string s);

// Parses a records.jsonl file; one JSON object per line. Malformed lines are
// reported with their line numbers; duplicate (chain_id, tx_hash) is fatal.
ParseResult parse_records(const std::string& path);
ParseResult parse_records_text(const std::string& text);

std::string serialize_record(const TransactionRecord& rec);
TransactionRecord record_from_json_line(const std::string& line);

std::vector<TxPair> parse_pairs(const std::string& path);
std::string serialize_pair(const TxPair& pair);

BridgeConfig parse_bridge_config(const std::string& path);
std::string serialize_bridge_config(const BridgeConfig& config);

// Validates the per-chain disjointness of router and token sets.
void validate_bridge_config(const BridgeConfig& config);

// Total role classifier with precedence R > T > U > O. `initiators` is the
// set of (chain, addr) pairs observed as transaction senders.
NodeType classify_address(const std::string& chain_id, const std::string& addr,
                          const BridgeConfig& config,
                          const std::set<BridgeConfig::ChainAddr>& initiators = {});

// Resolves pairs against records and builds one behavior per resolvable
// pair. Dangling hashes produce warnings (pair skipped when one side is
// missing, an error when both are).
LinkResult link_cross_chain(const std::vector<TransactionRecord>& records,
                            const std::vector<TxPair>& pairs,
                            const LinkOptions& options = {});

}  // namespace bridgesentry::ingest
