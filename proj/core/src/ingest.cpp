#include "bridgesentry/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bridgesentry::ingest {

using nlohmann::json;

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

namespace {

std::string require_string(const json& j, const char* key, bool allow_empty = false) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw DataError(std::string("missing or non-string field \"") + key + "\"");
  }
  std::string v = j.at(key).get<std::string>();
  if (!allow_empty && v.empty()) {
    throw DataError(std::string("field \"") + key + "\" must be nonempty");
  }
  return v;
}

std::int64_t require_int(const json& j, const char* key, bool nonneg) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw DataError(std::string("missing or non-integer field \"") + key + "\"");
  }
  const std::int64_t v = j.at(key).get<std::int64_t>();
  if (nonneg && v < 0) {
    throw DataError(std::string("field \"") + key + "\" must be nonnegative");
  }
  return v;
}

const json& require_array(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw DataError(std::string("missing or non-array field \"") + key + "\"");
  }
  return j.at(key);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  if (in.bad()) throw DataError("I/O failure reading: " + path);
  return out.str();
}

}  // namespace

TransactionRecord record_from_json_line(const std::string& line) {
  json j = json::parse(line);
  if (!j.is_object()) throw DataError("record line is not a JSON object");

  TransactionRecord rec;
  rec.tx_hash = lowercase(require_string(j, "tx_hash"));
  rec.chain_id = require_string(j, "chain_id");
  rec.block_number = require_int(j, "block_number", /*nonneg=*/true);
  rec.timestamp = require_int(j, "timestamp", /*nonneg=*/false);
  rec.from_addr = lowercase(require_string(j, "from"));
  rec.to_addr = lowercase(require_string(j, "to"));

  for (const auto& c : require_array(j, "calls")) {
    Call call;
    call.caller = lowercase(require_string(c, "caller"));
    call.callee = lowercase(require_string(c, "callee"));
    call.function_name = require_string(c, "function", /*allow_empty=*/true);
    call.param_text = require_string(c, "params", /*allow_empty=*/true);
    rec.calls.push_back(std::move(call));
  }
  for (const auto& l : require_array(j, "logs")) {
    LogEntry log;
    log.emitter = lowercase(require_string(l, "emitter"));
    log.event_name = require_string(l, "event", /*allow_empty=*/true);
    log.param_text = require_string(l, "params", /*allow_empty=*/true);
    rec.logs.push_back(std::move(log));
  }
  for (const auto& t : require_array(j, "transfers")) {
    Transfer tr;
    tr.from = lowercase(require_string(t, "from"));
    tr.to = lowercase(require_string(t, "to"));
    tr.token = lowercase(require_string(t, "token"));
    tr.amount = require_string(t, "amount", /*allow_empty=*/true);
    rec.transfers.push_back(std::move(tr));
  }
  for (const auto& a : require_array(j, "approvals")) {
    Approval ap;
    ap.owner = lowercase(require_string(a, "owner"));
    ap.spender = lowercase(require_string(a, "spender"));
    ap.token = lowercase(require_string(a, "token"));
    rec.approvals.push_back(std::move(ap));
  }
  return rec;
}

std::string serialize_record(const TransactionRecord& rec) {
  json calls = json::array();
  for (const auto& c : rec.calls) {
    calls.push_back({{"caller", c.caller},
                     {"callee", c.callee},
                     {"function", c.function_name},
                     {"params", c.param_text}});
  }
  json logs = json::array();
  for (const auto& l : rec.logs) {
    logs.push_back({{"emitter", l.emitter}, {"event", l.event_name}, {"params", l.param_text}});
  }
  json transfers = json::array();
  for (const auto& t : rec.transfers) {
    transfers.push_back(
        {{"from", t.from}, {"to", t.to}, {"token", t.token}, {"amount", t.amount}});
  }
  json approvals = json::array();
  for (const auto& a : rec.approvals) {
    approvals.push_back({{"owner", a.owner}, {"spender", a.spender}, {"token", a.token}});
  }
  const json j = {{"tx_hash", rec.tx_hash},
                  {"chain_id", rec.chain_id},
                  {"block_number", rec.block_number},
                  {"timestamp", rec.timestamp},
                  {"from", rec.from_addr},
                  {"to", rec.to_addr},
                  {"calls", calls},
                  {"logs", logs},
                  {"transfers", transfers},
                  {"approvals", approvals}};
  return j.dump();
}

ParseResult parse_records_text(const std::string& text) {
  ParseResult result;
  std::map<std::pair<std::string, std::string>, int> seen;  // (chain, hash) -> line
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      TransactionRecord rec = record_from_json_line(line);
      auto key = std::make_pair(rec.chain_id, rec.tx_hash);
      auto [it, inserted] = seen.emplace(key, line_number);
      if (!inserted) {
        throw DataError("duplicate (chain_id, tx_hash) " + rec.chain_id + "/" + rec.tx_hash +
                        " at line " + std::to_string(line_number) + " (first at line " +
                        std::to_string(it->second) + ")");
      }
      result.records.push_back(std::move(rec));
    } catch (const json::parse_error& e) {
      result.errors.push_back({line_number, std::string("JSON parse error: ") + e.what()});
    } catch (const DataError& e) {
      if (std::string_view(e.what()).starts_with("duplicate")) throw;
      result.errors.push_back({line_number, e.what()});
    }
  }
  return result;
}

ParseResult parse_records(const std::string& path) {
  return parse_records_text(read_file(path));
}

std::vector<TxPair> parse_pairs(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<TxPair> pairs;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      TxPair p;
      p.src_chain = require_string(j, "src_chain");
      p.src_tx = lowercase(require_string(j, "src_tx"));
      p.dst_chain = require_string(j, "dst_chain");
      p.dst_tx = lowercase(require_string(j, "dst_tx"));
      if (j.contains("label")) p.label = label_from_name(j.at("label").get<std::string>());
      pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return pairs;
}

std::string serialize_pair(const TxPair& pair) {
  json j = {{"src_chain", pair.src_chain},
            {"src_tx", pair.src_tx},
            {"dst_chain", pair.dst_chain},
            {"dst_tx", pair.dst_tx}};
  if (pair.label != Label::Unlabeled) j["label"] = label_name(pair.label);
  return j.dump();
}

namespace {

json chain_addr_list(const std::set<BridgeConfig::ChainAddr>& set) {
  json out = json::array();
  for (const auto& [chain, addr] : set) out.push_back(json::array({chain, addr}));
  return out;
}

std::set<BridgeConfig::ChainAddr> chain_addr_set(const json& arr, const char* key) {
  std::set<BridgeConfig::ChainAddr> out;
  for (const auto& entry : arr) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string()) {
      throw DataError(std::string("bridge config \"") + key +
                      "\" entries must be [chain, addr] string pairs");
    }
    out.emplace(entry[0].get<std::string>(), lowercase(entry[1].get<std::string>()));
  }
  return out;
}

}  // namespace

BridgeConfig parse_bridge_config(const std::string& path) {
  json j = json::parse(read_file(path));
  BridgeConfig config;
  config.router_addrs = chain_addr_set(require_array(j, "routers"), "routers");
  config.token_addrs = chain_addr_set(require_array(j, "tokens"), "tokens");
  if (j.contains("users")) config.user_addrs = chain_addr_set(j.at("users"), "users");
  validate_bridge_config(config);
  return config;
}

std::string serialize_bridge_config(const BridgeConfig& config) {
  const json j = {{"routers", chain_addr_list(config.router_addrs)},
                  {"tokens", chain_addr_list(config.token_addrs)},
                  {"users", chain_addr_list(config.user_addrs)}};
  return j.dump();
}

void validate_bridge_config(const BridgeConfig& config) {
  for (const auto& entry : config.router_addrs) {
    if (config.token_addrs.count(entry)) {
      throw DataError("bridge config: " + entry.second + " on " + entry.first +
                      " is both router and token");
    }
  }
}

NodeType classify_address(const std::string& chain_id, const std::string& addr,
                          const BridgeConfig& config,
                          const std::set<BridgeConfig::ChainAddr>& initiators) {
  const BridgeConfig::ChainAddr key{chain_id, lowercase(addr)};
  if (config.router_addrs.count(key)) return NodeType::Router;
  if (config.token_addrs.count(key)) return NodeType::Token;
  if (config.user_addrs.count(key) || initiators.count(key)) return NodeType::User;
  return NodeType::Other;
}

LinkResult link_cross_chain(const std::vector<TransactionRecord>& records,
                            const std::vector<TxPair>& pairs, const LinkOptions& options) {
  LinkResult result;
  std::map<std::pair<std::string, std::string>, const TransactionRecord*> index;
  for (const auto& rec : records) index[{rec.chain_id, rec.tx_hash}] = &rec;

  std::set<const TransactionRecord*> used;
  int pair_number = 0;
  for (const auto& pair : pairs) {
    ++pair_number;
    const auto src_it = index.find({pair.src_chain, pair.src_tx});
    const auto dst_it = index.find({pair.dst_chain, pair.dst_tx});
    const bool have_src = src_it != index.end();
    const bool have_dst = dst_it != index.end();
    if (!have_src && !have_dst) {
      result.errors.push_back("pair " + std::to_string(pair_number) +
                              ": neither transaction resolves (" + pair.src_tx + ", " +
                              pair.dst_tx + ")");
      continue;
    }
    if (!have_src || !have_dst) {
      result.warnings.push_back("pair " + std::to_string(pair_number) + ": dangling " +
                                (have_src ? "destination" : "source") + " hash " +
                                (have_src ? pair.dst_tx : pair.src_tx) + ", pair skipped");
      continue;
    }
    CrossChainBehavior behavior;
    char id[32];
    std::snprintf(id, sizeof(id), "pair-%06d", pair_number - 1);
    behavior.behavior_id = id;
    behavior.source_tx = *src_it->second;
    behavior.dest_tx = *dst_it->second;
    behavior.label = pair.label;
    used.insert(src_it->second);
    used.insert(dst_it->second);
    result.behaviors.push_back(std::move(behavior));
  }

  if (options.include_singles) {
    // Chain roles are learned from the pairs file; records on chains never
    // seen there default to the source side.
    std::set<std::string> src_chains, dst_chains;
    for (const auto& p : pairs) {
      src_chains.insert(p.src_chain);
      dst_chains.insert(p.dst_chain);
    }
    for (const auto& rec : records) {
      if (used.count(&rec)) continue;
      CrossChainBehavior behavior;
      behavior.behavior_id =
          "solo-" + rec.chain_id + "-" + rec.tx_hash.substr(0, std::min<std::size_t>(14, rec.tx_hash.size()));
      const bool is_dst = dst_chains.count(rec.chain_id) && !src_chains.count(rec.chain_id);
      if (!src_chains.count(rec.chain_id) && !dst_chains.count(rec.chain_id)) {
        result.warnings.push_back("record " + rec.tx_hash + ": chain " + rec.chain_id +
                                  " has no pair-file role, treating as source side");
      }
      if (is_dst) {
        behavior.dest_tx = rec;
      } else {
        behavior.source_tx = rec;
      }
      result.behaviors.push_back(std::move(behavior));
    }
  }
  return result;
}

}  // namespace bridgesentry::ingest
