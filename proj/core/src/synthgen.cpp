#include "bridgesentry/synthgen.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "bridgesentry/rng.hpp"

namespace bridgesentry::synth {

using ingest::Approval;
using ingest::Call;
using ingest::CrossChainBehavior;
using ingest::LogEntry;
using ingest::Transfer;
using ingest::TransactionRecord;

const char* const kSrcChain = "ethereum";
const char* const kDstChain = "bsc";

namespace {

const char* const kSrcRouter = "0x51a2f0a1e2e57399f1b77f1299a1e1e3b4a99981";
const char* const kDstRouter = "0x8f3c1b2e654dd97aa91f04a9f63bfb15ba0b2e44";
const char* const kSrcToken = "0xd3adb33f00aa45cc829c29cb5a7d66c871f3f6e1";
const char* const kDstToken = "0x7e57ab1efeedcc11b5a2b1a537dd0cbe17f2b6a3";
const char* const kOperator = "0x0a3e11db7a2f4e559f31cce2a7b9055f42d8b810";

std::string hex_string(Rng& rng, int digits) {
  static const char* alphabet = "0123456789abcdef";
  std::string out = "0x";
  out.reserve(static_cast<std::size_t>(digits) + 2);
  for (int i = 0; i < digits; ++i) out.push_back(alphabet[rng.below(16)]);
  return out;
}

std::string address(Rng& rng) { return hex_string(rng, 40); }
std::string tx_hash(Rng& rng) { return hex_string(rng, 64); }

std::string amount(Rng& rng) {
  return std::to_string(100000000000000000ULL +
                        rng.below(9900000000000000000ULL - 100000000000000000ULL));
}

TransactionRecord base_tx(Rng& rng, const std::string& chain, const std::string& from,
                          const std::string& to) {
  TransactionRecord tx;
  tx.tx_hash = tx_hash(rng);
  tx.chain_id = chain;
  tx.block_number = 18000000 + static_cast<std::int64_t>(rng.below(4000000));
  tx.timestamp = 1700000000 + static_cast<std::int64_t>(rng.below(40000000));
  tx.from_addr = from;
  tx.to_addr = to;
  return tx;
}

// Benign helper-contract traffic: a user pokes a standalone contract which
// may read the token. Never chains contract-to-contract calls and never
// touches the router.
void add_benign_noise(Rng& rng, TransactionRecord& tx, const std::string& user,
                      const std::string& token, const CorpusSpec& spec) {
  if (!rng.chance(spec.noise)) return;
  const int helpers = rng.int_in(1, 2);
  for (int i = 0; i < helpers; ++i) {
    const std::string helper = address(rng);
    tx.calls.push_back({user, helper, "claimReward()", ""});
    const int reads = rng.int_in(0, 2);
    for (int r = 0; r < reads; ++r) {
      tx.calls.push_back({helper, token, "balanceOf(address)", user});
    }
  }
}

void add_jitter(Rng& rng, TransactionRecord& tx, const std::string& user,
                const std::string& token, const CorpusSpec& spec) {
  const int extra_transfers = rng.int_in(0, spec.max_extra_transfers);
  for (int i = 0; i < extra_transfers; ++i) {
    tx.transfers.push_back({user, token, token, amount(rng)});
  }
  const int extra_approvals = rng.int_in(0, spec.max_extra_approvals);
  for (int i = 0; i < extra_approvals; ++i) {
    tx.approvals.push_back({user, address(rng), token});
  }
}

TransactionRecord normal_source_tx(Rng& rng, const std::string& user, const CorpusSpec& spec,
                                   bool degraded) {
  TransactionRecord tx = base_tx(rng, kSrcChain, user, kSrcRouter);
  tx.calls.push_back({user, kSrcRouter, "deposit(address,uint256)", user});
  tx.calls.push_back({kSrcRouter, kSrcToken, "lockTokens(address,uint256)", user});
  if (!degraded) {
    tx.logs.push_back({kSrcToken, "Lock(address,uint256)", user + " " + amount(rng)});
  }
  tx.logs.push_back({kSrcRouter, "Deposit(address,address,uint256)", user});
  tx.transfers.push_back({user, kSrcToken, kSrcToken, amount(rng)});
  tx.approvals.push_back({user, kSrcRouter, kSrcToken});
  add_jitter(rng, tx, user, kSrcToken, spec);
  add_benign_noise(rng, tx, user, kSrcToken, spec);
  return tx;
}

TransactionRecord normal_dest_tx(Rng& rng, const std::string& recipient, const CorpusSpec& spec) {
  TransactionRecord tx = base_tx(rng, kDstChain, kOperator, kDstRouter);
  tx.calls.push_back({kOperator, kDstRouter, "executeMessage(bytes)", ""});
  tx.calls.push_back({kDstRouter, kDstToken, "mint(address,uint256)", recipient});
  tx.logs.push_back({kDstToken, "Unlock(address,uint256)", recipient + " " + amount(rng)});
  tx.logs.push_back({kDstRouter, "Withdrawal(address,address,uint256)", recipient});
  tx.transfers.push_back({kDstToken, recipient, kDstToken, amount(rng)});
  add_benign_noise(rng, tx, recipient, kDstToken, spec);
  return tx;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_normal < 0 || n_per_attack < 0) throw DataError("corpus spec: counts must be >= 0");
  if (noise < 0.0 || noise > 1.0) throw DataError("corpus spec: noise must be in [0, 1]");
  if (degraded_telemetry < 0.0 || degraded_telemetry > 1.0) {
    throw DataError("corpus spec: degraded_telemetry must be in [0, 1]");
  }
}

ingest::BridgeConfig base_bridge_config() {
  ingest::BridgeConfig config;
  config.router_addrs = {{kSrcChain, kSrcRouter}, {kDstChain, kDstRouter}};
  config.token_addrs = {{kSrcChain, kSrcToken}, {kDstChain, kDstToken}};
  return config;
}

CrossChainBehavior gen_normal(std::uint64_t seed, const CorpusSpec& spec) {
  Rng rng(seed);
  const std::string user = address(rng);
  const bool degraded = rng.chance(spec.degraded_telemetry);

  CrossChainBehavior behavior;
  behavior.behavior_id = "normal-" + hex_string(rng, 10);
  behavior.label = Label::Normal;
  behavior.source_tx = normal_source_tx(rng, user, spec, degraded);
  behavior.dest_tx = normal_dest_tx(rng, user, spec);
  return behavior;
}

CrossChainBehavior gen_attack(Label kind, std::uint64_t seed, const CorpusSpec& spec) {
  Rng rng(seed);
  CrossChainBehavior behavior;
  behavior.label = kind;

  switch (kind) {
    case Label::SrcAttack: {
      // Attack contracts loop among themselves, call into the router and
      // forge the lock event; the relay is fooled into a mint.
      behavior.behavior_id = "srcatk-" + hex_string(rng, 10);
      const std::string attacker = address(rng);
      const std::string payout = address(rng);
      std::vector<std::string> contracts = {address(rng), address(rng), address(rng)};
      const int extra = rng.int_in(0, spec.max_extra_chain_calls);
      for (int i = 0; i < extra; ++i) contracts.push_back(address(rng));

      TransactionRecord src = base_tx(rng, kSrcChain, attacker, contracts[0]);
      src.calls.push_back({attacker, contracts[0], "execute()", ""});
      for (std::size_t i = 0; i + 1 < contracts.size(); ++i) {
        src.calls.push_back({contracts[i], contracts[i + 1], "forward(bytes)", ""});
      }
      src.calls.push_back({contracts.back(), contracts[0], "loop()", ""});
      src.calls.push_back({contracts[0], kSrcRouter, "deposit(address,uint256)", attacker});
      src.calls.push_back({kSrcRouter, contracts[0], "onDeposit(address)", attacker});
      src.logs.push_back({contracts[0], "Lock(address,uint256)", attacker + " " + amount(rng)});
      src.logs.push_back({kSrcRouter, "Deposit(address,address,uint256)", attacker});

      TransactionRecord dst = base_tx(rng, kDstChain, kOperator, kDstRouter);
      dst.calls.push_back({kOperator, kDstRouter, "executeMessage(bytes)", ""});
      dst.calls.push_back({kDstRouter, kDstToken, "mint(address,uint256)", payout});
      dst.logs.push_back({kDstRouter, "Withdrawal(address,address,uint256)", payout});
      dst.transfers.push_back({kDstToken, payout, kDstToken, amount(rng)});

      behavior.source_tx = std::move(src);
      behavior.dest_tx = std::move(dst);
      break;
    }
    case Label::OffAttack: {
      // The source side shows a bare request with no lock evidence; the
      // forged message reaches the router through an unofficial relayer
      // contract and mints anyway.
      behavior.behavior_id = "offatk-" + hex_string(rng, 10);
      const std::string attacker = address(rng);
      const std::string forger = address(rng);
      const std::string relayer_contract = address(rng);
      const std::string payout = address(rng);

      TransactionRecord src = base_tx(rng, kSrcChain, attacker, kSrcRouter);
      src.calls.push_back({attacker, kSrcRouter, "deposit(address,uint256)", attacker});

      TransactionRecord dst = base_tx(rng, kDstChain, forger, relayer_contract);
      dst.calls.push_back({forger, relayer_contract, "relay(bytes)", ""});
      dst.calls.push_back({relayer_contract, kDstRouter, "executeMessage(bytes)", ""});
      dst.calls.push_back({kDstRouter, kDstToken, "mint(address,uint256)", payout});
      dst.logs.push_back({kDstRouter, "Withdrawal(address,address,uint256)", payout});
      dst.transfers.push_back({kDstToken, payout, kDstToken, amount(rng)});

      behavior.source_tx = std::move(src);
      behavior.dest_tx = std::move(dst);
      break;
    }
    case Label::DstAttack: {
      // Legitimate-looking deposit, then a reentrant drain on the
      // destination token that never touches the router.
      behavior.behavior_id = "dstatk-" + hex_string(rng, 10);
      const std::string attacker = address(rng);
      const std::string attacker2 = address(rng);
      const std::string drain = address(rng);
      const std::string helper1 = address(rng);
      const std::string helper2 = address(rng);

      TransactionRecord src = normal_source_tx(rng, attacker, spec, /*degraded=*/false);

      TransactionRecord dst = base_tx(rng, kDstChain, attacker2, drain);
      dst.calls.push_back({attacker2, drain, "attack()", ""});
      dst.calls.push_back({drain, kDstToken, "withdraw(uint256)", ""});
      const int rounds = rng.int_in(2, 2 + spec.max_extra_chain_calls);
      for (int i = 0; i < rounds; ++i) {
        dst.calls.push_back({kDstToken, drain, "onTokenTransfer(address,uint256)", ""});
        dst.calls.push_back({drain, kDstToken, "withdraw(uint256)", ""});
        dst.transfers.push_back({kDstToken, drain, kDstToken, amount(rng)});
      }
      dst.calls.push_back({drain, helper1, "forward(bytes)", ""});
      dst.calls.push_back({helper1, helper2, "forward(bytes)", ""});
      dst.calls.push_back({helper2, drain, "loop()", ""});
      dst.logs.push_back({drain, "Collect(address,uint256)", attacker2});
      dst.transfers.push_back({drain, attacker2, kDstToken, amount(rng)});

      behavior.source_tx = std::move(src);
      behavior.dest_tx = std::move(dst);
      break;
    }
    default:
      throw DataError("gen_attack: kind must be an attack label");
  }
  return behavior;
}

GeneratedCorpus gen_corpus(const CorpusSpec& spec) {
  spec.validate();
  GeneratedCorpus corpus;
  corpus.bridge_config = base_bridge_config();

  const std::uint64_t base = splitmix64(spec.seed);
  int index = 0;
  const auto next_seed = [&] { return splitmix64(base + static_cast<std::uint64_t>(index++)); };

  for (int i = 0; i < spec.n_normal; ++i) {
    corpus.behaviors.push_back(gen_normal(next_seed(), spec));
  }
  for (const Label kind : {Label::SrcAttack, Label::OffAttack, Label::DstAttack}) {
    for (int i = 0; i < spec.n_per_attack; ++i) {
      corpus.behaviors.push_back(gen_attack(kind, next_seed(), spec));
    }
  }

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& behavior : corpus.behaviors) {
    ingest::TxPair pair;
    pair.src_chain = behavior.source_tx->chain_id;
    pair.src_tx = behavior.source_tx->tx_hash;
    pair.dst_chain = behavior.dest_tx->chain_id;
    pair.dst_tx = behavior.dest_tx->tx_hash;
    pair.label = behavior.label;
    corpus.pairs.push_back(std::move(pair));

    for (const auto* tx : {&*behavior.source_tx, &*behavior.dest_tx}) {
      if (!seen.emplace(tx->chain_id, tx->tx_hash).second) {
        throw DataError("corpus generation produced a duplicate tx hash: " + tx->tx_hash);
      }
    }
    if (behavior.label == Label::Normal) {
      corpus.bridge_config.user_addrs.emplace(kDstChain, behavior.source_tx->from_addr);
    }
  }
  return corpus;
}

void write_corpus(const GeneratedCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory: " + dir);

  std::ofstream records(fs::path(dir) / "records.jsonl", std::ios::binary);
  if (!records) throw DataError("cannot write records.jsonl in " + dir);
  for (const auto& behavior : corpus.behaviors) {
    if (behavior.source_tx) records << ingest::serialize_record(*behavior.source_tx) << '\n';
    if (behavior.dest_tx) records << ingest::serialize_record(*behavior.dest_tx) << '\n';
  }
  if (!records.flush()) throw DataError("I/O failure writing records.jsonl");

  std::ofstream pairs(fs::path(dir) / "pairs.jsonl", std::ios::binary);
  if (!pairs) throw DataError("cannot write pairs.jsonl in " + dir);
  for (const auto& pair : corpus.pairs) pairs << ingest::serialize_pair(pair) << '\n';
  if (!pairs.flush()) throw DataError("I/O failure writing pairs.jsonl");

  std::ofstream config(fs::path(dir) / "bridge_config.json", std::ios::binary);
  if (!config) throw DataError("cannot write bridge_config.json in " + dir);
  config << ingest::serialize_bridge_config(corpus.bridge_config) << '\n';
  if (!config.flush()) throw DataError("I/O failure writing bridge_config.json");
}

}  // namespace bridgesentry::synth
