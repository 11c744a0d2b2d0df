#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgesentry/ingest.hpp"
#include "bridgesentry/types.hpp"

namespace bridgesentry::synth {

struct CorpusSpec {
  std::uint64_t seed = 42;
  int n_normal = 400;
  int n_per_attack = 60;
  double noise = 0.1;  // probability of benign helper-contract interactions
  // Size jitter ranges.
  int max_extra_transfers = 1;
  int max_extra_approvals = 1;
  int max_extra_chain_calls = 2;     // extra hops in attack call chains
  double degraded_telemetry = 0.1;   // normal behaviors missing the source lock log

  void validate() const;
};

// Fixed router/token roles of the synthetic two-chain bridge. gen_corpus
// extends the user list with the legitimate recipients it generates.
ingest::BridgeConfig base_bridge_config();

extern const char* const kSrcChain;
extern const char* const kDstChain;

// Legitimate lifecycle: deposit + lock on the source chain, relay linkage,
// mint + payout on the destination chain, plus benign jitter.
ingest::CrossChainBehavior gen_normal(std::uint64_t seed, const CorpusSpec& spec = {});

// kind selects the lifecycle stage the malicious structure lands on:
//  - SrcAttack: unmarked-contract call chain into the source router with a
//    forged lock log.
//  - OffAttack: destination mint without the source lock evidence, submitted
//    through an unofficial relayer contract.
//  - DstAttack: reentrant drain cycles between the destination token and
//    attacker contracts.
ingest::CrossChainBehavior gen_attack(Label kind, std::uint64_t seed,
                                      const CorpusSpec& spec = {});

struct GeneratedCorpus {
  std::vector<ingest::CrossChainBehavior> behaviors;
  std::vector<ingest::TxPair> pairs;
  ingest::BridgeConfig bridge_config;
};

// Deterministic function of the spec: n_normal normal behaviors followed by
// n_per_attack of each attack class.
GeneratedCorpus gen_corpus(const CorpusSpec& spec);

// Emits records.jsonl, pairs.jsonl and bridge_config.json into dir.
void write_corpus(const GeneratedCorpus& corpus, const std::string& dir);

}  // namespace bridgesentry::synth
