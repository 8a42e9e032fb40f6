#pragma once

#include <ledgerlab/rng.hpp>
#include <ledgerlab/scheduler.hpp>
#include <ledgerlab/types.hpp>

#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ledgerlab::powchain {

using BlockHash = Digest;

struct Block
{
   BlockHash hash;
   BlockHash parent; // all zero for genesis
   std::uint64_t height = 0;
   MemberId miner;
   std::vector<Transaction> transactions;
   Tick mined_tick = 0;
   std::uint64_t nonce = 0; // distinguishes otherwise identical blocks

   /// Recomputes `hash` from the other fields.
   void seal();
};

/// Genesis shared by every tree: height 0, zero parent, no transactions.
const Block& genesis_block();

class DuplicateBlock : public Error
{
public:
   explicit DuplicateBlock(const BlockHash& h) : Error("DuplicateBlock", "block " + h.short_hex() + " already known") {}
};

struct InsertResult
{
   BlockHash head;
   bool buffered = false;     // parent unknown, held as an orphan
   bool head_changed = false;
   bool reorg = false;        // the old head is no longer on the main chain
   std::size_t connected = 0; // blocks attached, including released orphans
   std::vector<Transaction> pruned; // on the old main chain, not on the new one
   std::vector<Transaction> added;  // newly on the main chain
};

/// Fork-aware block store with longest-chain selection. Equal-height
/// competitors never displace the head that arrived first.
class BlockTree
{
public:
   BlockTree();

   /// Throws DuplicateBlock for a known (or already buffered) hash.
   InsertResult insert_block(const Block& block);

   const BlockHash& head() const { return head_; }
   std::uint64_t height() const { return block(head_).height; }
   bool contains(const BlockHash& h) const { return blocks_.contains(h); }
   const Block& block(const BlockHash& h) const { return blocks_.at(h).block; }
   const std::vector<BlockHash>& children(const BlockHash& h) const { return blocks_.at(h).children; }
   std::size_t size() const { return blocks_.size(); }
   std::size_t orphan_count() const;
   bool on_main_chain(const BlockHash& h) const;

   /// Genesis first.
   std::vector<BlockHash> main_chain() const;

   /// Deepest block, earliest arrival among equals, computed from scratch.
   BlockHash recompute_head() const;

   /// Every block in arrival order.
   const std::vector<BlockHash>& arrival_order() const { return arrivals_; }

private:
   struct Node
   {
      Block block;
      std::vector<BlockHash> children;
      std::uint64_t arrival = 0;
   };

   void connect(const Block& block, InsertResult& result);

   std::unordered_map<BlockHash, Node> blocks_;
   std::unordered_map<BlockHash, std::vector<Block>> orphans_; // keyed by missing parent
   std::unordered_set<BlockHash> orphan_hashes_;
   std::vector<BlockHash> arrivals_;
   BlockHash head_;
};

struct MiningConfig
{
   std::vector<double> shares{1.0};
   double block_interval = 60.0; // mean ticks between blocks, network-wide
   std::size_t blocks = 100;
   std::uint64_t seed = 1;
};

struct MinedEvent
{
   std::uint32_t miner;
   Tick mined_tick;
};

/// Validates that shares are non-negative and sum to 1 (ConfigError
/// otherwise).
void check_shares(const std::vector<double>& shares);

/// Exponential race: the network-wide inter-block time is exponential with
/// the configured mean and each block's winner is drawn by hash-power share.
std::vector<MinedEvent> simulate_mining(const MiningConfig& config);

/// Draws the next winner by share; `shares` must already be checked.
std::uint32_t pick_miner(const std::vector<double>& shares, Rng& rng);

struct ChainSimConfig
{
   std::uint32_t n = 4;
   std::uint64_t seed = 1;
   Tick horizon = 300;
   Tick drain_ticks = 3000;
   double tx_rate = 0.5;
   LatencyModel latency;
   double block_interval = 60.0;
   std::size_t block_capacity = 3500;
   std::uint32_t confirmations = 6;
   std::vector<double> shares; // empty = uniform
   double mean_fee = 10.0;     // fees are exponential; miners fill blocks by fee
};

struct ChainRunResult
{
   std::vector<Tick> submitted_at;                // by tx id - 1
   std::vector<MemberId> submitter;
   std::vector<std::optional<Tick>> confirmed_at; // k-deep at member 0 and still there at the end
   std::vector<std::uint64_t> chain_order;        // confirmed tx ids in main-chain order at member 0
   std::size_t blocks_mined = 0;
   std::size_t stale_blocks = 0; // known to member 0 but off its main chain
   double stale_rate = 0.0;
   std::size_t reorgs = 0;
   bool agreement = true; // all members share the k-deep prefix
   std::string divergence;
   Tick end_tick = 0;
   BlockTree tree; // member 0's final tree
};

ChainRunResult run_scenario_chain(const ChainSimConfig& config);

struct AttackConfig
{
   double attacker_share = 0.6;
   std::uint32_t lead = 6;          // honest confirmations the attacker must overcome
   std::uint32_t trials = 100;
   std::size_t max_blocks = 2000;   // race cut-off per trial
   std::uint64_t seed = 1;
};

struct AttackResult
{
   std::uint32_t trials = 0;
   std::uint32_t successes = 0;
   double success_rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

/// Private-chain withholding: the attacker forks off before a block the
/// honest chain has buried `lead` deep, mines in private, and publishes as
/// soon as its branch is strictly longer. A trial succeeds when publishing
/// reorganizes the honest tree onto the attacker's branch.
AttackResult simulate_withholding_attack(const AttackConfig& config);

/// CSV: hash,parent,height,miner,mined_tick,tx_count,on_main_chain
void write_chain_csv(std::ostream& out, const BlockTree& tree);

} // namespace ledgerlab::powchain
