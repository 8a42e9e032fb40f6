#pragma once

#include <ledgerlab/event_dag.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ledgerlab::hashgraph {

struct RoundInfo
{
   std::uint32_t round = 0;
   bool is_witness = false;

   bool operator==(const RoundInfo&) const = default;
};

struct OrderedTransaction
{
   Transaction transaction;
   std::uint32_t round_received = 0;
   Tick consensus_timestamp = 0;
   EventHash tiebreak_key; // digest of the carrying event

   bool operator==(const OrderedTransaction&) const = default;
};

struct ConsensusOptions
{
   /// Every c-th voting round of an election is a coin round.
   std::uint32_t coin_period = 10;
};

struct ConsensusStats
{
   std::uint64_t coin_votes = 0;        // pseudo-random ballots cast in coin rounds
   std::uint64_t elections_decided = 0;
   std::uint32_t longest_election = 0;  // max (deciding round - witness round)
};

/// Thrown by find_order when no round has all of its witnesses decided.
class NothingDecidable : public Error
{
public:
   NothingDecidable() : Error("NothingDecidable", "no round has every witness's fame decided") {}
};

/// Incremental virtual voting over one view.
///
/// Every annotation it writes is a function of the view's event set only:
/// rounds depend on ancestry, fame on the witnesses present, and rounds are
/// ordered strictly in sequence so the log only ever grows at the end.
class Consensus
{
public:
   explicit Consensus(HashgraphView& view, ConsensusOptions options = {});

   /// Annotates every event not yet visited with its round and witness flag.
   void divide_rounds();

   /// Runs the pending fame elections against the witnesses now present.
   void decide_fame();

   /// Orders every round whose witnesses are all decided, in sequence.
   /// Returns the number of newly ordered transactions. Throws
   /// NothingDecidable if no round has ever become orderable.
   std::size_t find_order();

   /// divide_rounds + decide_fame + find_order; never throws.
   std::size_t consensus_order();

   const std::vector<OrderedTransaction>& log() const { return log_; }
   const std::vector<EventIdx>& ordered_events() const { return ordered_events_; }

   std::uint32_t max_round() const { return static_cast<std::uint32_t>(witnesses_.size()); }
   std::uint32_t last_ordered_round() const { return last_ordered_round_; }
   std::span<const EventIdx> witnesses(std::uint32_t round) const;
   std::vector<EventIdx> famous_witnesses(std::uint32_t round) const;

   /// Ballot of witness `voter` in the election of witness `subject`, as
   /// computed so far. Empty if that ballot has not been evaluated.
   std::optional<bool> ballot(EventIdx voter, EventIdx subject) const;

   const ConsensusStats& stats() const { return stats_; }
   const HashgraphView& view() const { return view_; }
   const ConsensusOptions& options() const { return options_; }

private:
   struct Election
   {
      std::unordered_map<EventIdx, bool> votes;
   };

   const std::vector<EventIdx>& strongly_seen_previous(EventIdx witness);
   bool vote(Election& el, EventIdx subject, EventIdx voter, bool& decided, bool& value);
   bool round_decided(std::uint32_t round) const;

   HashgraphView& view_;
   ConsensusOptions options_;
   std::uint32_t supermajority_;
   std::size_t rounds_done_ = 0;       // events annotated by divide_rounds
   std::size_t witnesses_seen_ = 0;    // witness count at the last fame pass
   std::size_t witness_count_ = 0;
   std::vector<std::vector<EventIdx>> witnesses_; // [round - 1]
   std::vector<EventIdx> undecided_;
   std::unordered_map<EventIdx, Election> elections_;
   std::unordered_map<EventIdx, std::vector<EventIdx>> strongly_seen_cache_;
   std::vector<EventIdx> unordered_;
   std::uint32_t last_ordered_round_ = 0;
   std::vector<OrderedTransaction> log_;
   std::vector<EventIdx> ordered_events_;
   ConsensusStats stats_;
};

/// Pure wrappers over a private copy of `view`.
std::vector<RoundInfo> divide_rounds(const HashgraphView& view);
std::vector<Fame> decide_fame(const HashgraphView& view, ConsensusOptions options = {});
std::vector<OrderedTransaction> find_order(const HashgraphView& view, ConsensusOptions options = {});
std::vector<OrderedTransaction> consensus_order(const HashgraphView& view, ConsensusOptions options = {});

/// Lower median of a non-empty set of ticks.
Tick lower_median(std::vector<Tick> values);

/// Golden-file export: `round_received\tconsensus_timestamp\ttx_id\tsubmitter`
/// per line.
std::string export_log(std::span<const OrderedTransaction> log);

} // namespace ledgerlab::hashgraph
