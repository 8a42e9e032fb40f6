#pragma once

#include <ledgerlab/event_dag.hpp>
#include <ledgerlab/rng.hpp>
#include <ledgerlab/scheduler.hpp>
#include <ledgerlab/virtual_voting.hpp>

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ledgerlab::gossip {

using hashgraph::Consensus;
using hashgraph::Event;
using hashgraph::EventHash;
using hashgraph::EventIdx;
using hashgraph::HashgraphView;
using hashgraph::OrderedTransaction;

enum class Behavior
{
   Honest,
   Forker,  // equivocates with probability fork_rate per send turn
   Silent,  // crashed from the start: never sends, ignores deliveries
   Delayer, // honest content, every outgoing message held back by delay_ticks
};

const char* to_string(Behavior b);

struct SyncMessage
{
   MemberId from;
   MemberId to;
   std::vector<std::shared_ptr<const Event>> events; // sender insertion order
   std::optional<EventHash> sender_head;             // sender's latest own event
   Tick send_tick = 0;
   Tick deliver_tick = 0;
};

struct ReceiveResult
{
   std::optional<EventHash> created;
   std::size_t inserted = 0;
   std::size_t rejected = 0;
   std::size_t newly_ordered = 0;
};

/// One simulated member: its view, consensus engine, pending transactions,
/// and the per-peer record of which events each peer is known to hold.
class HashgraphNode
{
public:
   HashgraphNode(MemberId self, std::uint32_t member_count, Behavior behavior, hashgraph::ConsensusOptions options = {});

   HashgraphNode(const HashgraphNode&) = delete;
   HashgraphNode& operator=(const HashgraphNode&) = delete;

   MemberId id() const { return self_; }
   Behavior behavior() const { return behavior_; }
   const HashgraphView& view() const { return *view_; }
   const Consensus& consensus() const { return *consensus_; }
   std::optional<EventHash> latest_own() const;

   /// The member's first event (no parents, no transactions).
   EventHash create_genesis(Tick now);

   void submit(Transaction tx) { pending_.push_back(std::move(tx)); }
   std::size_t pending_count() const { return pending_.size(); }

   /// Packages every event the peer is not known to hold (or the whole
   /// history when `full_history`), oldest first. `exclude` events are held
   /// back and stay unsent.
   SyncMessage prepare_sync(MemberId to, Tick now, bool full_history, std::span<const EventHash> exclude = {});

   /// Inserts the message's unknown events parents-first, then records a new
   /// event whose other-parent is the sender's latest event, carrying all
   /// pending transactions, and runs consensus. Events failing validation are
   /// dropped together with their descendants in the message.
   ReceiveResult receive_sync(const SyncMessage& msg, Tick now, bool suppress_empty_events = false);

   /// Equivocation: two children of the current self-parent. Returns their
   /// hashes; the first one becomes the node's latest event.
   std::pair<EventHash, EventHash> fork(Tick now, std::optional<EventHash> other_a, std::optional<EventHash> other_b);

   /// Whether this node runs virtual voting on every receive.
   bool runs_consensus() const { return behavior_ == Behavior::Honest; }

private:
   EventHash append_own(Event e);

   MemberId self_;
   std::uint32_t n_;
   Behavior behavior_;
   std::unique_ptr<HashgraphView> view_;
   std::unique_ptr<Consensus> consensus_;
   std::deque<Transaction> pending_;
   EventIdx last_own_ = hashgraph::kNoEvent;
   std::vector<std::vector<bool>> peer_has_; // [peer][event idx]
};

struct HashgraphSimConfig
{
   std::uint32_t n = 4;
   std::uint64_t seed = 1;
   Tick horizon = 300;       // transaction injection stops here
   Tick drain_ticks = 600;   // extra gossip time for honest logs to converge
   double tx_rate = 0.5;     // Poisson arrivals per member per tick
   std::size_t payload_bytes = 16;
   LatencyModel latency;
   std::vector<Behavior> behaviors; // empty = all honest
   double fork_rate = 0.1;
   Tick delay_ticks = 20;
   Tick sync_period = 1;
   hashgraph::ConsensusOptions consensus;
   bool full_history = false;
   bool suppress_empty_events = false;
   bool record_messages = false;
};

struct MessageRecord
{
   Tick send_tick;
   Tick deliver_tick;
   std::uint32_t from;
   std::uint32_t to;
   std::size_t event_count;
};

struct HashgraphRunResult
{
   std::vector<Behavior> behaviors;
   std::vector<std::vector<OrderedTransaction>> logs; // per member; adversaries left empty
   std::vector<Transaction> transactions;             // every submitted transaction, by id - 1
   std::vector<std::optional<Tick>> confirmed_at;     // tick the tx entered every honest log
   std::vector<std::uint64_t> receive_order;          // tx ids in the first honest view's insertion order
   bool agreement = true;
   bool converged = false; // every honest-submitted tx reached every honest log
   std::string divergence;
   std::uint32_t common_round = 0;
   std::size_t events_created = 0;
   std::size_t rejected_events = 0;
   std::size_t messages_sent = 0;
   std::uint64_t coin_votes = 0;
   std::uint32_t longest_election = 0;
   std::vector<std::uint32_t> equivocators_detected; // members flagged by every honest view
   std::vector<MessageRecord> messages;
   Tick end_tick = 0;
};

/// Full network over one deterministic scheduler.
class HashgraphNetwork
{
public:
   explicit HashgraphNetwork(HashgraphSimConfig config);

   /// Called after every delivery and send turn; receives the current tick.
   using Observer = std::function<void(const HashgraphNetwork&, Tick)>;

   HashgraphRunResult run(const Observer& observer = {});

   const HashgraphNode& node(std::uint32_t i) const { return *nodes_.at(i); }
   std::uint32_t member_count() const { return config_.n; }
   const HashgraphSimConfig& config() const { return config_; }

private:
   struct SendTurn
   {
      std::uint32_t member;
   };
   struct Deliver
   {
      std::shared_ptr<SyncMessage> message;
   };
   struct TxArrival
   {
      std::uint32_t member;
   };
   using Action = std::variant<SendTurn, Deliver, TxArrival>;

   void send_turn(std::uint32_t member, Tick now);
   void dispatch(SyncMessage msg);
   Tick draw_latency(std::uint32_t from, std::uint32_t to, Tick now);
   std::uint32_t random_peer(std::uint32_t self);
   void schedule_arrival(std::uint32_t member, double after);
   void on_ordered(std::uint32_t member, std::size_t newly, Tick now);
   bool honest(std::uint32_t m) const { return behaviors_[m] == Behavior::Honest; }

   HashgraphSimConfig config_;
   std::vector<Behavior> behaviors_;
   std::vector<std::unique_ptr<HashgraphNode>> nodes_;
   Scheduler<Action> scheduler_;
   Rng peer_rng_;
   Rng latency_rng_;
   Rng tx_rng_;
   Rng fork_rng_;
   std::vector<double> next_arrival_;
   std::vector<Tick> channel_clock_;
   std::vector<std::size_t> ordered_seen_;
   std::vector<std::uint16_t> honest_orderings_;
   HashgraphRunResult result_;
   std::size_t honest_submitted_ = 0;
   std::size_t honest_confirmed_ = 0;
   std::uint32_t honest_count_ = 0;
};

/// Runs the hashgraph scenario. Throws ConfigError for n < 2 or a zero horizon.
HashgraphRunResult run_scenario_hashgraph(const HashgraphSimConfig& config);

/// Picks a uniformly random peer and packages the sync (latency drawn from
/// `latency`, plus the node's delay if it is a Delayer).
SyncMessage run_sync_sender(HashgraphNode& node, std::uint32_t member_count, Rng& rng, Tick now,
                            const LatencyModel& latency, bool full_history = false, Tick delay_ticks = 0);

struct PropagationConfig
{
   std::uint32_t n = 8;
   std::uint32_t trials = 1;
   bool ideal_doubling = false; // informed member i pushes to i + 2^t
   std::uint64_t seed = 1;
};

struct PropagationStats
{
   double mean = 0.0;
   Tick min = 0;
   Tick max = 0;
   std::vector<Tick> samples;
};

/// Synchronous rounds: every member syncs once per tick and only members
/// holding the tagged event at the start of the tick spread it. Reports the
/// ticks until all n members hold it.
PropagationStats measure_propagation(const PropagationConfig& config);

} // namespace ledgerlab::gossip
