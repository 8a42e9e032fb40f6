#include <ledgerlab/gossip.hpp>

#include <algorithm>
#include <unordered_set>

namespace ledgerlab::gossip {

using hashgraph::DagError;
using hashgraph::kNoEvent;

const char* to_string(Behavior b)
{
   switch (b) {
   case Behavior::Honest: return "honest";
   case Behavior::Forker: return "forker";
   case Behavior::Silent: return "silent";
   case Behavior::Delayer: return "delayer";
   }
   return "?";
}

HashgraphNode::HashgraphNode(MemberId self, std::uint32_t member_count, Behavior behavior,
                             hashgraph::ConsensusOptions options)
   : self_(self),
     n_(member_count),
     behavior_(behavior),
     view_(std::make_unique<HashgraphView>(member_count)),
     consensus_(std::make_unique<Consensus>(*view_, options)),
     peer_has_(member_count)
{
   if (self.index >= member_count)
      throw ConfigError("member index outside the member set");
}

std::optional<EventHash> HashgraphNode::latest_own() const
{
   if (last_own_ == kNoEvent)
      return std::nullopt;
   return view_->hash(last_own_);
}

EventHash HashgraphNode::append_own(Event e)
{
   hashgraph::sign(e);
   const EventHash h = view_->insert(std::move(e));
   last_own_ = view_->index_of(h);
   return h;
}

EventHash HashgraphNode::create_genesis(Tick now)
{
   Event e;
   e.creator = self_;
   e.created_at = now;
   return append_own(std::move(e));
}

SyncMessage HashgraphNode::prepare_sync(MemberId to, Tick now, bool full_history, std::span<const EventHash> exclude)
{
   SyncMessage msg;
   msg.from = self_;
   msg.to = to;
   msg.send_tick = now;
   msg.sender_head = latest_own();

   auto& has = peer_has_.at(to.index);
   has.resize(view_->size(), false);
   for (EventIdx i = 0; i < view_->size(); ++i) {
      if (has[i] && !full_history)
         continue;
      if (std::find(exclude.begin(), exclude.end(), view_->hash(i)) != exclude.end())
         continue;
      msg.events.push_back(view_->event_ptr(i));
      has[i] = true;
   }
   return msg;
}

ReceiveResult HashgraphNode::receive_sync(const SyncMessage& msg, Tick now, bool suppress_empty_events)
{
   ReceiveResult res;
   if (behavior_ == Behavior::Silent)
      return res;

   auto& sender_has = peer_has_.at(msg.from.index);
   auto mark = [&](EventIdx i) {
      if (sender_has.size() <= i)
         sender_has.resize(view_->size(), false);
      sender_has[i] = true;
   };

   std::unordered_set<EventHash> quarantined;
   for (const auto& e : msg.events) {
      const EventHash claimed = e->signature.digest;
      if (auto known = view_->find(claimed)) {
         mark(*known);
         continue;
      }
      bool tainted = (e->self_parent && quarantined.contains(*e->self_parent)) ||
                     (e->other_parent && quarantined.contains(*e->other_parent));
      if (!tainted) {
         try {
            mark(view_->index_of(view_->insert(e)));
            ++res.inserted;
         } catch (const DagError&) {
            tainted = true;
         }
      }
      if (tainted) {
         quarantined.insert(claimed);
         quarantined.insert(hashgraph::event_hash(*e));
         ++res.rejected;
      }
   }

   if (suppress_empty_events && res.inserted == 0)
      return res;

   Event ev;
   ev.creator = self_;
   ev.created_at = now;
   ev.self_parent = latest_own();
   if (msg.sender_head && view_->contains(*msg.sender_head) &&
       view_->creator(view_->index_of(*msg.sender_head)) != self_)
      ev.other_parent = msg.sender_head;
   else if (const auto theirs = view_->events_by(msg.from); !theirs.empty() && msg.from != self_)
      ev.other_parent = view_->hash(theirs.back());
   ev.transactions.assign(std::make_move_iterator(pending_.begin()), std::make_move_iterator(pending_.end()));
   pending_.clear();
   res.created = append_own(std::move(ev));

   if (runs_consensus())
      res.newly_ordered = consensus_->consensus_order();
   return res;
}

std::pair<EventHash, EventHash> HashgraphNode::fork(Tick now, std::optional<EventHash> other_a,
                                                   std::optional<EventHash> other_b)
{
   Event a;
   a.creator = self_;
   a.created_at = now;
   a.self_parent = latest_own();
   a.other_parent = other_a;
   a.transactions.assign(std::make_move_iterator(pending_.begin()), std::make_move_iterator(pending_.end()));
   pending_.clear();

   Event b;
   b.creator = self_;
   b.created_at = now;
   b.self_parent = a.self_parent;
   b.other_parent = other_b;
   if (hashgraph::canonical_bytes(a) == hashgraph::canonical_bytes(b))
      b.created_at = now + 1;

   hashgraph::sign(b);
   const EventHash hb = view_->insert(std::move(b));
   const EventHash ha = append_own(std::move(a));
   return {ha, hb};
}

SyncMessage run_sync_sender(HashgraphNode& node, std::uint32_t member_count, Rng& rng, Tick now,
                            const LatencyModel& latency, bool full_history, Tick delay_ticks)
{
   if (member_count < 2)
      throw ConfigError("sync needs at least two members");
   auto target = static_cast<std::uint32_t>(rng.below(member_count - 1));
   if (target >= node.id().index)
      ++target;
   SyncMessage msg = node.prepare_sync(MemberId{target}, now, full_history);
   msg.deliver_tick = now + latency.base + rng.below(latency.jitter + 1);
   if (node.behavior() == Behavior::Delayer)
      msg.deliver_tick += delay_ticks;
   return msg;
}

HashgraphNetwork::HashgraphNetwork(HashgraphSimConfig config)
   : config_(std::move(config)),
     peer_rng_(Rng::derive(config_.seed, 1)),
     latency_rng_(Rng::derive(config_.seed, 2)),
     tx_rng_(Rng::derive(config_.seed, 3)),
     fork_rng_(Rng::derive(config_.seed, 4))
{
   if (config_.n < 2)
      throw ConfigError("hashgraph scenario needs n >= 2");
   if (config_.horizon == 0)
      throw ConfigError("zero horizon");
   if (config_.sync_period == 0)
      throw ConfigError("sync period must be positive");
   if (config_.tx_rate < 0)
      throw ConfigError("negative transaction rate");
   behaviors_ = config_.behaviors;
   if (behaviors_.empty())
      behaviors_.assign(config_.n, Behavior::Honest);
   if (behaviors_.size() != config_.n)
      throw ConfigError("behavior list length differs from n");

   for (std::uint32_t i = 0; i < config_.n; ++i) {
      nodes_.push_back(std::make_unique<HashgraphNode>(MemberId{i}, config_.n, behaviors_[i], config_.consensus));
      if (honest(i))
         ++honest_count_;
   }
   next_arrival_.assign(config_.n, 0.0);
   channel_clock_.assign(static_cast<std::size_t>(config_.n) * config_.n, 0);
   ordered_seen_.assign(config_.n, 0);
}

std::uint32_t HashgraphNetwork::random_peer(std::uint32_t self)
{
   auto target = static_cast<std::uint32_t>(peer_rng_.below(config_.n - 1));
   return target >= self ? target + 1 : target;
}

Tick HashgraphNetwork::draw_latency(std::uint32_t from, std::uint32_t to, Tick now)
{
   Tick t = now + config_.latency.base + latency_rng_.below(config_.latency.jitter + 1);
   if (behaviors_[from] == Behavior::Delayer)
      t += config_.delay_ticks;
   // Channels are FIFO, so a sync never overtakes an earlier one on the same link.
   Tick& clock = channel_clock_[static_cast<std::size_t>(from) * config_.n + to];
   t = std::max(t, clock);
   clock = t;
   return t;
}

void HashgraphNetwork::dispatch(SyncMessage msg)
{
   msg.deliver_tick = draw_latency(msg.from.index, msg.to.index, msg.send_tick);
   ++result_.messages_sent;
   if (config_.record_messages)
      result_.messages.push_back(
         {msg.send_tick, msg.deliver_tick, msg.from.index, msg.to.index, msg.events.size()});
   const Tick at = msg.deliver_tick;
   scheduler_.push(at, Deliver{std::make_shared<SyncMessage>(std::move(msg))});
}

void HashgraphNetwork::send_turn(std::uint32_t member, Tick now)
{
   HashgraphNode& node = *nodes_[member];
   if (node.behavior() == Behavior::Forker && config_.n >= 3 && fork_rng_.bernoulli(config_.fork_rate)) {
      std::vector<std::uint32_t> others;
      for (std::uint32_t m = 0; m < config_.n; ++m)
         if (m != member)
            others.push_back(m);
      for (std::size_t i = others.size(); i > 1; --i)
         std::swap(others[i - 1], others[fork_rng_.below(i)]);

      std::vector<EventHash> parents;
      for (auto m : others)
         if (const auto evs = node.view().events_by(MemberId{m}); !evs.empty())
            parents.push_back(node.view().hash(evs.back()));
      std::optional<EventHash> pa, pb;
      if (!parents.empty())
         pa = parents[0];
      if (parents.size() > 1)
         pb = parents[1];

      const auto [fa, fb] = node.fork(now, pa, pb);
      result_.events_created += 2;
      const std::size_t half = others.size() / 2;
      for (std::size_t i = 0; i < others.size(); ++i) {
         const bool first = i < half;
         const EventHash hidden = first ? fb : fa;
         SyncMessage msg = nodes_[member]->prepare_sync(MemberId{others[i]}, now, config_.full_history, {&hidden, 1});
         msg.sender_head = first ? fa : fb;
         dispatch(std::move(msg));
      }
      return;
   }
   dispatch(node.prepare_sync(MemberId{random_peer(member)}, now, config_.full_history));
}

void HashgraphNetwork::schedule_arrival(std::uint32_t member, double after)
{
   next_arrival_[member] += after;
   const auto at = static_cast<Tick>(next_arrival_[member]);
   if (at < config_.horizon)
      scheduler_.push(at, TxArrival{member});
}

void HashgraphNetwork::on_ordered(std::uint32_t member, std::size_t newly, Tick now)
{
   if (!honest(member) || newly == 0)
      return;
   const auto& log = nodes_[member]->consensus().log();
   for (std::size_t k = log.size() - newly; k < log.size(); ++k) {
      const auto& tx = log[k].transaction;
      const std::size_t slot = tx.id - 1;
      if (++honest_orderings_[slot] == honest_count_) {
         result_.confirmed_at[slot] = now;
         if (honest(tx.submitter.index))
            ++honest_confirmed_;
      }
   }
}

HashgraphRunResult HashgraphNetwork::run(const Observer& observer)
{
   result_ = {};
   result_.behaviors = behaviors_;

   for (std::uint32_t i = 0; i < config_.n; ++i) {
      if (behaviors_[i] == Behavior::Silent)
         continue;
      nodes_[i]->create_genesis(0);
      ++result_.events_created;
      scheduler_.push(1 + peer_rng_.below(config_.sync_period), SendTurn{i});
      if (config_.tx_rate > 0)
         schedule_arrival(i, tx_rng_.exponential(1.0 / config_.tx_rate));
   }

   const Tick end = config_.horizon + config_.drain_ticks;
   Tick now = 0;
   while (!scheduler_.empty() && scheduler_.next_tick() <= end) {
      auto entry = scheduler_.pop();
      now = entry.at;
      if (auto* turn = std::get_if<SendTurn>(&entry.action)) {
         send_turn(turn->member, now);
         scheduler_.push(now + config_.sync_period, SendTurn{turn->member});
      } else if (auto* del = std::get_if<Deliver>(&entry.action)) {
         const SyncMessage& msg = *del->message;
         const auto res = nodes_[msg.to.index]->receive_sync(msg, now, config_.suppress_empty_events);
         if (res.created)
            ++result_.events_created;
         result_.rejected_events += res.rejected;
         on_ordered(msg.to.index, res.newly_ordered, now);
      } else if (auto* arrival = std::get_if<TxArrival>(&entry.action)) {
         const std::uint32_t m = arrival->member;
         Transaction tx;
         tx.id = result_.transactions.size() + 1;
         tx.submitter = MemberId{m};
         tx.submitted_at = now;
         tx.payload.resize(config_.payload_bytes);
         for (auto& b : tx.payload)
            b = static_cast<std::uint8_t>(tx_rng_.below(256));
         nodes_[m]->submit(tx);
         result_.transactions.push_back(std::move(tx));
         result_.confirmed_at.emplace_back();
         honest_orderings_.push_back(0);
         if (honest(m))
            ++honest_submitted_;
         schedule_arrival(m, tx_rng_.exponential(1.0 / config_.tx_rate));
      }
      if (observer)
         observer(*this, now);
      if (now >= config_.horizon && honest_confirmed_ == honest_submitted_)
         break;
   }
   result_.end_tick = now;
   result_.converged = honest_confirmed_ == honest_submitted_;

   std::vector<std::uint32_t> honest_members;
   for (std::uint32_t i = 0; i < config_.n; ++i)
      if (honest(i))
         honest_members.push_back(i);

   result_.logs.resize(config_.n);
   result_.common_round = std::numeric_limits<std::uint32_t>::max();
   for (auto i : honest_members) {
      result_.logs[i] = nodes_[i]->consensus().log();
      result_.common_round = std::min(result_.common_round, nodes_[i]->consensus().last_ordered_round());
      result_.coin_votes += nodes_[i]->consensus().stats().coin_votes;
      result_.longest_election = std::max(result_.longest_election, nodes_[i]->consensus().stats().longest_election);
   }
   if (honest_members.empty())
      result_.common_round = 0;

   for (std::size_t a = 0; a < honest_members.size() && result_.agreement; ++a) {
      for (std::size_t b = a + 1; b < honest_members.size() && result_.agreement; ++b) {
         const auto& la = result_.logs[honest_members[a]];
         const auto& lb = result_.logs[honest_members[b]];
         const std::size_t common = std::min(la.size(), lb.size());
         for (std::size_t k = 0; k < common; ++k) {
            if (!(la[k] == lb[k])) {
               result_.agreement = false;
               result_.divergence = "members " + std::to_string(honest_members[a]) + " and " +
                                    std::to_string(honest_members[b]) + " differ at log position " +
                                    std::to_string(k);
               break;
            }
         }
      }
   }

   for (std::uint32_t m = 0; m < config_.n; ++m) {
      const bool flagged = !honest_members.empty() && std::all_of(honest_members.begin(), honest_members.end(),
                                                                   [&](auto h) {
                                                                      return nodes_[h]->view().has_equivocated(
                                                                         MemberId{m});
                                                                   });
      if (flagged)
         result_.equivocators_detected.push_back(m);
   }

   if (!honest_members.empty()) {
      const auto& view = nodes_[honest_members.front()]->view();
      for (EventIdx i = 0; i < view.size(); ++i)
         for (const auto& tx : view.event(i).transactions)
            result_.receive_order.push_back(tx.id);
   }
   return result_;
}

HashgraphRunResult run_scenario_hashgraph(const HashgraphSimConfig& config)
{
   HashgraphNetwork net(config);
   return net.run();
}

PropagationStats measure_propagation(const PropagationConfig& config)
{
   if (config.n == 0 || config.trials == 0)
      throw ConfigError("propagation needs n >= 1 and at least one trial");
   Rng rng = Rng::derive(config.seed, 7);
   PropagationStats stats;
   stats.min = std::numeric_limits<Tick>::max();
   std::vector<bool> informed, next;
   for (std::uint32_t trial = 0; trial < config.trials; ++trial) {
      informed.assign(config.n, false);
      informed[0] = true;
      std::uint32_t count = 1;
      Tick ticks = 0;
      while (count < config.n) {
         ++ticks;
         next = informed;
         if (config.ideal_doubling) {
            const std::uint32_t k = count;
            for (std::uint32_t i = 0; i < k && i + k < config.n; ++i)
               next[i + k] = true;
         } else {
            for (std::uint32_t i = 0; i < config.n; ++i) {
               auto target = static_cast<std::uint32_t>(rng.below(config.n - 1));
               if (target >= i)
                  ++target;
               if (informed[i])
                  next[target] = true;
            }
         }
         informed.swap(next);
         count = static_cast<std::uint32_t>(std::count(informed.begin(), informed.end(), true));
      }
      stats.samples.push_back(ticks);
   }
   double sum = 0;
   for (auto s : stats.samples) {
      sum += static_cast<double>(s);
      stats.min = std::min(stats.min, s);
      stats.max = std::max(stats.max, s);
   }
   stats.mean = sum / static_cast<double>(stats.samples.size());
   return stats;
}

} // namespace ledgerlab::gossip
