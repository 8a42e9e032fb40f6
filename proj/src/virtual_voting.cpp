#include <ledgerlab/virtual_voting.hpp>

#include <algorithm>
#include <sstream>

namespace ledgerlab::hashgraph {

Consensus::Consensus(HashgraphView& view, ConsensusOptions options)
   : view_(view), options_(options), supermajority_(supermajority(view.member_count()))
{
   if (options_.coin_period < 2)
      throw ConfigError("coin period must be at least 2 voting rounds");
}

std::span<const EventIdx> Consensus::witnesses(std::uint32_t round) const
{
   if (round == 0 || round > witnesses_.size())
      return {};
   return witnesses_[round - 1];
}

std::vector<EventIdx> Consensus::famous_witnesses(std::uint32_t round) const
{
   std::vector<EventIdx> out;
   for (EventIdx w : witnesses(round))
      if (view_.annotation(w).famous == Fame::Yes)
         out.push_back(w);
   return out;
}

void Consensus::divide_rounds()
{
   const std::uint32_t n = view_.member_count();
   std::vector<bool> creators;
   for (; rounds_done_ < view_.size(); ++rounds_done_) {
      const auto x = static_cast<EventIdx>(rounds_done_);
      const EventIdx sp = view_.self_parent(x);
      const EventIdx op = view_.other_parent(x);

      std::uint32_t round = 1;
      if (sp != kNoEvent || op != kNoEvent) {
         round = 0;
         for (EventIdx p : {sp, op})
            if (p != kNoEvent)
               round = std::max(round, view_.annotation(p).round);
         creators.assign(n, false);
         std::uint32_t count = 0;
         for (EventIdx w : witnesses(round)) {
            const auto c = view_.creator(w).index;
            if (!creators[c] && view_.strongly_sees(x, w)) {
               creators[c] = true;
               ++count;
            }
         }
         if (count >= supermajority_)
            ++round;
      }
      const bool witness = sp == kNoEvent || round > view_.annotation(sp).round;
      view_.set_round(x, round, witness);
      if (witness) {
         if (witnesses_.size() < round)
            witnesses_.resize(round);
         witnesses_[round - 1].push_back(x);
         undecided_.push_back(x);
         ++witness_count_;
      }
      unordered_.push_back(x);
   }
}

const std::vector<EventIdx>& Consensus::strongly_seen_previous(EventIdx witness)
{
   if (auto it = strongly_seen_cache_.find(witness); it != strongly_seen_cache_.end())
      return it->second;
   std::vector<EventIdx> seen;
   for (EventIdx w : witnesses(view_.annotation(witness).round - 1))
      if (view_.strongly_sees(witness, w))
         seen.push_back(w);
   return strongly_seen_cache_.emplace(witness, std::move(seen)).first->second;
}

bool Consensus::vote(Election& el, EventIdx subject, EventIdx voter, bool& decided, bool& value)
{
   if (auto it = el.votes.find(voter); it != el.votes.end())
      return it->second;

   const std::uint32_t d = view_.annotation(voter).round - view_.annotation(subject).round;
   bool v = false;
   if (d == 1) {
      v = view_.sees(voter, subject);
   } else {
      std::uint32_t yes = 0, no = 0;
      for (EventIdx w : strongly_seen_previous(voter))
         (vote(el, subject, w, decided, value) ? yes : no) += 1;
      v = yes >= no;
      const std::uint32_t agreeing = v ? yes : no;
      if (d % options_.coin_period != 0) {
         if (agreeing >= supermajority_ && !decided) {
            decided = true;
            value = v;
         }
      } else if (agreeing < supermajority_) {
         v = (view_.hash(voter).bytes.back() & 1) != 0;
         ++stats_.coin_votes;
      }
   }
   el.votes.emplace(voter, v);
   return v;
}

void Consensus::decide_fame()
{
   if (witness_count_ == witnesses_seen_)
      return;
   witnesses_seen_ = witness_count_;

   std::vector<EventIdx> pending;
   for (EventIdx x : undecided_) {
      Election& el = elections_[x];
      const std::uint32_t xr = view_.annotation(x).round;
      bool decided = false;
      bool value = false;
      std::uint32_t decided_round = 0;
      for (std::uint32_t r = xr + 1; r <= max_round() && !decided; ++r) {
         for (EventIdx y : witnesses_[r - 1]) {
            vote(el, x, y, decided, value);
            if (decided) {
               decided_round = r;
               break;
            }
         }
      }
      if (decided) {
         view_.set_fame(x, value ? Fame::Yes : Fame::No, decided_round);
         ++stats_.elections_decided;
         stats_.longest_election = std::max(stats_.longest_election, decided_round - xr);
         elections_.erase(x);
      } else {
         pending.push_back(x);
      }
   }
   undecided_ = std::move(pending);
}

bool Consensus::round_decided(std::uint32_t round) const
{
   const auto ws = witnesses(round);
   if (ws.empty())
      return false;
   return std::all_of(ws.begin(), ws.end(), [&](EventIdx w) { return view_.annotation(w).famous != Fame::Undecided; });
}

Tick lower_median(std::vector<Tick> values)
{
   if (values.empty())
      throw std::invalid_argument("median of an empty set");
   const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
   std::nth_element(values.begin(), mid, values.end());
   return *mid;
}

std::size_t Consensus::find_order()
{
   const std::size_t before = log_.size();
   std::vector<Tick> stamps;
   while (last_ordered_round_ < max_round()) {
      const std::uint32_t r = last_ordered_round_ + 1;
      if (!round_decided(r))
         break;
      const auto famous = famous_witnesses(r);

      struct Received
      {
         EventIdx event;
         Tick timestamp;
      };
      std::vector<Received> batch;
      std::vector<EventIdx> remaining;
      for (EventIdx x : unordered_) {
         const bool received = !famous.empty() && view_.annotation(x).round <= r &&
                               std::all_of(famous.begin(), famous.end(), [&](EventIdx w) { return view_.sees(w, x); });
         if (!received) {
            remaining.push_back(x);
            continue;
         }
         stamps.clear();
         for (EventIdx w : famous)
            stamps.push_back(view_.event(view_.earliest_descendant_on_chain(w, x)).created_at);
         batch.push_back({x, lower_median(stamps)});
      }
      unordered_ = std::move(remaining);

      std::sort(batch.begin(), batch.end(), [&](const Received& a, const Received& b) {
         if (a.timestamp != b.timestamp)
            return a.timestamp < b.timestamp;
         return view_.hash(a.event) < view_.hash(b.event);
      });
      for (const auto& rec : batch) {
         view_.set_received(rec.event, r, rec.timestamp);
         ordered_events_.push_back(rec.event);
         for (const auto& tx : view_.event(rec.event).transactions)
            log_.push_back({tx, r, rec.timestamp, view_.hash(rec.event)});
      }
      last_ordered_round_ = r;
   }
   if (last_ordered_round_ == 0)
      throw NothingDecidable();
   return log_.size() - before;
}

std::size_t Consensus::consensus_order()
{
   divide_rounds();
   decide_fame();
   try {
      return find_order();
   } catch (const NothingDecidable&) {
      return 0;
   }
}

std::optional<bool> Consensus::ballot(EventIdx voter, EventIdx subject) const
{
   auto el = elections_.find(subject);
   if (el == elections_.end())
      return std::nullopt;
   if (auto it = el->second.votes.find(voter); it != el->second.votes.end())
      return it->second;
   return std::nullopt;
}

namespace {

HashgraphView rebuild(const HashgraphView& view)
{
   HashgraphView fresh(view.member_count());
   for (EventIdx i = 0; i < view.size(); ++i)
      fresh.insert(view.event_ptr(i));
   return fresh;
}

} // namespace

std::vector<RoundInfo> divide_rounds(const HashgraphView& view)
{
   auto copy = rebuild(view);
   Consensus c(copy);
   c.divide_rounds();
   std::vector<RoundInfo> out;
   out.reserve(copy.size());
   for (EventIdx i = 0; i < copy.size(); ++i)
      out.push_back({copy.annotation(i).round, copy.annotation(i).is_witness});
   return out;
}

std::vector<Fame> decide_fame(const HashgraphView& view, ConsensusOptions options)
{
   auto copy = rebuild(view);
   Consensus c(copy, options);
   c.divide_rounds();
   c.decide_fame();
   std::vector<Fame> out;
   out.reserve(copy.size());
   for (EventIdx i = 0; i < copy.size(); ++i)
      out.push_back(copy.annotation(i).famous);
   return out;
}

std::vector<OrderedTransaction> find_order(const HashgraphView& view, ConsensusOptions options)
{
   auto copy = rebuild(view);
   Consensus c(copy, options);
   c.divide_rounds();
   c.decide_fame();
   c.find_order();
   return c.log();
}

std::vector<OrderedTransaction> consensus_order(const HashgraphView& view, ConsensusOptions options)
{
   auto copy = rebuild(view);
   Consensus c(copy, options);
   c.consensus_order();
   return c.log();
}

std::string export_log(std::span<const OrderedTransaction> log)
{
   std::ostringstream out;
   for (const auto& o : log)
      out << o.round_received << '\t' << o.consensus_timestamp << '\t' << o.transaction.id << '\t'
          << o.transaction.submitter.index << '\n';
   return out.str();
}

} // namespace ledgerlab::hashgraph
