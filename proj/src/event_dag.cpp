#include <ledgerlab/event_dag.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <istream>
#include <ostream>

namespace ledgerlab {

std::string Digest::hex() const
{
   static constexpr char kDigits[] = "0123456789abcdef";
   std::string s;
   s.reserve(64);
   for (auto b : bytes) {
      s.push_back(kDigits[b >> 4]);
      s.push_back(kDigits[b & 0xf]);
   }
   return s;
}

Digest sha256(const std::vector<std::uint8_t>& data)
{
   Digest d;
   unsigned int len = 0;
   if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
      throw std::runtime_error("sha256 failed");
   return d;
}

} // namespace ledgerlab

namespace ledgerlab::hashgraph {

std::vector<std::uint8_t> canonical_bytes(const Event& e)
{
   std::vector<std::uint8_t> out;
   out.reserve(4 + 8 + 64 + 4 + e.transactions.size() * 32);
   wire::put_u32(out, e.creator.index);
   wire::put_u64(out, e.created_at);
   wire::put_digest(out, e.self_parent.value_or(Digest{}));
   wire::put_digest(out, e.other_parent.value_or(Digest{}));
   wire::put_u32(out, static_cast<std::uint32_t>(e.transactions.size()));
   for (const auto& tx : e.transactions) {
      wire::put_u64(out, tx.id);
      wire::put_u32(out, tx.submitter.index);
      wire::put_u64(out, tx.submitted_at);
      wire::put_u32(out, static_cast<std::uint32_t>(tx.payload.size()));
      out.insert(out.end(), tx.payload.begin(), tx.payload.end());
   }
   return out;
}

Event decode_event(std::span<const std::uint8_t> bytes)
{
   wire::Reader r(bytes.data(), bytes.size());
   Event e;
   e.creator.index = r.u32();
   e.created_at = r.u64();
   if (auto sp = r.digest(); !sp.is_zero())
      e.self_parent = sp;
   if (auto op = r.digest(); !op.is_zero())
      e.other_parent = op;
   const auto count = r.u32();
   e.transactions.reserve(count);
   for (std::uint32_t i = 0; i < count; ++i) {
      Transaction tx;
      tx.id = r.u64();
      tx.submitter.index = r.u32();
      tx.submitted_at = r.u64();
      tx.payload = r.bytes(r.u32());
      e.transactions.push_back(std::move(tx));
   }
   if (!r.done())
      throw ParseError("trailing bytes after event record");
   return e;
}

EventHash event_hash(const Event& e) { return sha256(canonical_bytes(e)); }

void sign(Event& e) { e.signature = Signature{e.creator, event_hash(e)}; }

bool verify_signature(const Event& e)
{
   return e.signature.signer == e.creator && e.signature.digest == event_hash(e);
}

std::uint32_t supermajority(std::uint32_t n)
{
   if (n == 0)
      throw ConfigError("supermajority of zero members");
   return 2 * n / 3 + 1;
}

const char* to_string(DagErrorKind k)
{
   switch (k) {
   case DagErrorKind::MissingParent: return "MissingParent";
   case DagErrorKind::BadSelfParent: return "BadSelfParent";
   case DagErrorKind::BadOtherParent: return "BadOtherParent";
   case DagErrorKind::DuplicateHash: return "DuplicateHash";
   case DagErrorKind::BadSignature: return "BadSignature";
   case DagErrorKind::UnknownEvent: return "UnknownEvent";
   }
   return "DagError";
}

HashgraphView::HashgraphView(std::uint32_t member_count)
   : n_(member_count), by_creator_(member_count), equivocators_(member_count, false), depth_counts_(member_count)
{
   if (n_ == 0)
      throw ConfigError("view needs at least one member");
}

std::optional<EventIdx> HashgraphView::find(const EventHash& h) const
{
   if (auto it = index_.find(h); it != index_.end())
      return it->second;
   return std::nullopt;
}

EventIdx HashgraphView::index_of(const EventHash& h) const
{
   if (auto it = index_.find(h); it != index_.end())
      return it->second;
   throw DagError(DagErrorKind::UnknownEvent, h.short_hex());
}

EventHash HashgraphView::insert(std::shared_ptr<const Event> e)
{
   const Event& ev = *e;
   if (ev.creator.index >= n_)
      throw DagError(DagErrorKind::BadSignature, "creator outside the member set");
   if (!verify_signature(ev))
      throw DagError(DagErrorKind::BadSignature, "signature token does not match event");
   const EventHash h = ev.signature.digest;
   if (index_.contains(h))
      throw DagError(DagErrorKind::DuplicateHash, h.short_hex());

   Record rec;
   rec.hash = h;
   if (ev.self_parent) {
      auto sp = find(*ev.self_parent);
      if (!sp)
         throw DagError(DagErrorKind::MissingParent, "self-parent " + ev.self_parent->short_hex());
      if (creator(*sp) != ev.creator)
         throw DagError(DagErrorKind::BadSelfParent, "self-parent created by another member");
      rec.self_parent = *sp;
      rec.depth = records_[*sp].depth + 1;
   } else if (!by_creator_[ev.creator.index].empty()) {
      throw DagError(DagErrorKind::BadSelfParent, "only a member's first event may omit its self-parent");
   }
   if (ev.other_parent) {
      auto op = find(*ev.other_parent);
      if (!op)
         throw DagError(DagErrorKind::MissingParent, "other-parent " + ev.other_parent->short_hex());
      if (creator(*op) == ev.creator)
         throw DagError(DagErrorKind::BadOtherParent, "other-parent created by the same member");
      rec.other_parent = *op;
   }

   const auto idx = static_cast<EventIdx>(records_.size());
   if (rec.self_parent == kNoEvent) {
      rec.jump = idx;
   } else {
      const EventIdx p = rec.self_parent;
      const EventIdx j = records_[p].jump;
      const EventIdx jj = records_[j].jump;
      if (records_[p].depth - records_[j].depth == records_[j].depth - records_[jj].depth)
         rec.jump = jj;
      else
         rec.jump = p;
   }
   rec.event = std::move(e);

   auto& counts = depth_counts_[ev.creator.index];
   if (counts.size() <= rec.depth)
      counts.resize(rec.depth + 1, 0);
   if (++counts[rec.depth] > 1)
      equivocators_[ev.creator.index] = true;

   records_.push_back(std::move(rec));
   index_.emplace(h, idx);
   by_creator_[ev.creator.index].push_back(idx);
   annotations_.emplace_back();
   compute_heads(idx);
   return h;
}

EventIdx HashgraphView::climb(EventIdx from, std::uint32_t depth) const
{
   EventIdx x = from;
   while (records_[x].depth > depth) {
      const EventIdx j = records_[x].jump;
      x = records_[j].depth >= depth ? j : records_[x].self_parent;
   }
   return x;
}

std::span<const EventIdx> HashgraphView::heads(EventIdx a, MemberId m) const
{
   const std::uint32_t& slot = head_slots_[static_cast<std::size_t>(a) * n_ + m.index];
   if (slot == kNoEvent)
      return {};
   if (slot & kMulti)
      return multi_heads_[slot & ~kMulti];
   return {&slot, 1};
}

void HashgraphView::compute_heads(EventIdx idx)
{
   const Record& rec = records_[idx];
   const MemberId self = rec.event->creator;
   head_slots_.resize(head_slots_.size() + n_, kNoEvent);

   auto parent_slot = [&](EventIdx parent, std::uint32_t c) {
      return parent == kNoEvent ? kNoEvent : head_slots_[static_cast<std::size_t>(parent) * n_ + c];
   };

   // Each parent's head set is already an antichain, so a candidate can only
   // be dominated by one coming from the other side.
   struct Candidate
   {
      EventIdx event;
      std::uint8_t sides;
   };
   std::vector<Candidate> candidates;
   for (std::uint32_t c = 0; c < n_; ++c) {
      std::uint32_t& slot = head_slots_[static_cast<std::size_t>(idx) * n_ + c];
      const std::uint32_t sp = parent_slot(rec.self_parent, c);
      const std::uint32_t op = parent_slot(rec.other_parent, c);
      if (c != self.index && (op == kNoEvent || op == sp)) {
         slot = sp; // shares the self-parent's entry, multi sets included
         continue;
      }
      if (c != self.index && sp == kNoEvent) {
         slot = op;
         continue;
      }
      if (c == self.index && (op == kNoEvent || (!(op & kMulti) && is_self_ancestor(idx, op)))) {
         // Own chain without a fork below the other-parent.
         if (sp == kNoEvent || !(sp & kMulti)) {
            slot = idx;
            continue;
         }
      }

      candidates.clear();
      const EventIdx sides[2] = {rec.self_parent, rec.other_parent};
      for (std::uint8_t s = 0; s < 2; ++s) {
         if (sides[s] == kNoEvent)
            continue;
         for (EventIdx h : heads(sides[s], MemberId{c}))
            candidates.push_back({h, static_cast<std::uint8_t>(1u << s)});
      }
      if (c == self.index)
         candidates.push_back({idx, 4});
      std::sort(candidates.begin(), candidates.end(),
                [](const Candidate& a, const Candidate& b) { return a.event < b.event; });
      std::size_t out = 0;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
         if (out > 0 && candidates[out - 1].event == candidates[i].event)
            candidates[out - 1].sides |= candidates[i].sides;
         else
            candidates[out++] = candidates[i];
      }
      candidates.resize(out);

      std::vector<EventIdx> maximal;
      for (const Candidate& x : candidates) {
         bool dominated = false;
         for (const Candidate& y : candidates) {
            if ((x.sides & y.sides) || records_[y.event].depth <= records_[x.event].depth)
               continue;
            if (is_self_ancestor(y.event, x.event)) {
               dominated = true;
               break;
            }
         }
         if (!dominated)
            maximal.push_back(x.event);
      }

      if (maximal.size() == 1) {
         slot = maximal.front();
      } else if (maximal.size() > 1) {
         slot = kMulti | static_cast<std::uint32_t>(multi_heads_.size());
         multi_heads_.push_back(std::move(maximal));
      }
   }
}

bool HashgraphView::is_self_ancestor(EventIdx a, EventIdx b) const
{
   if (creator(a) != creator(b) || records_[b].depth > records_[a].depth)
      return false;
   return climb(a, records_[b].depth) == b;
}

bool HashgraphView::is_ancestor(EventIdx a, EventIdx b) const
{
   if (b > a)
      return false; // parents are always inserted first
   for (EventIdx h : heads(a, creator(b)))
      if (is_self_ancestor(h, b))
         return true;
   return false;
}

bool HashgraphView::sees(EventIdx a, EventIdx b) const
{
   return !fork_in_ancestry(a, creator(b)) && is_ancestor(a, b);
}

EventIdx HashgraphView::earliest_descendant_on_chain(EventIdx head, EventIdx target) const
{
   if (!is_ancestor(head, target))
      return kNoEvent;
   EventIdx cur = head;
   for (;;) {
      const EventIdx sp = records_[cur].self_parent;
      if (sp == kNoEvent || !is_ancestor(sp, target))
         return cur;
      const EventIdx j = records_[cur].jump;
      cur = (j != cur && j != sp && is_ancestor(j, target)) ? j : sp;
   }
}

bool HashgraphView::strongly_sees(EventIdx a, EventIdx b) const
{
   const std::uint32_t needed = supermajority(n_);
   std::uint32_t count = 0;
   for (std::uint32_t c = 0; c < n_ && count < needed; ++c) {
      const auto hs = heads(a, MemberId{c});
      if (hs.size() != 1)
         continue; // a sees no event of a forked (or absent) creator
      const EventIdx h = hs.front();
      if (sees(h, b)) {
         ++count;
         continue;
      }
      if (!is_ancestor(h, b))
         continue;
      // b is below h but b's creator forked inside h's ancestry. Earlier
      // chain events have smaller ancestries; the earliest one holding b is
      // the only candidate that might still see it.
      const EventIdx s = earliest_descendant_on_chain(h, b);
      if (sees(s, b))
         ++count;
   }
   return count >= needed;
}

std::vector<std::pair<EventHash, EventHash>> HashgraphView::detect_forks(MemberId m) const
{
   std::vector<std::pair<EventHash, EventHash>> pairs;
   if (!has_equivocated(m))
      return pairs;
   const auto& evs = by_creator_.at(m.index);
   for (std::size_t i = 0; i < evs.size(); ++i)
      for (std::size_t j = i + 1; j < evs.size(); ++j)
         if (!is_self_ancestor(evs[i], evs[j]) && !is_self_ancestor(evs[j], evs[i]))
            pairs.emplace_back(hash(evs[i]), hash(evs[j]));
   return pairs;
}

void HashgraphView::set_round(EventIdx i, std::uint32_t round, bool witness)
{
   auto& a = annotations_[i];
   if (a.round != 0 && (a.round != round || a.is_witness != witness))
      throw std::logic_error("round annotation is write-once");
   a.round = round;
   a.is_witness = witness;
}

void HashgraphView::set_fame(EventIdx i, Fame fame, std::uint32_t decided_round)
{
   auto& a = annotations_[i];
   if (a.famous != Fame::Undecided && a.famous != fame)
      throw std::logic_error("fame decisions are write-once");
   a.famous = fame;
   a.fame_decided_round = decided_round;
}

void HashgraphView::set_received(EventIdx i, std::uint32_t round_received, Tick consensus_timestamp)
{
   auto& a = annotations_[i];
   if (a.round_received != 0)
      throw std::logic_error("event already ordered");
   a.round_received = round_received;
   a.consensus_timestamp = consensus_timestamp;
}

void write_event_trace(std::ostream& out, const HashgraphView& view)
{
   std::vector<std::uint8_t> buf{'H', 'G', 'E', 'V'};
   wire::put_u32(buf, kTraceVersion);
   wire::put_u32(buf, view.member_count());
   wire::put_u32(buf, static_cast<std::uint32_t>(view.size()));
   for (EventIdx i = 0; i < view.size(); ++i) {
      auto rec = canonical_bytes(view.event(i));
      wire::put_u32(buf, static_cast<std::uint32_t>(rec.size()));
      buf.insert(buf.end(), rec.begin(), rec.end());
   }
   out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

EventTrace read_event_trace(std::istream& in)
{
   std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
   if (buf.size() < 16 || std::memcmp(buf.data(), "HGEV", 4) != 0)
      throw ParseError("not an event trace (bad magic)");
   wire::Reader header(buf.data() + 4, 12);
   const auto version = header.u32();
   if (version != kTraceVersion)
      throw ParseError("unsupported trace version " + std::to_string(version));
   EventTrace trace;
   trace.member_count = header.u32();
   const auto count = header.u32();

   std::size_t pos = 16;
   trace.events.reserve(count);
   for (std::uint32_t i = 0; i < count; ++i) {
      wire::Reader len(buf.data() + pos, buf.size() - pos);
      const auto size = len.u32();
      pos += 4;
      if (buf.size() - pos < size)
         throw ParseError("truncated event record " + std::to_string(i));
      Event e = decode_event({buf.data() + pos, size});
      sign(e);
      trace.events.push_back(std::move(e));
      pos += size;
   }
   if (pos != buf.size())
      throw ParseError("trailing bytes after last event record");
   return trace;
}

} // namespace ledgerlab::hashgraph
