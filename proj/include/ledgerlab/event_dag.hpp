#pragma once

#include <ledgerlab/types.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ledgerlab::hashgraph {

using EventHash = Digest;

/// Position of an event in one view's insertion order. Only meaningful
/// relative to the view that produced it.
using EventIdx = std::uint32_t;
inline constexpr EventIdx kNoEvent = 0xffffffffu;

/// Simulated signature: the signer plus the digest it vouches for. Signatures
/// cannot be forged by construction; a token whose signer or digest does not
/// match the event is rejected on insertion.
struct Signature
{
   MemberId signer;
   EventHash digest;

   bool operator==(const Signature&) const = default;
};

struct Event
{
   MemberId creator;
   Tick created_at = 0;
   std::optional<EventHash> self_parent;
   std::optional<EventHash> other_parent;
   std::vector<Transaction> transactions;
   Signature signature;
};

/// Canonical serialization: creator, created_at, self-parent digest (zeros if
/// absent), other-parent digest (zeros if absent), tx count, transactions.
/// Integers are little-endian. The signature is not part of the bytes.
std::vector<std::uint8_t> canonical_bytes(const Event& e);
Event decode_event(std::span<const std::uint8_t> bytes);
EventHash event_hash(const Event& e);

/// Stamps `e` with a valid signature token from its creator.
void sign(Event& e);
bool verify_signature(const Event& e);

/// Smallest integer strictly greater than 2n/3. Throws ConfigError for n = 0.
std::uint32_t supermajority(std::uint32_t n);

enum class DagErrorKind
{
   MissingParent,
   BadSelfParent,
   BadOtherParent,
   DuplicateHash,
   BadSignature,
   UnknownEvent,
};

const char* to_string(DagErrorKind k);

class DagError : public Error
{
public:
   DagError(DagErrorKind kind, const std::string& detail) : Error(to_string(kind), detail), kind_(kind) {}

   DagErrorKind kind() const noexcept { return kind_; }

private:
   DagErrorKind kind_;
};

enum class Fame : std::uint8_t
{
   Undecided,
   Yes,
   No,
};

/// Consensus annotations attached to each stored event. `round` and
/// `is_witness` are write-once; fame only moves away from Undecided once.
struct Annotation
{
   std::uint32_t round = 0; // 0 until divide_rounds has visited the event
   bool is_witness = false;
   Fame famous = Fame::Undecided;
   std::uint32_t fame_decided_round = 0;
   std::uint32_t round_received = 0; // 0 until ordered
   std::optional<Tick> consensus_timestamp;
};

/// One member's append-only DAG of events.
///
/// Alongside the raw events the view keeps, per event and per creator, the
/// maximal events of that creator inside the event's ancestry ("heads"). A
/// creator appears with one head iff it has no fork inside that ancestry,
/// which makes ancestor / see / strongly-see queries cheap without memo
/// tables. Self-parent chains carry skew-binary jump pointers so climbing to
/// a given chain depth is logarithmic.
class HashgraphView
{
public:
   explicit HashgraphView(std::uint32_t member_count);

   /// Validates and stores the event. Throws DagError.
   EventHash insert(std::shared_ptr<const Event> e);
   EventHash insert(Event e) { return insert(std::make_shared<const Event>(std::move(e))); }

   std::uint32_t member_count() const { return n_; }
   std::size_t size() const { return records_.size(); }
   bool contains(const EventHash& h) const { return index_.contains(h); }
   std::optional<EventIdx> find(const EventHash& h) const;
   EventIdx index_of(const EventHash& h) const; // throws UnknownEvent

   const Event& event(EventIdx i) const { return *records_[i].event; }
   const std::shared_ptr<const Event>& event_ptr(EventIdx i) const { return records_[i].event; }
   const EventHash& hash(EventIdx i) const { return records_[i].hash; }
   MemberId creator(EventIdx i) const { return records_[i].event->creator; }
   EventIdx self_parent(EventIdx i) const { return records_[i].self_parent; }
   EventIdx other_parent(EventIdx i) const { return records_[i].other_parent; }
   /// Number of self-parent hops down to the creator's first event.
   std::uint32_t chain_depth(EventIdx i) const { return records_[i].depth; }

   std::span<const EventIdx> events_by(MemberId m) const { return by_creator_.at(m.index); }

   /// True when this view holds two events by `m` at the same chain depth.
   bool has_equivocated(MemberId m) const { return equivocators_.at(m.index); }

   // Visibility predicates. Ancestor relations are reflexive.
   bool is_ancestor(EventIdx a, EventIdx b) const;
   bool is_self_ancestor(EventIdx a, EventIdx b) const;
   bool sees(EventIdx a, EventIdx b) const;
   bool strongly_sees(EventIdx a, EventIdx b) const;

   bool is_ancestor(const EventHash& a, const EventHash& b) const { return is_ancestor(index_of(a), index_of(b)); }
   bool is_self_ancestor(const EventHash& a, const EventHash& b) const
   {
      return is_self_ancestor(index_of(a), index_of(b));
   }
   bool sees(const EventHash& a, const EventHash& b) const { return sees(index_of(a), index_of(b)); }
   bool strongly_sees(const EventHash& a, const EventHash& b) const
   {
      return strongly_sees(index_of(a), index_of(b));
   }

   /// All unordered pairs of events by `m` where neither is a self-ancestor
   /// of the other.
   std::vector<std::pair<EventHash, EventHash>> detect_forks(MemberId m) const;

   /// Whether `a`'s ancestry contains a fork pair by `m`.
   bool fork_in_ancestry(EventIdx a, MemberId m) const { return heads(a, m).size() > 1; }

   /// Maximal events by `m` inside `a`'s ancestry.
   std::span<const EventIdx> heads(EventIdx a, MemberId m) const;

   /// Earliest event on `head`'s self-parent chain that has `target` as an
   /// ancestor, or kNoEvent if `head` itself does not.
   EventIdx earliest_descendant_on_chain(EventIdx head, EventIdx target) const;

   const Annotation& annotation(EventIdx i) const { return annotations_[i]; }
   void set_round(EventIdx i, std::uint32_t round, bool witness);
   void set_fame(EventIdx i, Fame fame, std::uint32_t decided_round);
   void set_received(EventIdx i, std::uint32_t round_received, Tick consensus_timestamp);

private:
   struct Record
   {
      std::shared_ptr<const Event> event;
      EventHash hash;
      EventIdx self_parent = kNoEvent;
      EventIdx other_parent = kNoEvent;
      EventIdx jump = kNoEvent;
      std::uint32_t depth = 0;
   };

   static constexpr std::uint32_t kMulti = 0x80000000u;

   EventIdx climb(EventIdx from, std::uint32_t depth) const;
   void compute_heads(EventIdx idx);

   std::uint32_t n_;
   std::vector<Record> records_;
   std::unordered_map<EventHash, EventIdx> index_;
   std::vector<std::vector<EventIdx>> by_creator_;
   std::vector<bool> equivocators_;
   std::vector<std::vector<std::uint32_t>> depth_counts_; // per creator: events at each depth

   // n slots per event: kNoEvent, a single head, or kMulti | slot in multi_heads_.
   std::vector<std::uint32_t> head_slots_;
   std::vector<std::vector<EventIdx>> multi_heads_;

   std::vector<Annotation> annotations_;
};

/// Event trace file: 16-byte header ("HGEV", version, member count, event
/// count) followed by u32-length-prefixed canonical event records.
struct EventTrace
{
   std::uint32_t member_count = 0;
   std::vector<Event> events; // signatures restored on read
};

inline constexpr std::uint32_t kTraceVersion = 1;

void write_event_trace(std::ostream& out, const HashgraphView& view);
EventTrace read_event_trace(std::istream& in);

} // namespace ledgerlab::hashgraph
