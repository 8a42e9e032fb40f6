#pragma once

// Test-only helpers: random DAG construction, brute-force reference
// implementations of the hashgraph predicates, a scripted sync driver and an
// exact absorption solver for tangle walks.

#include <ledgerlab/event_dag.hpp>
#include <ledgerlab/gossip.hpp>
#include <ledgerlab/tangle.hpp>
#include <ledgerlab/virtual_voting.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ledgerlab::testkit {

using hashgraph::Event;
using hashgraph::EventHash;
using hashgraph::Fame;
using hashgraph::HashgraphView;

inline Transaction make_tx(std::uint64_t id, std::uint32_t submitter, Tick at)
{
   Transaction tx;
   tx.id = id;
   tx.submitter = MemberId{submitter};
   tx.submitted_at = at;
   tx.payload = {static_cast<std::uint8_t>(id), static_cast<std::uint8_t>(id >> 8)};
   return tx;
}

/// Builds signed events by hand. Events are appended to `events` in creation
/// order, which is always a valid insertion order.
class DagBuilder
{
public:
   explicit DagBuilder(std::uint32_t n) : n_(n), last_(n, -1) {}

   /// New event by `creator` on top of its latest event, with `other` (index
   /// into events()) as other-parent, or none when other < 0.
   int add(std::uint32_t creator, int other = -1, std::vector<Transaction> txs = {})
   {
      return add_with_self(creator, last_[creator], other, std::move(txs));
   }

   /// Explicit self-parent; used to build forks.
   int add_with_self(std::uint32_t creator, int self, int other, std::vector<Transaction> txs = {})
   {
      Event e;
      e.creator = MemberId{creator};
      e.created_at = ++clock_;
      if (self >= 0)
         e.self_parent = hashes_[self];
      if (other >= 0)
         e.other_parent = hashes_[other];
      e.transactions = std::move(txs);
      hashgraph::sign(e);
      hashes_.push_back(e.signature.digest);
      events_.push_back(std::move(e));
      const int idx = static_cast<int>(events_.size()) - 1;
      last_[creator] = idx;
      creators_.push_back(creator);
      self_.push_back(self);
      other_.push_back(other);
      return idx;
   }

   std::uint32_t n() const { return n_; }
   const std::vector<Event>& events() const { return events_; }
   const EventHash& hash(int i) const { return hashes_[i]; }
   int last(std::uint32_t creator) const { return last_[creator]; }
   std::uint32_t creator(int i) const { return creators_[i]; }
   int self_parent(int i) const { return self_[i]; }
   int other_parent(int i) const { return other_[i]; }

   HashgraphView view() const
   {
      HashgraphView v(n_);
      for (const auto& e : events_)
         v.insert(e);
      return v;
   }

private:
   std::uint32_t n_;
   Tick clock_ = 0;
   std::vector<int> last_;
   std::vector<Event> events_;
   std::vector<EventHash> hashes_;
   std::vector<std::uint32_t> creators_;
   std::vector<int> self_, other_;
};

/// Random DAG of at most `max_events` events. With `fork_prob` > 0 the
/// designated forker (member n-1) sometimes reuses an older self-parent.
inline DagBuilder random_dag(Rng& rng, std::uint32_t n, std::size_t max_events, double fork_prob = 0.0)
{
   DagBuilder b(n);
   for (std::uint32_t c = 0; c < n; ++c)
      b.add(c);
   while (b.events().size() < max_events) {
      const auto c = static_cast<std::uint32_t>(rng.below(n));
      int other = -1;
      if (n > 1) {
         // Other-parent: a random event by a different creator, biased to recent ones.
         std::vector<int> candidates;
         for (int i = 0; i < static_cast<int>(b.events().size()); ++i)
            if (b.creator(i) != c)
               candidates.push_back(i);
         if (!candidates.empty()) {
            const std::size_t span = std::min<std::size_t>(candidates.size(), 2 * n);
            other = candidates[candidates.size() - 1 - rng.below(span)];
         }
      }
      int self = b.last(c);
      if (c == n - 1 && fork_prob > 0 && rng.bernoulli(fork_prob)) {
         // Pick any earlier own event as self-parent: a fork unless it is the latest.
         std::vector<int> own;
         for (int i = 0; i < static_cast<int>(b.events().size()); ++i)
            if (b.creator(i) == c)
               own.push_back(i);
         self = own[rng.below(own.size())];
      }
      b.add_with_self(c, self, other);
   }
   return b;
}

/// Reference semantics computed from explicit ancestor sets. Indices are
/// positions in the builder (equal to view indices when inserted in order).
class Oracle
{
public:
   explicit Oracle(const DagBuilder& b) : b_(b), m_(b.events().size())
   {
      anc_.assign(m_, std::vector<bool>(m_, false));
      for (std::size_t x = 0; x < m_; ++x) {
         anc_[x][x] = true;
         for (int p : {b.self_parent(static_cast<int>(x)), b.other_parent(static_cast<int>(x))})
            if (p >= 0)
               for (std::size_t y = 0; y < m_; ++y)
                  if (anc_[p][y])
                     anc_[x][y] = true;
      }
      self_anc_.assign(m_, std::vector<bool>(m_, false));
      for (std::size_t x = 0; x < m_; ++x)
         for (int y = static_cast<int>(x); y >= 0; y = b.self_parent(y))
            self_anc_[x][y] = true;

      // Exhaustive pair scan per event.
      fork_below_.assign(m_, std::vector<bool>(b.n(), false));
      for (std::size_t a = 0; a < m_; ++a)
         for (std::size_t x = 0; x < m_; ++x)
            for (std::size_t y = x + 1; y < m_; ++y)
               if (anc_[a][x] && anc_[a][y] && forked(static_cast<int>(x), static_cast<int>(y)))
                  fork_below_[a][b.creator(static_cast<int>(x))] = true;
   }

   std::size_t size() const { return m_; }
   bool ancestor(int a, int b) const { return anc_[a][b]; }
   bool self_ancestor(int a, int b) const { return self_anc_[a][b]; }

   bool forked(int x, int y) const
   {
      return x != y && b_.creator(x) == b_.creator(y) && !self_anc_[x][y] && !self_anc_[y][x];
   }

   /// Some fork pair by `creator` lies inside a's ancestry.
   bool fork_below(int a, std::uint32_t creator) const { return fork_below_[a][creator]; }

   bool sees(int a, int b) const { return anc_[a][b] && !fork_below(a, b_.creator(b)); }

   /// Enumerates intermediate events and collects their creators.
   bool strongly_sees(int a, int b) const
   {
      std::vector<bool> creators(b_.n(), false);
      for (std::size_t s = 0; s < m_; ++s)
         if (sees(a, static_cast<int>(s)) && sees(static_cast<int>(s), b))
            creators[b_.creator(static_cast<int>(s))] = true;
      std::uint32_t count = 0;
      for (bool c : creators)
         count += c ? 1 : 0;
      return count >= hashgraph::supermajority(b_.n());
   }

   std::vector<hashgraph::RoundInfo> rounds() const
   {
      std::vector<hashgraph::RoundInfo> out(m_);
      for (std::size_t x = 0; x < m_; ++x) {
         const int sp = b_.self_parent(static_cast<int>(x));
         const int op = b_.other_parent(static_cast<int>(x));
         std::uint32_t r = 1;
         if (sp >= 0 || op >= 0) {
            r = 0;
            if (sp >= 0)
               r = std::max(r, out[sp].round);
            if (op >= 0)
               r = std::max(r, out[op].round);
            std::vector<bool> creators(b_.n(), false);
            for (std::size_t w = 0; w < x; ++w)
               if (out[w].is_witness && out[w].round == r && strongly_sees(static_cast<int>(x), static_cast<int>(w)))
                  creators[b_.creator(static_cast<int>(w))] = true;
            std::uint32_t count = 0;
            for (bool c : creators)
               count += c ? 1 : 0;
            if (count >= hashgraph::supermajority(b_.n()))
               ++r;
         }
         out[x] = {r, sp < 0 || r > out[sp].round};
      }
      return out;
   }

   /// Straight transcription of the election: voters round by round in
   /// insertion order, votes tabulated over strongly seen prior witnesses.
   std::vector<Fame> fame(std::uint32_t coin_period = 10) const
   {
      const auto rs = rounds();
      const std::uint32_t sm = hashgraph::supermajority(b_.n());
      std::uint32_t max_round = 0;
      for (const auto& r : rs)
         max_round = std::max(max_round, r.round);
      auto witnesses = [&](std::uint32_t r) {
         std::vector<int> ws;
         for (std::size_t i = 0; i < m_; ++i)
            if (rs[i].is_witness && rs[i].round == r)
               ws.push_back(static_cast<int>(i));
         return ws;
      };

      std::vector<Fame> out(m_, Fame::Undecided);
      for (std::size_t x = 0; x < m_; ++x) {
         if (!rs[x].is_witness)
            continue;
         std::vector<int> vote(m_, -1);
         bool decided = false;
         for (std::uint32_t r = rs[x].round + 1; r <= max_round && !decided; ++r) {
            const std::uint32_t d = r - rs[x].round;
            for (int y : witnesses(r)) {
               if (d == 1) {
                  vote[y] = sees(y, static_cast<int>(x)) ? 1 : 0;
                  continue;
               }
               std::uint32_t yes = 0, no = 0;
               for (int w : witnesses(r - 1))
                  if (strongly_sees(y, w))
                     (vote[w] == 1 ? yes : no) += 1;
               const bool v = yes >= no;
               const std::uint32_t agree = v ? yes : no;
               if (d % coin_period != 0) {
                  vote[y] = v ? 1 : 0;
                  if (agree >= sm) {
                     out[x] = v ? Fame::Yes : Fame::No;
                     decided = true;
                     break;
                  }
               } else {
                  vote[y] = agree >= sm ? (v ? 1 : 0) : (b_.hash(y).bytes.back() & 1);
               }
            }
         }
      }
      return out;
   }

private:
   const DagBuilder& b_;
   std::size_t m_;
   std::vector<std::vector<bool>> anc_;
   std::vector<std::vector<bool>> self_anc_;
   std::vector<std::vector<bool>> fork_below_; // [event][creator]
};

/// Scripted sync driver over real nodes. `sync(to, from)` delivers from's
/// view to `to`, which then records its own event.
class ScriptedNet
{
public:
   explicit ScriptedNet(std::uint32_t n, hashgraph::ConsensusOptions options = {})
   {
      for (std::uint32_t i = 0; i < n; ++i) {
         nodes_.push_back(std::make_unique<gossip::HashgraphNode>(MemberId{i}, n, gossip::Behavior::Honest, options));
         nodes_.back()->create_genesis(0);
      }
   }

   void sync(std::uint32_t to, std::uint32_t from)
   {
      auto msg = nodes_[from]->prepare_sync(MemberId{to}, tick_, false);
      nodes_[to]->receive_sync(msg, tick_);
      ++tick_;
   }

   /// Pairs like "AD CD" mean A receives from D, then C receives from D.
   void script(const std::string& pairs)
   {
      for (std::size_t i = 0; i + 1 < pairs.size();) {
         if (pairs[i] == ' ') {
            ++i;
            continue;
         }
         sync(static_cast<std::uint32_t>(pairs[i] - 'A'), static_cast<std::uint32_t>(pairs[i + 1] - 'A'));
         i += 2;
      }
   }

   void random_syncs(Rng& rng, std::size_t count)
   {
      const auto n = static_cast<std::uint32_t>(nodes_.size());
      for (std::size_t k = 0; k < count; ++k) {
         const auto a = static_cast<std::uint32_t>(rng.below(n));
         auto b = static_cast<std::uint32_t>(rng.below(n - 1));
         if (b >= a)
            ++b;
         sync(a, b);
      }
   }

   void submit(std::uint32_t member, Transaction tx) { nodes_[member]->submit(std::move(tx)); }
   gossip::HashgraphNode& node(std::uint32_t i) { return *nodes_[i]; }
   std::size_t size() const { return nodes_.size(); }

private:
   std::vector<std::unique_ptr<gossip::HashgraphNode>> nodes_;
   Tick tick_ = 1;
};

/// Sync schedule that keeps fame elections split 2:2 among four members
/// (members A, B vote one way, C, D the other) for as long as it repeats.
inline const char* kVoteSplitRound = "AD CD DC AC CA DC CD BA CB AC BA";

/// Sites reachable from `from` through approvals, `from` included.
inline std::vector<bool> cone_of(const tangle::TangleState& s, tangle::SiteId from)
{
   std::vector<bool> in(s.size(), false);
   std::vector<tangle::SiteId> stack{from};
   in[from] = true;
   while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      if (x == s.genesis())
         continue;
      for (auto p : s.site(x).approves)
         if (!in[p]) {
            in[p] = true;
            stack.push_back(p);
         }
   }
   return in;
}

/// Exact probability that a walk from genesis ends at a tip referencing
/// `target`, by solving the absorbing chain's linear system. Transition
/// weights are rebuilt from brute-force cone sizes.
inline double exact_confidence(const tangle::TangleState& s, tangle::SiteId target, std::optional<double> alpha = {})
{
   const auto m = static_cast<Eigen::Index>(s.size());
   std::vector<std::vector<tangle::SiteId>> approvers(s.size());
   std::vector<double> weight(s.size(), 0.0);
   for (tangle::SiteId x = 0; x < s.size(); ++x) {
      const auto cone = cone_of(s, x);
      for (tangle::SiteId y = 0; y < s.size(); ++y)
         if (cone[y])
            weight[y] += 1.0;
      if (x != s.genesis()) {
         approvers[s.site(x).approves[0]].push_back(x);
         if (s.site(x).approves[1] != s.site(x).approves[0])
            approvers[s.site(x).approves[1]].push_back(x);
      }
   }
   // p_i = sum_j P(i->j) p_j on transient sites; p_tip = [tip's cone holds target].
   Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
   Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
   for (tangle::SiteId i = 0; i < s.size(); ++i) {
      const auto& next = approvers[i];
      if (next.empty()) {
         rhs(static_cast<Eigen::Index>(i)) = cone_of(s, i)[target] ? 1.0 : 0.0;
         continue;
      }
      std::vector<double> w;
      double top = 0, total = 0;
      for (auto j : next)
         top = std::max(top, weight[j]);
      for (auto j : next)
         w.push_back(alpha ? std::exp(*alpha * (weight[j] - top)) : weight[j]);
      for (double v : w)
         total += v;
      for (std::size_t k = 0; k < next.size(); ++k)
         a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(next[k])) -= w[k] / total;
   }
   const Eigen::VectorXd sol = a.partialPivLu().solve(rhs);
   return sol(0);
}

} // namespace ledgerlab::testkit
