#include <ledgerlab/tangle.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <variant>

namespace ledgerlab::tangle {

TangleState::TangleState(WalkOptions walk, bool coordinator, MemberId genesis_issuer)
   : walk_(walk), coordinator_(coordinator)
{
   Site g;
   g.id = 0;
   g.issuer = genesis_issuer;
   g.approves = {0, 0};
   sites_.push_back(g);
   approvers_.emplace_back();
   tips_.insert(0);
}

std::vector<double> TangleState::step_probabilities(SiteId from) const
{
   const auto& next = approvers_.at(from);
   std::vector<double> p(next.size());
   if (next.empty())
      return p;
   if (walk_.alpha) {
      // Shift by the max weight so exp() stays finite.
      std::uint64_t top = 0;
      for (SiteId a : next)
         top = std::max(top, sites_[a].cumulative_weight);
      for (std::size_t i = 0; i < next.size(); ++i)
         p[i] = std::exp(*walk_.alpha * (static_cast<double>(sites_[next[i]].cumulative_weight) -
                                         static_cast<double>(top)));
   } else {
      for (std::size_t i = 0; i < next.size(); ++i)
         p[i] = static_cast<double>(sites_[next[i]].cumulative_weight);
   }
   double total = 0;
   for (double v : p)
      total += v;
   for (double& v : p)
      v /= total;
   return p;
}

SiteId TangleState::tip_select_walk(Rng& rng) const
{
   SiteId at = genesis();
   std::vector<double> p;
   for (;;) {
      const auto& next = approvers_[at];
      if (next.empty())
         return at;
      if (next.size() == 1) {
         at = next.front();
         continue;
      }
      p = step_probabilities(at);
      double u = rng.uniform01();
      std::size_t pick = next.size() - 1;
      for (std::size_t i = 0; i < p.size(); ++i) {
         if (u < p[i]) {
            pick = i;
            break;
         }
         u -= p[i];
      }
      at = next[pick];
   }
}

const Site& TangleState::attach_approving(MemberId issuer, SiteId a, SiteId b, Tick now,
                                          std::optional<std::uint64_t> tx_id)
{
   if (a >= sites_.size() || b >= sites_.size())
      throw std::out_of_range("approved site does not exist");
   Site s;
   s.id = sites_.size();
   s.issuer = issuer;
   s.approves = {a, b};
   s.attach_tick = now;
   s.tx_id = tx_id;
   sites_.push_back(s);
   approvers_.emplace_back();

   approvers_[a].push_back(s.id);
   tips_.erase(a);
   if (b != a) {
      approvers_[b].push_back(s.id);
      tips_.erase(b);
   }
   tips_.insert(s.id);

   for (SiteId c : approval_cone(s.id))
      if (c != s.id)
         sites_[c].cumulative_weight += Site::own_weight;
   return sites_.back();
}

const Site& TangleState::attach_transaction(MemberId issuer, Rng& rng, Tick now, std::optional<std::uint64_t> tx_id)
{
   const SiteId y = tip_select_walk(rng);
   const SiteId z = tip_select_walk(rng);
   return attach_approving(issuer, y, z, now, tx_id);
}

std::vector<SiteId> TangleState::approval_cone(SiteId from) const
{
   std::vector<bool> seen(sites_.size(), false);
   std::vector<SiteId> out{from};
   seen.at(from) = true;
   for (std::size_t k = 0; k < out.size(); ++k) {
      const Site& s = sites_[out[k]];
      if (s.is_genesis())
         continue;
      for (SiteId p : s.approves)
         if (!seen[p]) {
            seen[p] = true;
            out.push_back(p);
         }
   }
   return out;
}

bool TangleState::references(SiteId from, SiteId target) const
{
   if (from == target)
      return true;
   // Approvals point to smaller ids, so anything below target can be skipped.
   if (from < target)
      return false;
   std::vector<bool> seen(from + 1, false);
   std::vector<SiteId> stack{from};
   seen[from] = true;
   while (!stack.empty()) {
      const SiteId s = stack.back();
      stack.pop_back();
      if (sites_[s].is_genesis())
         continue;
      for (SiteId p : sites_[s].approves) {
         if (p == target)
            return true;
         if (p > target && !seen[p]) {
            seen[p] = true;
            stack.push_back(p);
         }
      }
   }
   return false;
}

double TangleState::confirmation_confidence(SiteId target, std::uint32_t walks, Rng& rng) const
{
   if (walks == 0)
      throw std::invalid_argument("confidence needs at least one walk");
   if (target >= sites_.size())
      throw std::out_of_range("unknown site");
   std::uint32_t y = 0;
   for (std::uint32_t i = 0; i < walks; ++i)
      if (references(tip_select_walk(rng), target))
         ++y;
   return static_cast<double>(y) / walks;
}

std::vector<SiteId> TangleState::coordinator_milestone(MemberId issuer, Rng& rng, Tick now)
{
   if (!coordinator_)
      throw CoordinatorDisabled();
   const SiteId id = attach_transaction(issuer, rng, now).id;
   sites_[id].milestone = true;
   milestones_.push_back(id);
   std::vector<SiteId> newly;
   for (SiteId c : approval_cone(id))
      if (!sites_[c].confirmed) {
         sites_[c].confirmed = true;
         newly.push_back(c);
      }
   std::sort(newly.begin(), newly.end());
   return newly;
}

namespace {

struct Arrival
{
   std::uint32_t member;
};
struct Attach
{
   std::uint32_t member;
   std::optional<std::uint64_t> tx_id;
   SiteId y;
   SiteId z;
};
struct Milestone
{};
struct ConfidenceCheck
{};
using Action = std::variant<Arrival, Attach, Milestone, ConfidenceCheck>;

} // namespace

TangleRunResult run_scenario_tangle(const TangleSimConfig& config)
{
   if (config.n == 0)
      throw ConfigError("tangle scenario needs at least one member");
   if (config.horizon == 0)
      throw ConfigError("zero horizon");
   if (config.tx_rate < 0)
      throw ConfigError("negative transaction rate");
   if (config.confidence_walks == 0)
      throw ConfigError("confidence needs at least one walk");
   if (config.confidence_interval == 0)
      throw ConfigError("confidence interval must be positive");

   Rng tx_rng = Rng::derive(config.seed, 3);
   Rng latency_rng = Rng::derive(config.seed, 2);
   Rng walk_rng = Rng::derive(config.seed, 5);
   Rng check_rng = Rng::derive(config.seed, 6);

   TangleRunResult result;
   result.state = TangleState(config.walk, config.coordinator_interval > 0);
   TangleState& state = result.state;
   Scheduler<Action> sched;
   const Tick end = config.horizon + config.drain_ticks;
   std::vector<double> next_arrival(config.n, 0.0);

   auto schedule_arrival = [&](std::uint32_t m) {
      next_arrival[m] += tx_rng.exponential(1.0 / config.tx_rate);
      const auto at = static_cast<Tick>(next_arrival[m]);
      if (at < end)
         sched.push(at, Arrival{m});
   };
   if (config.tx_rate > 0)
      for (std::uint32_t m = 0; m < config.n; ++m)
         schedule_arrival(m);
   if (config.coordinator_interval > 0)
      sched.push(config.coordinator_interval, Milestone{});
   sched.push(config.confidence_interval, ConfidenceCheck{});

   std::vector<bool> confident; // by site id: counted as confirmed by either rule
   std::size_t pending = 0;
   std::vector<std::pair<SiteId, Tick>> waiting; // unconfirmed tx sites, last attach or promotion tick

   struct Confirmed
   {
      Tick at;
      SiteId site;
      std::uint64_t tx;
   };
   std::vector<Confirmed> confirmations;

   auto confirm = [&](SiteId s, Tick now, bool by_milestone) {
      if (s < confident.size() && confident[s])
         return;
      if (confident.size() <= s)
         confident.resize(state.size(), false);
      confident[s] = true;
      if (const auto tx = state.site(s).tx_id) {
         result.confirmed_at[*tx - 1] = now;
         result.confirmed_by_milestone[*tx - 1] = by_milestone;
         confirmations.push_back({now, s, *tx});
         --pending;
      }
   };

   // Proof of work plus one network hop.
   auto visible_at = [&](Tick now) {
      return now + config.pow_ticks + config.latency.base + latency_rng.below(config.latency.jitter + 1);
   };

   std::vector<std::uint32_t> hits;
   std::vector<SiteId> stack;
   std::vector<std::uint32_t> visited_in;

   Tick now = 0;
   while (!sched.empty() && sched.next_tick() <= end) {
      auto entry = sched.pop();
      now = entry.at;
      if (auto* a = std::get_if<Arrival>(&entry.action)) {
         // Members keep issuing empty sites after the horizon so that the
         // last transactions still collect approvals.
         std::optional<std::uint64_t> id;
         if (now < config.horizon) {
            id = result.submitted_at.size() + 1;
            result.submitted_at.push_back(now);
            result.confirmed_at.emplace_back();
            result.confirmed_by_milestone.push_back(false);
            ++pending;
         }
         // Tips are chosen when the transaction is issued; the site becomes
         // visible to walkers only after its proof of work and propagation.
         const SiteId y = state.tip_select_walk(walk_rng);
         const SiteId z = state.tip_select_walk(walk_rng);
         sched.push(visible_at(now), Attach{a->member, id, y, z});
         schedule_arrival(a->member);
      } else if (auto* at = std::get_if<Attach>(&entry.action)) {
         const Site& s = state.attach_approving(MemberId{at->member}, at->y, at->z, now, at->tx_id);
         if (s.tx_id)
            waiting.emplace_back(s.id, now);
      } else if (std::holds_alternative<Milestone>(entry.action)) {
         for (SiteId c : state.coordinator_milestone(MemberId{0}, walk_rng, now))
            confirm(c, now, true);
         ++result.milestones;
         sched.push(now + config.coordinator_interval, Milestone{});
      } else {
         // Sample tips by the walk and count, for every not yet confirmed
         // site, how many sampled tips reference it. The confirmed set is
         // closed under approval, so the traversal stops at it.
         confident.resize(state.size(), false);
         hits.assign(state.size(), 0);
         visited_in.assign(state.size(), 0);
         for (std::uint32_t w = 1; w <= config.confidence_walks; ++w) {
            stack.assign(1, state.tip_select_walk(check_rng));
            visited_in[stack[0]] = w;
            while (!stack.empty()) {
               const SiteId s = stack.back();
               stack.pop_back();
               if (confident[s])
                  continue;
               ++hits[s];
               if (state.site(s).is_genesis())
                  continue;
               for (SiteId p : state.site(s).approves)
                  if (visited_in[p] != w) {
                     visited_in[p] = w;
                     stack.push_back(p);
                  }
            }
         }
         const double need = config.confidence_threshold * config.confidence_walks;
         for (SiteId s = 0; s < state.size(); ++s)
            if (!confident[s] && hits[s] > 0 && static_cast<double>(hits[s]) >= need)
               confirm(s, now, false);

         // Issuers promote transactions the walk has left behind: an empty
         // site approving the stuck one and a fresh tip.
         std::erase_if(waiting, [&](const auto& w) { return confident[w.first]; });
         if (config.promote_after > 0)
            for (auto& [site, last] : waiting)
               if (now - last >= config.promote_after) {
                  last = now;
                  sched.push(visible_at(now), Attach{state.site(site).issuer.index, std::nullopt, site,
                                                     state.tip_select_walk(walk_rng)});
               }
         sched.push(now + config.confidence_interval, ConfidenceCheck{});
      }
      if (now >= config.horizon && pending == 0)
         break;
   }
   result.end_tick = now;

   std::stable_sort(confirmations.begin(), confirmations.end(), [](const Confirmed& a, const Confirmed& b) {
      return a.at != b.at ? a.at < b.at : a.site < b.site;
   });
   for (const auto& c : confirmations)
      result.confirmation_order.push_back(c.tx);
   return result;
}

void write_tangle_csv(std::ostream& out, const TangleState& state)
{
   out << "site_id,issuer,approve1,approve2,attach_tick,cumulative_weight,confirmed\n";
   for (const Site& s : state.sites()) {
      out << s.id << ',' << s.issuer.index << ',';
      if (s.is_genesis())
         out << ",,";
      else
         out << s.approves[0] << ',' << s.approves[1] << ',';
      out << s.attach_tick << ',' << s.cumulative_weight << ',' << (s.confirmed ? 1 : 0) << '\n';
   }
}

void write_tangle_dot(std::ostream& out, const TangleState& state)
{
   out << "digraph tangle {\n  rankdir=RL;\n";
   for (const Site& s : state.sites()) {
      out << "  s" << s.id << " [label=\"" << s.id << " w=" << s.cumulative_weight << "\"";
      if (s.milestone)
         out << ", shape=box";
      if (s.confirmed)
         out << ", style=filled, fillcolor=lightgrey";
      out << "];\n";
   }
   for (const Site& s : state.sites()) {
      if (s.is_genesis())
         continue;
      out << "  s" << s.id << " -> s" << s.approves[0] << ";\n";
      if (s.approves[1] != s.approves[0])
         out << "  s" << s.id << " -> s" << s.approves[1] << ";\n";
   }
   out << "}\n";
}

} // namespace ledgerlab::tangle
