#pragma once

#include <ledgerlab/rng.hpp>
#include <ledgerlab/scheduler.hpp>
#include <ledgerlab/types.hpp>

#include <array>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace ledgerlab::tangle {

using SiteId = std::uint64_t;

struct Site
{
   SiteId id = 0;
   MemberId issuer;          // also the site's validator; there is no separate miner role
   std::array<SiteId, 2> approves{}; // genesis approves nothing (both slots = own id)
   std::uint64_t cumulative_weight = 1;
   Tick attach_tick = 0;
   bool confirmed = false;   // referenced by a coordinator milestone
   bool milestone = false;
   std::optional<std::uint64_t> tx_id;

   static constexpr std::uint64_t own_weight = 1;
   bool is_genesis() const { return id == 0; }
};

class CoordinatorDisabled : public Error
{
public:
   CoordinatorDisabled() : Error("CoordinatorDisabled", "coordinator milestones are not enabled") {}
};

struct WalkOptions
{
   /// Unset: step probability proportional to the approver's cumulative
   /// weight. Set: proportional to exp(alpha * weight).
   std::optional<double> alpha;
};

/// Append-only tangle. The genesis site is created with the state.
class TangleState
{
public:
   explicit TangleState(WalkOptions walk = {}, bool coordinator = false, MemberId genesis_issuer = {});

   std::size_t size() const { return sites_.size(); }
   SiteId genesis() const { return 0; }
   const Site& site(SiteId id) const { return sites_.at(id); }
   std::span<const Site> sites() const { return sites_; }
   std::span<const SiteId> approvers(SiteId id) const { return approvers_.at(id); }
   const std::set<SiteId>& tips() const { return tips_; }
   const std::vector<SiteId>& milestones() const { return milestones_; }
   bool coordinator_enabled() const { return coordinator_; }
   const WalkOptions& walk_options() const { return walk_; }

   /// Weighted random walk from genesis towards the tips; returns the tip
   /// reached.
   SiteId tip_select_walk(Rng& rng) const;

   /// Probabilities of each direct approver of `from` being the next step,
   /// aligned with approvers(from).
   std::vector<double> step_probabilities(SiteId from) const;

   /// Two independent walks pick the approved sites (equal when only one tip
   /// is reachable), then the new site is attached and weights updated.
   const Site& attach_transaction(MemberId issuer, Rng& rng, Tick now, std::optional<std::uint64_t> tx_id = {});

   /// Attaches a site approving the given sites directly.
   const Site& attach_approving(MemberId issuer, SiteId a, SiteId b, Tick now,
                                std::optional<std::uint64_t> tx_id = {});

   /// y/x over x independent walks on the current (frozen) state, where y
   /// counts walks whose tip has `target` in its approval cone.
   double confirmation_confidence(SiteId target, std::uint32_t walks, Rng& rng) const;

   /// Attaches a milestone through normal tip selection and confirms its
   /// whole approval cone. Returns the ids confirmed by this milestone.
   std::vector<SiteId> coordinator_milestone(MemberId issuer, Rng& rng, Tick now);

   /// Whether `target` is `from` or reachable from it through approvals.
   bool references(SiteId from, SiteId target) const;

   /// `from` and every site it approves directly or indirectly.
   std::vector<SiteId> approval_cone(SiteId from) const;

private:
   std::vector<Site> sites_;
   std::vector<std::vector<SiteId>> approvers_;
   std::set<SiteId> tips_;
   std::vector<SiteId> milestones_;
   WalkOptions walk_;
   bool coordinator_;
};

struct TangleSimConfig
{
   std::uint32_t n = 4;
   std::uint64_t seed = 1;
   Tick horizon = 300;
   Tick drain_ticks = 600;
   double tx_rate = 0.5;
   LatencyModel latency;
   Tick pow_ticks = 5;                 // simulated hashcash cost per attachment
   Tick coordinator_interval = 0;      // 0 disables milestones
   std::uint32_t confidence_walks = 100;
   double confidence_threshold = 0.95;
   Tick confidence_interval = 5;
   Tick promote_after = 100;           // 0 disables promotion of left-behind sites
   WalkOptions walk;
};

struct TangleRunResult
{
   std::vector<Tick> submitted_at;                // by tx id - 1
   std::vector<std::optional<Tick>> confirmed_at; // milestone or confidence, whichever first
   std::vector<bool> confirmed_by_milestone;
   std::vector<std::uint64_t> confirmation_order; // tx ids by (confirmation tick, site id)
   std::size_t milestones = 0;
   Tick end_tick = 0;
   TangleState state;
};

TangleRunResult run_scenario_tangle(const TangleSimConfig& config);

/// CSV: site_id,issuer,approve1,approve2,attach_tick,cumulative_weight,confirmed
void write_tangle_csv(std::ostream& out, const TangleState& state);
void write_tangle_dot(std::ostream& out, const TangleState& state);

} // namespace ledgerlab::tangle
