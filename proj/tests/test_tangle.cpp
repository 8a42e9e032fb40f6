#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

using namespace ledgerlab;
using namespace ledgerlab::tangle;
using ledgerlab::testkit::cone_of;
using ledgerlab::testkit::exact_confidence;

namespace {

// Recomputes every weight and the tip set from scratch.
void check_against_brute_force(const TangleState& s)
{
   std::vector<std::uint64_t> weight(s.size(), 0);
   std::vector<bool> approved(s.size(), false);
   for (SiteId x = 0; x < s.size(); ++x) {
      const auto cone = cone_of(s, x);
      for (SiteId y = 0; y < s.size(); ++y)
         weight[y] += cone[y] ? 1 : 0;
      if (x != s.genesis()) {
         for (auto p : s.site(x).approves) {
            approved[p] = true;
            ASSERT_LT(p, x);
            ASSERT_LE(s.site(p).attach_tick, s.site(x).attach_tick);
         }
      }
   }
   std::set<SiteId> tips;
   for (SiteId x = 0; x < s.size(); ++x) {
      ASSERT_EQ(s.site(x).cumulative_weight, weight[x]) << "site " << x;
      if (!approved[x])
         tips.insert(x);
   }
   ASSERT_EQ(s.tips(), tips);
}

// Genesis with a heavy branch (chain of `heavy` sites) and one light site.
TangleState two_branches(std::uint32_t heavy)
{
   TangleState s;
   const SiteId h = s.attach_approving(MemberId{0}, 0, 0, 1).id;
   s.attach_approving(MemberId{1}, 0, 0, 1);
   SiteId top = h;
   for (std::uint32_t i = 1; i < heavy; ++i)
      top = s.attach_approving(MemberId{0}, top, top, 1 + i).id;
   return s;
}

TangleState random_tangle(Rng& rng, std::size_t sites, std::optional<double> alpha = {})
{
   TangleState s(WalkOptions{alpha});
   for (std::size_t i = 1; i < sites; ++i)
      s.attach_transaction(MemberId{static_cast<std::uint32_t>(i % 4)}, rng, i);
   return s;
}

// Random DAG where sites approve arbitrary earlier sites, not only tips.
TangleState scattered_tangle(Rng& rng, std::size_t sites)
{
   TangleState s;
   for (std::size_t i = 1; i < sites; ++i) {
      const auto a = rng.below(s.size());
      const auto b = rng.below(s.size());
      s.attach_approving(MemberId{0}, a, b, i);
   }
   return s;
}

} // namespace

TEST(Tangle, FreshStateHasGenesisTip)
{
   TangleState s;
   EXPECT_EQ(s.size(), 1u);
   EXPECT_EQ(s.tips(), (std::set<SiteId>{0}));
   Rng rng(1);
   EXPECT_EQ(s.tip_select_walk(rng), 0u);
   const auto& site = s.attach_transaction(MemberId{2}, rng, 4);
   EXPECT_EQ(site.approves, (std::array<SiteId, 2>{0, 0}));
   EXPECT_EQ(site.issuer, MemberId{2});
   EXPECT_EQ(s.site(0).cumulative_weight, 2u);
}

TEST(Tangle, LinearChainAlwaysReturnsTheTip)
{
   TangleState s;
   SiteId top = 0;
   for (int i = 1; i <= 3; ++i)
      top = s.attach_approving(MemberId{0}, top, top, i).id;
   Rng rng(9);
   for (int i = 0; i < 50; ++i)
      EXPECT_EQ(s.tip_select_walk(rng), top);
   const auto& next = s.attach_transaction(MemberId{1}, rng, 5);
   EXPECT_EQ(next.approves, (std::array<SiteId, 2>{top, top}));
}

TEST(Tangle, HeavyBranchChosenInProportionToWeight)
{
   const auto s = two_branches(9);
   ASSERT_EQ(s.site(1).cumulative_weight, 9u);
   ASSERT_EQ(s.site(2).cumulative_weight, 1u);
   const auto p = s.step_probabilities(0);
   ASSERT_EQ(p.size(), 2u);
   EXPECT_DOUBLE_EQ(p[0], 0.9);
   EXPECT_DOUBLE_EQ(p[1], 0.1);

   Rng rng(2024);
   int heavy = 0;
   for (int i = 0; i < 10000; ++i)
      heavy += s.tip_select_walk(rng) != 2 ? 1 : 0;
   EXPECT_NEAR(heavy / 10000.0, 0.9, 0.03);
}

TEST(Tangle, ExponentialBiasSharpensTheWalk)
{
   TangleState s(WalkOptions{0.5});
   s.attach_approving(MemberId{0}, 0, 0, 1);
   s.attach_approving(MemberId{0}, 0, 0, 1);
   SiteId top = 1;
   for (int i = 0; i < 8; ++i)
      top = s.attach_approving(MemberId{0}, top, top, 2).id;
   const auto p = s.step_probabilities(0);
   const double expect = 1.0 / (1.0 + std::exp(0.5 * (1.0 - 9.0)));
   EXPECT_NEAR(p[0], expect, 1e-12);
   EXPECT_GT(p[0], 0.9);
}

TEST(Tangle, ConfidenceIsFractionOfReferencingWalks)
{
   const auto s = two_branches(9);
   Rng a(5), b(5);
   const double c = s.confirmation_confidence(2, 1000, a);
   int hits = 0;
   for (int i = 0; i < 1000; ++i)
      hits += s.tip_select_walk(b) == 2 ? 1 : 0;
   EXPECT_DOUBLE_EQ(c, hits / 1000.0) << "a tip counts only when the walk returns it";
   EXPECT_DOUBLE_EQ(s.confirmation_confidence(0, 10, a), 1.0);
   EXPECT_THROW(s.confirmation_confidence(2, 0, a), std::invalid_argument);
}

TEST(Tangle, ConfidenceMatchesExactAbsorption)
{
   Rng gen(17);
   for (int trial = 0; trial < 6; ++trial) {
      const auto s = trial % 2 ? random_tangle(gen, 12) : scattered_tangle(gen, 12);
      for (SiteId target : {SiteId{1}, SiteId{4}, SiteId{s.size() - 2}}) {
         const double exact = exact_confidence(s, target);
         Rng rng(trial * 100 + target);
         EXPECT_NEAR(s.confirmation_confidence(target, 20000, rng), exact, 0.02)
            << "trial " << trial << " target " << target;
      }
   }
   Rng rng(3);
   const auto biased = random_tangle(gen, 10, 0.3);
   EXPECT_NEAR(biased.confirmation_confidence(3, 20000, rng), exact_confidence(biased, 3, 0.3), 0.02);
}

TEST(Tangle, WeightsAndTipsMatchBruteForce)
{
   Rng rng(8);
   const auto grown = random_tangle(rng, 101);
   check_against_brute_force(grown);
   const auto scattered = scattered_tangle(rng, 300);
   check_against_brute_force(scattered);
}

TEST(Tangle, ApprovingUnknownSiteRejected)
{
   TangleState s;
   EXPECT_THROW(s.attach_approving(MemberId{0}, 0, 5, 1), std::exception);
}

TEST(Tangle, CoordinatorDisabledByDefault)
{
   TangleState s;
   Rng rng(1);
   EXPECT_THROW(s.coordinator_milestone(MemberId{0}, rng, 1), CoordinatorDisabled);
}

TEST(Tangle, MilestoneConfirmsItsCone)
{
   TangleState s({}, true);
   SiteId top = 0;
   for (int i = 1; i <= 4; ++i)
      top = s.attach_approving(MemberId{1}, top, top, i).id;
   Rng rng(4);
   const auto newly = s.coordinator_milestone(MemberId{0}, rng, 5);
   EXPECT_EQ(newly, (std::vector<SiteId>{0, 1, 2, 3, 4, 5}));
   for (SiteId x = 0; x <= 5; ++x)
      EXPECT_TRUE(s.site(x).confirmed);
   EXPECT_EQ(s.milestones(), (std::vector<SiteId>{5}));

   const auto late = s.attach_transaction(MemberId{2}, rng, 6).id;
   EXPECT_FALSE(s.site(late).confirmed);

   std::vector<bool> before;
   for (const auto& site : s.sites())
      before.push_back(site.confirmed);
   s.attach_transaction(MemberId{2}, rng, 7);
   s.coordinator_milestone(MemberId{0}, rng, 8);
   for (SiteId x = 0; x < before.size(); ++x)
      if (before[x])
         EXPECT_TRUE(s.site(x).confirmed);
   EXPECT_TRUE(s.site(late).confirmed);
   EXPECT_EQ(s.milestones().size(), 2u);
}

TEST(Tangle, ConfidenceTrendsUpAsTheTangleGrows)
{
   // Target attached early; honest load keeps approving. Averaged over
   // several growth runs so single noisy epochs do not matter.
   constexpr int kEpochs = 24;
   std::vector<double> mean(kEpochs, 0.0);
   for (std::uint64_t run = 1; run <= 5; ++run) {
      Rng grow(run), walk(run + 1000);
      TangleState s;
      for (int i = 0; i < 5; ++i)
         s.attach_transaction(MemberId{0}, grow, 1);
      const SiteId target = s.attach_transaction(MemberId{1}, grow, 2).id;
      for (int e = 0; e < kEpochs; ++e) {
         for (int i = 0; i < 4; ++i)
            s.attach_transaction(MemberId{static_cast<std::uint32_t>(i)}, grow, 3 + e);
         mean[e] += s.confirmation_confidence(target, 400, walk) / 5.0;
      }
   }
   double first = 0, second = 0;
   for (int e = 0; e < kEpochs / 2; ++e) {
      first += mean[e];
      second += mean[e + kEpochs / 2];
   }
   EXPECT_GE(second, first - 0.05 * kEpochs / 2);
   EXPECT_GE(mean.back(), mean.front() - 0.05);
   EXPECT_GT(mean.back(), 0.9);
}

TEST(Tangle, CsvAndDotExports)
{
   TangleState s({}, true);
   Rng rng(6);
   s.attach_transaction(MemberId{1}, rng, 3);
   s.coordinator_milestone(MemberId{0}, rng, 4);
   std::ostringstream csv;
   write_tangle_csv(csv, s);
   EXPECT_EQ(csv.str(),
             "site_id,issuer,approve1,approve2,attach_tick,cumulative_weight,confirmed\n"
             "0,0,,,0,3,1\n"
             "1,1,0,0,3,2,1\n"
             "2,0,1,1,4,1,1\n");
   std::ostringstream dot;
   write_tangle_dot(dot, s);
   EXPECT_EQ(dot.str().rfind("digraph tangle {", 0), 0u);
   EXPECT_NE(dot.str().find("s2 -> s1;"), std::string::npos);
   EXPECT_NE(dot.str().find("shape=box"), std::string::npos);
}

TEST(TangleSim, DeterministicAndConfirmsEverything)
{
   TangleSimConfig c;
   c.seed = 3;
   c.horizon = 150;
   const auto a = run_scenario_tangle(c);
   const auto b = run_scenario_tangle(c);
   EXPECT_EQ(a.confirmation_order, b.confirmation_order);
   EXPECT_EQ(a.confirmed_at, b.confirmed_at);
   EXPECT_EQ(a.state.size(), b.state.size());
   ASSERT_FALSE(a.submitted_at.empty());
   for (std::size_t i = 0; i < a.confirmed_at.size(); ++i) {
      ASSERT_TRUE(a.confirmed_at[i].has_value()) << "tx " << i + 1;
      EXPECT_GE(*a.confirmed_at[i], a.submitted_at[i]);
   }
   EXPECT_EQ(a.milestones, 0u);
   check_against_brute_force(a.state);
}

TEST(TangleSim, CoordinatorConfirmsEveryPreMilestoneSite)
{
   TangleSimConfig c;
   c.seed = 2;
   c.horizon = 150;
   c.coordinator_interval = 30;
   c.confidence_threshold = 1.01; // milestones only
   const auto r = run_scenario_tangle(c);
   ASSERT_GT(r.milestones, 0u);
   // Confirmed set = union of milestone cones.
   std::vector<bool> covered(r.state.size(), false);
   for (SiteId m : r.state.milestones()) {
      const auto cone = cone_of(r.state, m);
      for (SiteId x = 0; x < cone.size(); ++x)
         covered[x] = covered[x] || cone[x];
   }
   for (SiteId x = 0; x < r.state.size(); ++x)
      EXPECT_EQ(r.state.site(x).confirmed, covered[x]) << x;
   for (std::size_t i = 0; i < r.confirmed_at.size(); ++i) {
      ASSERT_TRUE(r.confirmed_at[i].has_value()) << "tx " << i + 1;
      EXPECT_TRUE(r.confirmed_by_milestone[i]);
   }
}
