#include "support.hpp"

#include <ledgerlab/powchain.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace ledgerlab;
using namespace ledgerlab::powchain;

namespace {

std::uint64_t g_nonce = 0;

Block child_of(const Block& parent, std::uint32_t miner, std::vector<std::uint64_t> tx_ids = {})
{
   Block b;
   b.parent = parent.hash;
   b.height = parent.height + 1;
   b.miner = MemberId{miner};
   b.mined_tick = parent.mined_tick + 1;
   b.nonce = ++g_nonce;
   for (auto id : tx_ids)
      b.transactions.push_back(testkit::make_tx(id, miner, 0));
   b.seal();
   return b;
}

std::vector<std::uint64_t> ids(const std::vector<Transaction>& txs)
{
   std::vector<std::uint64_t> out;
   for (const auto& t : txs)
      out.push_back(t.id);
   std::sort(out.begin(), out.end());
   return out;
}

ChainSimConfig stale_config(std::uint64_t seed, double interval)
{
   ChainSimConfig c;
   c.seed = seed;
   c.latency = {2, 4};
   c.block_interval = interval;
   c.horizon = static_cast<Tick>(interval * 250);
   c.drain_ticks = 0;
   c.tx_rate = 0.001;
   return c;
}

} // namespace

TEST(Block, GenesisAndSealing)
{
   const auto& g = genesis_block();
   EXPECT_EQ(g.height, 0u);
   EXPECT_TRUE(g.parent.is_zero());
   Block b = child_of(g, 1);
   const auto h = b.hash;
   b.seal();
   EXPECT_EQ(b.hash, h);
   b.nonce += 1;
   b.seal();
   EXPECT_NE(b.hash, h);
}

TEST(BlockTree, ExtendAndTieRule)
{
   BlockTree t;
   EXPECT_EQ(t.head(), genesis_block().hash);
   const Block a1 = child_of(genesis_block(), 0);
   const auto r1 = t.insert_block(a1);
   EXPECT_TRUE(r1.head_changed);
   EXPECT_FALSE(r1.reorg);
   EXPECT_EQ(t.head(), a1.hash);

   const Block b1 = child_of(genesis_block(), 1);
   const auto r2 = t.insert_block(b1);
   EXPECT_FALSE(r2.head_changed) << "equal height arriving later keeps the first-seen head";
   EXPECT_EQ(t.head(), a1.hash);
   EXPECT_EQ(t.recompute_head(), a1.hash);
}

TEST(BlockTree, DeeperForkReorgsAndReturnsPrunedTransactions)
{
   BlockTree t;
   const Block a1 = child_of(genesis_block(), 0, {1, 2});
   const Block a2 = child_of(a1, 0, {3});
   t.insert_block(a1);
   t.insert_block(a2);

   // Delayed competing branch from genesis: shares tx 2, lacks 1 and 3.
   const Block b1 = child_of(genesis_block(), 1, {2, 4});
   const Block b2 = child_of(b1, 1, {5});
   const Block b3 = child_of(b2, 1);
   t.insert_block(b1);
   t.insert_block(b2);
   EXPECT_EQ(t.head(), a2.hash);
   const auto r = t.insert_block(b3);
   EXPECT_TRUE(r.reorg);
   EXPECT_EQ(t.head(), b3.hash);

   // Pool replay: pending = (old pool + pruned) minus what the new chain holds.
   std::set<std::uint64_t> pool{6};
   for (auto id : ids(r.pruned))
      pool.insert(id);
   for (auto id : ids(r.added))
      pool.erase(id);
   EXPECT_EQ(pool, (std::set<std::uint64_t>{1, 3, 6}));
   // Net difference: tx 2 sits on both branches, so it is in neither list.
   EXPECT_EQ(ids(r.pruned), (std::vector<std::uint64_t>{1, 3}));
   EXPECT_EQ(ids(r.added), (std::vector<std::uint64_t>{4, 5}));
   EXPECT_FALSE(t.on_main_chain(a1.hash));
   EXPECT_TRUE(t.on_main_chain(b1.hash));
}

TEST(BlockTree, OrphansWaitForTheirParent)
{
   BlockTree t;
   const Block a1 = child_of(genesis_block(), 0);
   const Block a2 = child_of(a1, 0);
   const Block a3 = child_of(a2, 0);
   auto r = t.insert_block(a3);
   EXPECT_TRUE(r.buffered);
   EXPECT_EQ(t.orphan_count(), 1u);
   t.insert_block(a2);
   EXPECT_EQ(t.orphan_count(), 2u);
   EXPECT_EQ(t.head(), genesis_block().hash);
   r = t.insert_block(a1);
   EXPECT_EQ(r.connected, 3u);
   EXPECT_EQ(t.orphan_count(), 0u);
   EXPECT_EQ(t.head(), a3.hash);
   EXPECT_EQ(t.height(), 3u);
}

TEST(BlockTree, DuplicatesAndBadHeightsRejected)
{
   BlockTree t;
   const Block a1 = child_of(genesis_block(), 0);
   t.insert_block(a1);
   EXPECT_THROW(t.insert_block(a1), DuplicateBlock);
   EXPECT_THROW(t.insert_block(genesis_block()), DuplicateBlock);

   const Block orphan = child_of(child_of(a1, 0), 0);
   t.insert_block(orphan);
   EXPECT_THROW(t.insert_block(orphan), DuplicateBlock);

   Block bad = child_of(a1, 0);
   bad.height = 7;
   bad.seal();
   EXPECT_THROW(t.insert_block(bad), Error);
}

TEST(BlockTree, IncrementalHeadMatchesRecomputation)
{
   Rng rng(12);
   for (int trial = 0; trial < 20; ++trial) {
      std::vector<Block> made{genesis_block()};
      for (int i = 0; i < 60; ++i)
         made.push_back(child_of(made[rng.below(made.size())], static_cast<std::uint32_t>(rng.below(4))));
      // Deliver in a shuffled order so orphans occur.
      std::vector<Block> order(made.begin() + 1, made.end());
      for (std::size_t i = order.size(); i > 1; --i)
         std::swap(order[i - 1], order[rng.below(i)]);
      BlockTree t;
      for (const auto& b : order) {
         t.insert_block(b);
         ASSERT_EQ(t.head(), t.recompute_head());
      }
      const auto chain = t.main_chain();
      ASSERT_EQ(chain.front(), genesis_block().hash);
      ASSERT_EQ(chain.back(), t.head());
      for (std::size_t i = 1; i < chain.size(); ++i) {
         ASSERT_EQ(t.block(chain[i]).parent, chain[i - 1]);
         ASSERT_EQ(t.block(chain[i]).height, i);
      }
      std::uint64_t deepest = 0;
      for (const auto& h : t.arrival_order())
         deepest = std::max(deepest, t.block(h).height);
      ASSERT_EQ(t.height(), deepest);
   }
}

TEST(Mining, SingleMinerMinesEverything)
{
   const auto events = simulate_mining({{1.0}, 60, 200, 3});
   ASSERT_EQ(events.size(), 200u);
   for (std::size_t i = 0; i < events.size(); ++i) {
      EXPECT_EQ(events[i].miner, 0u);
      if (i > 0)
         EXPECT_GE(events[i].mined_tick, events[i - 1].mined_tick);
   }
}

TEST(Mining, EqualSharesSplitEvenly)
{
   const auto events = simulate_mining({{0.5, 0.5}, 60, 10000, 1});
   const auto zero = std::count_if(events.begin(), events.end(), [](const MinedEvent& e) { return e.miner == 0; });
   EXPECT_NEAR(static_cast<double>(zero), 5000.0, 150.0);
   EXPECT_NEAR(static_cast<double>(events.size() - zero), 5000.0, 150.0);
}

TEST(Mining, MajorityMinerWinsInProportion)
{
   const auto events = simulate_mining({{0.74, 0.26}, 60, 10000, 2});
   const auto zero = std::count_if(events.begin(), events.end(), [](const MinedEvent& e) { return e.miner == 0; });
   EXPECT_NEAR(zero / 10000.0, 0.74, 0.02);
   // Mean interval close to the configured one.
   EXPECT_NEAR(static_cast<double>(events.back().mined_tick) / 10000.0, 60.0, 3.0);
}

TEST(Mining, SharesMustBeNormalized)
{
   EXPECT_THROW(check_shares({0.5, 0.4}), ConfigError);
   EXPECT_THROW(check_shares({1.2, -0.2}), ConfigError);
   EXPECT_THROW(check_shares({}), ConfigError);
   EXPECT_NO_THROW(check_shares({0.25, 0.25, 0.5}));
   EXPECT_THROW(simulate_mining({{0.3}, 60, 10, 1}), ConfigError);
}

TEST(ChainSim, DeterministicAgreedAndNoDuplicates)
{
   ChainSimConfig c;
   c.seed = 4;
   const auto a = run_scenario_chain(c);
   const auto b = run_scenario_chain(c);
   EXPECT_EQ(a.chain_order, b.chain_order);
   EXPECT_EQ(a.confirmed_at, b.confirmed_at);
   EXPECT_EQ(a.blocks_mined, b.blocks_mined);
   EXPECT_TRUE(a.agreement) << a.divergence;
   ASSERT_FALSE(a.chain_order.empty());

   std::set<std::uint64_t> seen;
   for (const auto& h : a.tree.main_chain())
      for (const auto& tx : a.tree.block(h).transactions)
         EXPECT_TRUE(seen.insert(tx.id).second) << "tx " << tx.id << " twice on the main chain";
   for (std::size_t i = 0; i < a.confirmed_at.size(); ++i)
      if (a.confirmed_at[i])
         EXPECT_GE(*a.confirmed_at[i], a.submitted_at[i]);
   EXPECT_EQ(a.tree.head(), a.tree.recompute_head());
}

TEST(ChainSim, SlowBlocksRarelyGoStale)
{
   double stale = 0;
   std::size_t blocks = 0;
   for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto r = run_scenario_chain(stale_config(seed, 1000));
      stale += static_cast<double>(r.stale_blocks);
      blocks += r.blocks_mined;
   }
   ASSERT_GT(blocks, 1000u);
   EXPECT_LT(stale / static_cast<double>(blocks), 0.01);
}

TEST(ChainSim, StaleRateRisesAsIntervalApproachesLatency)
{
   for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const double slow = run_scenario_chain(stale_config(seed, 80)).stale_rate;
      const double mid = run_scenario_chain(stale_config(seed, 20)).stale_rate;
      const double fast = run_scenario_chain(stale_config(seed, 8)).stale_rate;
      EXPECT_LT(slow, mid) << seed;
      EXPECT_LT(mid, fast) << seed;
   }
}

TEST(Attack, MajorityWithholderOvertakes)
{
   const auto strong = simulate_withholding_attack({0.6, 6, 100, 2000, 1});
   EXPECT_EQ(strong.trials, 100u);
   EXPECT_GT(strong.success_rate(), 0.5);
   const auto weak = simulate_withholding_attack({0.3, 6, 100, 2000, 1});
   EXPECT_LT(weak.success_rate(), 0.1);
   const auto mid = simulate_withholding_attack({0.45, 6, 100, 2000, 1});
   EXPECT_LE(weak.success_rate(), mid.success_rate());
   EXPECT_LE(mid.success_rate(), strong.success_rate());
}

TEST(ChainCsv, HeaderAndRows)
{
   BlockTree t;
   const Block a1 = child_of(genesis_block(), 2, {1, 2, 3});
   const Block b1 = child_of(genesis_block(), 1);
   t.insert_block(a1);
   t.insert_block(b1);
   std::ostringstream out;
   write_chain_csv(out, t);
   std::istringstream in(out.str());
   std::string line;
   std::getline(in, line);
   EXPECT_EQ(line, "hash,parent,height,miner,mined_tick,tx_count,on_main_chain");
   std::vector<std::string> rows;
   while (std::getline(in, line))
      rows.push_back(line);
   ASSERT_EQ(rows.size(), 3u);
   EXPECT_EQ(rows[1], a1.hash.hex() + "," + genesis_block().hash.hex() + ",1,2,1,3,1");
   EXPECT_EQ(rows[2], b1.hash.hex() + "," + genesis_block().hash.hex() + ",1,1,1,0,0");
}
