#include <ledgerlab/powchain.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <set>
#include <variant>

namespace ledgerlab::powchain {

void Block::seal()
{
   std::vector<std::uint8_t> buf;
   wire::put_digest(buf, parent);
   wire::put_u64(buf, height);
   wire::put_u32(buf, miner.index);
   wire::put_u64(buf, mined_tick);
   wire::put_u64(buf, nonce);
   wire::put_u32(buf, static_cast<std::uint32_t>(transactions.size()));
   for (const auto& tx : transactions)
      wire::put_u64(buf, tx.id);
   hash = sha256(buf);
}

const Block& genesis_block()
{
   static const Block g = [] {
      Block b;
      b.seal();
      return b;
   }();
   return g;
}

BlockTree::BlockTree()
{
   const Block& g = genesis_block();
   blocks_.emplace(g.hash, Node{g, {}, 0});
   arrivals_.push_back(g.hash);
   head_ = g.hash;
}

std::size_t BlockTree::orphan_count() const { return orphan_hashes_.size(); }

bool BlockTree::on_main_chain(const BlockHash& h) const
{
   auto it = blocks_.find(h);
   if (it == blocks_.end())
      return false;
   const std::uint64_t target = it->second.block.height;
   BlockHash at = head_;
   while (true) {
      const Block& b = block(at);
      if (b.height == target)
         return at == h;
      if (b.height < target)
         return false;
      at = b.parent;
   }
}

std::vector<BlockHash> BlockTree::main_chain() const
{
   std::vector<BlockHash> out;
   BlockHash at = head_;
   for (;;) {
      out.push_back(at);
      const Block& b = block(at);
      if (b.height == 0)
         break;
      at = b.parent;
   }
   std::reverse(out.begin(), out.end());
   return out;
}

BlockHash BlockTree::recompute_head() const
{
   const Node* best = nullptr;
   for (const auto& [h, node] : blocks_) {
      if (!best || node.block.height > best->block.height ||
          (node.block.height == best->block.height && node.arrival < best->arrival))
         best = &node;
   }
   return best->block.hash;
}

void BlockTree::connect(const Block& block, InsertResult& result)
{
   Node& parent = blocks_.at(block.parent);
   parent.children.push_back(block.hash);
   blocks_.emplace(block.hash, Node{block, {}, arrivals_.size()});
   arrivals_.push_back(block.hash);
   ++result.connected;

   if (block.height <= this->block(head_).height)
      return;

   // Walk both branches back to their common ancestor.
   BlockHash old_at = head_;
   BlockHash new_at = block.hash;
   std::vector<const Block*> old_branch, new_branch;
   while (this->block(new_at).height > this->block(old_at).height) {
      new_branch.push_back(&this->block(new_at));
      new_at = this->block(new_at).parent;
   }
   while (old_at != new_at) {
      old_branch.push_back(&this->block(old_at));
      new_branch.push_back(&this->block(new_at));
      old_at = this->block(old_at).parent;
      new_at = this->block(new_at).parent;
   }
   if (!old_branch.empty())
      result.reorg = true;
   for (auto it = old_branch.rbegin(); it != old_branch.rend(); ++it)
      for (const auto& tx : (*it)->transactions)
         result.pruned.push_back(tx);
   for (auto it = new_branch.rbegin(); it != new_branch.rend(); ++it)
      for (const auto& tx : (*it)->transactions)
         result.added.push_back(tx);
   head_ = block.hash;
   result.head_changed = true;
}

InsertResult BlockTree::insert_block(const Block& block)
{
   if (blocks_.contains(block.hash) || orphan_hashes_.contains(block.hash))
      throw DuplicateBlock(block.hash);
   InsertResult result;
   auto parent = blocks_.find(block.parent);
   if (parent == blocks_.end()) {
      orphans_[block.parent].push_back(block);
      orphan_hashes_.insert(block.hash);
      result.buffered = true;
      result.head = head_;
      return result;
   }
   if (block.height != parent->second.block.height + 1)
      throw Error("InvalidBlock", "height does not follow parent");

   std::vector<Block> ready{block};
   while (!ready.empty()) {
      Block b = std::move(ready.back());
      ready.pop_back();
      connect(b, result);
      if (auto it = orphans_.find(b.hash); it != orphans_.end()) {
         for (auto& child : it->second) {
            orphan_hashes_.erase(child.hash);
            if (child.height == b.height + 1)
               ready.push_back(std::move(child));
         }
         orphans_.erase(it);
      }
   }

   // Transactions that moved off and back onto the main chain within one
   // insert are neither pruned nor added.
   if (!result.pruned.empty() && !result.added.empty()) {
      std::unordered_set<std::uint64_t> added_ids, pruned_ids;
      for (const auto& tx : result.added)
         added_ids.insert(tx.id);
      for (const auto& tx : result.pruned)
         pruned_ids.insert(tx.id);
      std::erase_if(result.pruned, [&](const Transaction& tx) { return added_ids.contains(tx.id); });
      std::erase_if(result.added, [&](const Transaction& tx) { return pruned_ids.contains(tx.id); });
   }
   result.head = head_;
   return result;
}

void check_shares(const std::vector<double>& shares)
{
   if (shares.empty())
      throw ConfigError("no hash-power shares given");
   double sum = 0;
   for (double s : shares) {
      if (!(s >= 0) || !std::isfinite(s))
         throw ConfigError("hash-power shares must be non-negative");
      sum += s;
   }
   if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("hash-power shares sum to " + std::to_string(sum) + ", not 1");
}

std::uint32_t pick_miner(const std::vector<double>& shares, Rng& rng)
{
   double u = rng.uniform01();
   for (std::uint32_t i = 0; i < shares.size(); ++i) {
      if (u < shares[i])
         return i;
      u -= shares[i];
   }
   // Rounding left a sliver past the last share; give it to the last miner
   // with any power.
   for (auto i = static_cast<std::uint32_t>(shares.size()); i-- > 0;)
      if (shares[i] > 0)
         return i;
   return 0;
}

std::vector<MinedEvent> simulate_mining(const MiningConfig& config)
{
   check_shares(config.shares);
   if (!(config.block_interval > 0))
      throw ConfigError("block interval must be positive");
   Rng time_rng = Rng::derive(config.seed, 8);
   Rng miner_rng = Rng::derive(config.seed, 9);
   std::vector<MinedEvent> out;
   out.reserve(config.blocks);
   double t = 0;
   for (std::size_t i = 0; i < config.blocks; ++i) {
      t += time_rng.exponential(config.block_interval);
      out.push_back({pick_miner(config.shares, miner_rng), static_cast<Tick>(t)});
   }
   return out;
}

namespace {

struct TxArrival
{
   std::uint32_t member;
};
struct TxDeliver
{
   std::uint32_t member;
   std::uint64_t tx_id;
};
struct Mine
{};
struct BlockDeliver
{
   std::uint32_t member;
   std::shared_ptr<const Block> block;
};
using Action = std::variant<TxArrival, TxDeliver, Mine, BlockDeliver>;

/// Pending transactions, highest fee first, ties by id.
struct FeeOrder
{
   bool operator()(const std::pair<double, std::uint64_t>& a, const std::pair<double, std::uint64_t>& b) const
   {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
   }
};

struct ChainNode
{
   BlockTree tree;
   std::set<std::pair<double, std::uint64_t>, FeeOrder> pool;
   std::unordered_set<std::uint64_t> on_chain;
};

} // namespace

ChainRunResult run_scenario_chain(const ChainSimConfig& config)
{
   if (config.n == 0)
      throw ConfigError("chain scenario needs at least one member");
   if (config.horizon == 0)
      throw ConfigError("zero horizon");
   if (config.tx_rate < 0)
      throw ConfigError("negative transaction rate");
   if (!(config.block_interval > 0))
      throw ConfigError("block interval must be positive");
   if (config.block_capacity == 0)
      throw ConfigError("block capacity must be positive");
   if (config.confirmations == 0)
      throw ConfigError("confirmation depth must be positive");
   std::vector<double> shares = config.shares;
   if (shares.empty())
      shares.assign(config.n, 1.0 / config.n);
   if (shares.size() != config.n)
      throw ConfigError("share list length differs from n");
   check_shares(shares);

   Rng tx_rng = Rng::derive(config.seed, 3);
   Rng latency_rng = Rng::derive(config.seed, 2);
   Rng time_rng = Rng::derive(config.seed, 8);
   Rng miner_rng = Rng::derive(config.seed, 9);
   Rng fee_rng = Rng::derive(config.seed, 10);

   ChainRunResult result;
   std::vector<ChainNode> nodes(config.n);
   std::vector<Transaction> txs;
   std::vector<double> fees;
   std::vector<Tick> channel_clock(static_cast<std::size_t>(config.n) * config.n, 0);
   std::vector<double> next_arrival(config.n, 0.0);
   Scheduler<Action> sched;
   std::uint64_t nonce = 0;
   std::size_t confirmed_count = 0;
   std::unordered_set<BlockHash> buried; // member 0's k-deep blocks

   auto link_delay = [&](std::uint32_t from, std::uint32_t to, Tick now) {
      Tick t = now + config.latency.base + latency_rng.below(config.latency.jitter + 1);
      Tick& clock = channel_clock[static_cast<std::size_t>(from) * config.n + to];
      t = std::max(t, clock);
      clock = t;
      return t;
   };

   auto schedule_arrival = [&](std::uint32_t m) {
      next_arrival[m] += tx_rng.exponential(1.0 / config.tx_rate);
      const auto at = static_cast<Tick>(next_arrival[m]);
      if (at < config.horizon)
         sched.push(at, TxArrival{m});
   };

   double next_block = time_rng.exponential(config.block_interval);
   sched.push(static_cast<Tick>(next_block), Mine{});
   if (config.tx_rate > 0)
      for (std::uint32_t m = 0; m < config.n; ++m)
         schedule_arrival(m);

   auto mark_buried = [&](Tick now) {
      ChainNode& node = nodes[0];
      const std::uint64_t h = node.tree.height();
      if (h + 1 < config.confirmations + 1)
         return;
      const std::uint64_t deepest = h + 1 - config.confirmations;
      BlockHash at = node.tree.head();
      while (node.tree.block(at).height > deepest)
         at = node.tree.block(at).parent;
      while (node.tree.block(at).height > 0 && !buried.contains(at)) {
         buried.insert(at);
         for (const auto& tx : node.tree.block(at).transactions) {
            if (!result.confirmed_at[tx.id - 1]) {
               result.confirmed_at[tx.id - 1] = now;
               ++confirmed_count;
            }
         }
         at = node.tree.block(at).parent;
      }
   };

   auto apply = [&](std::uint32_t m, const InsertResult& r, Tick now) {
      ChainNode& node = nodes[m];
      for (const auto& tx : r.pruned) {
         node.on_chain.erase(tx.id);
         node.pool.insert({fees[tx.id - 1], tx.id});
      }
      for (const auto& tx : r.added) {
         node.on_chain.insert(tx.id);
         node.pool.erase({fees[tx.id - 1], tx.id});
      }
      if (r.reorg)
         ++result.reorgs;
      if (m == 0 && r.head_changed)
         mark_buried(now);
   };

   const Tick end = config.horizon + config.drain_ticks;
   Tick now = 0;
   while (!sched.empty() && sched.next_tick() <= end) {
      auto entry = sched.pop();
      now = entry.at;
      if (auto* a = std::get_if<TxArrival>(&entry.action)) {
         Transaction tx;
         tx.id = txs.size() + 1;
         tx.submitter = MemberId{a->member};
         tx.submitted_at = now;
         txs.push_back(tx);
         fees.push_back(fee_rng.exponential(config.mean_fee));
         result.submitted_at.push_back(now);
         result.submitter.push_back(tx.submitter);
         result.confirmed_at.emplace_back();
         nodes[a->member].pool.insert({fees.back(), tx.id});
         for (std::uint32_t to = 0; to < config.n; ++to)
            if (to != a->member)
               sched.push(link_delay(a->member, to, now), TxDeliver{to, tx.id});
         schedule_arrival(a->member);
      } else if (auto* d = std::get_if<TxDeliver>(&entry.action)) {
         ChainNode& node = nodes[d->member];
         if (!node.on_chain.contains(d->tx_id))
            node.pool.insert({fees[d->tx_id - 1], d->tx_id});
      } else if (std::holds_alternative<Mine>(entry.action)) {
         const std::uint32_t m = pick_miner(shares, miner_rng);
         ChainNode& node = nodes[m];
         auto block = std::make_shared<Block>();
         block->parent = node.tree.head();
         block->height = node.tree.height() + 1;
         block->miner = MemberId{m};
         block->mined_tick = now;
         block->nonce = nonce++;
         for (auto it = node.pool.begin(); it != node.pool.end() && block->transactions.size() < config.block_capacity;
              ++it)
            block->transactions.push_back(txs[it->second - 1]);
         block->seal();
         ++result.blocks_mined;
         apply(m, node.tree.insert_block(*block), now);
         for (std::uint32_t to = 0; to < config.n; ++to)
            if (to != m)
               sched.push(link_delay(m, to, now), BlockDeliver{to, block});
         next_block += time_rng.exponential(config.block_interval);
         sched.push(std::max(now, static_cast<Tick>(next_block)), Mine{});
      } else if (auto* bd = std::get_if<BlockDeliver>(&entry.action)) {
         apply(bd->member, nodes[bd->member].tree.insert_block(*bd->block), now);
      }
      if (now >= config.horizon && confirmed_count == txs.size())
         break;
   }
   result.end_tick = now;

   // Confirmations that a late reorg undid do not count.
   const BlockTree& tree0 = nodes[0].tree;
   const auto chain0 = tree0.main_chain();
   std::vector<bool> final_on_chain(txs.size(), false);
   for (const auto& h : chain0)
      for (const auto& tx : tree0.block(h).transactions) {
         final_on_chain[tx.id - 1] = true;
         if (result.confirmed_at[tx.id - 1])
            result.chain_order.push_back(tx.id);
      }
   for (std::size_t i = 0; i < txs.size(); ++i)
      if (!final_on_chain[i])
         result.confirmed_at[i].reset();

   result.stale_blocks = (tree0.size() - 1) - (chain0.size() - 1);
   result.stale_rate = tree0.size() > 1 ? static_cast<double>(result.stale_blocks) / (tree0.size() - 1) : 0.0;

   std::uint64_t min_height = std::numeric_limits<std::uint64_t>::max();
   for (const auto& node : nodes)
      min_height = std::min(min_height, node.tree.height());
   if (min_height + 1 > config.confirmations) {
      const std::uint64_t settled = min_height + 1 - config.confirmations;
      for (std::uint32_t m = 1; m < config.n && result.agreement; ++m) {
         const auto chain = nodes[m].tree.main_chain();
         for (std::uint64_t h = 0; h <= settled; ++h) {
            if (chain[h] != chain0[h]) {
               result.agreement = false;
               result.divergence = "members 0 and " + std::to_string(m) + " differ at height " + std::to_string(h);
               break;
            }
         }
      }
   }
   result.tree = std::move(nodes[0].tree);
   return result;
}

AttackResult simulate_withholding_attack(const AttackConfig& config)
{
   if (!(config.attacker_share > 0) || !(config.attacker_share < 1))
      throw ConfigError("attacker share must lie strictly between 0 and 1");
   if (config.lead == 0 || config.trials == 0)
      throw ConfigError("attack needs a positive lead and at least one trial");
   AttackResult out;
   const std::vector<double> shares{1.0 - config.attacker_share, config.attacker_share};
   for (std::uint32_t trial = 0; trial < config.trials; ++trial) {
      ++out.trials;
      BlockTree honest;
      std::uint64_t nonce = 0;
      auto make = [&](const BlockHash& parent, std::uint64_t height, std::uint32_t miner, Tick t) {
         Block b;
         b.parent = parent;
         b.height = height;
         b.miner = MemberId{miner};
         b.mined_tick = t;
         b.nonce = nonce++;
         b.seal();
         return b;
      };
      // The honest chain already buries the victim block `lead` deep; the
      // attacker's branch starts from genesis, beside the victim block.
      for (std::uint32_t i = 1; i <= config.lead; ++i)
         honest.insert_block(make(honest.head(), i, 0, 0));
      const BlockHash victim = honest.main_chain().at(1);

      std::vector<Block> hidden;
      BlockHash private_head = genesis_block().hash;
      const auto races = simulate_mining({shares, 1.0, config.max_blocks, Rng::derive(config.seed, trial).next_u64()});
      for (const auto& ev : races) {
         if (ev.miner == 0) {
            honest.insert_block(make(honest.head(), honest.height() + 1, 0, ev.mined_tick));
            continue;
         }
         hidden.push_back(make(private_head, hidden.size() + 1, 1, ev.mined_tick));
         private_head = hidden.back().hash;
         if (hidden.size() > honest.height()) {
            for (const auto& b : hidden)
               honest.insert_block(b);
            if (!honest.on_main_chain(victim))
               ++out.successes;
            break;
         }
      }
   }
   return out;
}

void write_chain_csv(std::ostream& out, const BlockTree& tree)
{
   out << "hash,parent,height,miner,mined_tick,tx_count,on_main_chain\n";
   std::unordered_set<BlockHash> main;
   for (const auto& h : tree.main_chain())
      main.insert(h);
   for (const auto& h : tree.arrival_order()) {
      const Block& b = tree.block(h);
      out << b.hash.hex() << ',' << b.parent.hex() << ',' << b.height << ',' << b.miner.index << ','
          << b.mined_tick << ',' << b.transactions.size() << ',' << (main.contains(h) ? 1 : 0) << '\n';
   }
}

} // namespace ledgerlab::powchain
