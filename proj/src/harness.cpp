#include <ledgerlab/harness.hpp>

#include <ledgerlab/gossip.hpp>
#include <ledgerlab/powchain.hpp>
#include <ledgerlab/tangle.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ledgerlab::harness {

using nlohmann::json;

const char* to_string(Protocol p)
{
   switch (p) {
   case Protocol::Hashgraph: return "hashgraph";
   case Protocol::Tangle: return "tangle";
   case Protocol::Powchain: return "powchain";
   case Protocol::Compare: return "compare";
   }
   return "?";
}

Protocol protocol_from_string(const std::string& s)
{
   for (auto p : {Protocol::Hashgraph, Protocol::Tangle, Protocol::Powchain, Protocol::Compare})
      if (s == to_string(p))
         return p;
   throw ValidationError("protocol", "unknown protocol '" + s + "'");
}

Tick default_drain(Protocol p)
{
   switch (p) {
   case Protocol::Powchain: return 5000;
   case Protocol::Tangle: return 1500;
   default: return 1000;
   }
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
   if (!j.is_object())
      throw ValidationError(path.empty() ? "/" : path, "expected an object");
   for (const auto& [key, value] : j.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!known)
         throw ValidationError(join(path, key), "unknown key");
   }
}

template <class T>
void read(const json& j, const std::string& path, const char* key, T& out)
{
   auto it = j.find(key);
   if (it == j.end())
      return;
   const std::string field = join(path, key);
   if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean())
         throw ValidationError(field, "expected a boolean");
      out = it->get<bool>();
   } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number())
         throw ValidationError(field, "expected a number");
      out = it->get<double>();
   } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer())
         throw ValidationError(field, "expected an integer");
      if (it->is_number_unsigned()) {
         const auto v = it->get<std::uint64_t>();
         if (v > std::numeric_limits<T>::max())
            throw ValidationError(field, "value out of range");
         out = static_cast<T>(v);
      } else {
         const auto v = it->get<std::int64_t>();
         if (v < 0)
            throw ValidationError(field, "must not be negative");
         if (static_cast<std::uint64_t>(v) > std::numeric_limits<T>::max())
            throw ValidationError(field, "value out of range");
         out = static_cast<T>(v);
      }
   } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string())
         throw ValidationError(field, "expected a string");
      out = it->get<std::string>();
   }
}

template <class T>
void read_opt(const json& j, const std::string& path, const char* key, std::optional<T>& out)
{
   auto it = j.find(key);
   if (it == j.end() || it->is_null())
      return;
   T v{};
   read(j, path, key, v);
   out = v;
}

const json* section(const json& j, const char* key)
{
   auto it = j.find(key);
   return it == j.end() ? nullptr : &*it;
}

ScenarioConfig from_json(const json& j)
{
   check_keys(j, "",
              {"protocol", "name", "n", "seed", "horizon_ticks", "drain_ticks", "tx_rate", "latency", "adversary",
               "allow_overfault", "hashgraph", "tangle", "powchain", "compare"});
   ScenarioConfig c;
   if (!j.contains("protocol"))
      throw ValidationError("protocol", "required");
   std::string proto;
   read(j, "", "protocol", proto);
   c.protocol = protocol_from_string(proto);
   read(j, "", "name", c.name);
   read(j, "", "n", c.n);
   read(j, "", "seed", c.seed);
   read(j, "", "horizon_ticks", c.horizon_ticks);
   read_opt(j, "", "drain_ticks", c.drain_ticks);
   read(j, "", "tx_rate", c.tx_rate);
   read(j, "", "allow_overfault", c.allow_overfault);

   if (const json* s = section(j, "latency")) {
      check_keys(*s, "latency", {"base", "jitter"});
      read(*s, "latency", "base", c.latency.base);
      read(*s, "latency", "jitter", c.latency.jitter);
   }
   if (const json* s = section(j, "adversary")) {
      const std::string p = "adversary";
      check_keys(*s, p, {"forkers", "silent", "delayers", "fork_rate", "delay_ticks"});
      read(*s, p, "forkers", c.adversary.forkers);
      read(*s, p, "silent", c.adversary.silent);
      read(*s, p, "delayers", c.adversary.delayers);
      read(*s, p, "fork_rate", c.adversary.fork_rate);
      read(*s, p, "delay_ticks", c.adversary.delay_ticks);
   }
   if (const json* s = section(j, "hashgraph")) {
      const std::string p = "hashgraph";
      check_keys(*s, p, {"sync_period", "coin_period", "full_history", "suppress_empty_events", "payload_bytes"});
      read(*s, p, "sync_period", c.hashgraph.sync_period);
      read(*s, p, "coin_period", c.hashgraph.coin_period);
      read(*s, p, "full_history", c.hashgraph.full_history);
      read(*s, p, "suppress_empty_events", c.hashgraph.suppress_empty_events);
      read(*s, p, "payload_bytes", c.hashgraph.payload_bytes);
   }
   if (const json* s = section(j, "tangle")) {
      const std::string p = "tangle";
      check_keys(*s, p,
                 {"walk_alpha", "pow_ticks", "coordinator_interval", "confidence_walks", "confidence_threshold",
                  "confidence_interval", "promote_after"});
      read_opt(*s, p, "walk_alpha", c.tangle.walk_alpha);
      read(*s, p, "pow_ticks", c.tangle.pow_ticks);
      read(*s, p, "coordinator_interval", c.tangle.coordinator_interval);
      read(*s, p, "confidence_walks", c.tangle.confidence_walks);
      read(*s, p, "confidence_threshold", c.tangle.confidence_threshold);
      read(*s, p, "confidence_interval", c.tangle.confidence_interval);
      read(*s, p, "promote_after", c.tangle.promote_after);
   }
   if (const json* s = section(j, "powchain")) {
      const std::string p = "powchain";
      check_keys(*s, p, {"block_interval", "block_capacity", "confirmations", "shares", "mean_fee"});
      read(*s, p, "block_interval", c.powchain.block_interval);
      read(*s, p, "block_capacity", c.powchain.block_capacity);
      read(*s, p, "confirmations", c.powchain.confirmations);
      read(*s, p, "mean_fee", c.powchain.mean_fee);
      if (const json* sh = section(*s, "shares")) {
         if (!sh->is_array())
            throw ValidationError("powchain.shares", "expected an array");
         for (std::size_t i = 0; i < sh->size(); ++i) {
            if (!(*sh)[i].is_number())
               throw ValidationError("powchain.shares." + std::to_string(i), "expected a number");
            c.powchain.shares.push_back((*sh)[i].get<double>());
         }
      }
   }
   if (const json* s = section(j, "compare")) {
      if (!s->is_array())
         throw ValidationError("compare", "expected an array of protocol names");
      for (std::size_t i = 0; i < s->size(); ++i) {
         if (!(*s)[i].is_string())
            throw ValidationError("compare." + std::to_string(i), "expected a protocol name");
         try {
            c.compare.push_back(protocol_from_string((*s)[i].get<std::string>()));
         } catch (const ValidationError& e) {
            throw ValidationError("compare." + std::to_string(i), e.what());
         }
      }
   }
   return c;
}

void require(bool ok, const std::string& field, const std::string& detail)
{
   if (!ok)
      throw ValidationError(field, detail);
}

} // namespace

void validate(const ScenarioConfig& c)
{
   const bool hashgraph_runs =
      c.protocol == Protocol::Hashgraph ||
      (c.protocol == Protocol::Compare &&
       std::find(c.compare.begin(), c.compare.end(), Protocol::Hashgraph) != c.compare.end());
   require(c.n >= 1, "n", "at least one member is required");
   if (hashgraph_runs)
      require(c.n >= 2, "n", "hashgraph needs at least 2 members, a sync needs a peer");
   require(c.n <= 1000, "n", "at most 1000 members are supported");
   require(c.horizon_ticks > 0, "horizon_ticks", "must be positive");
   require(std::isfinite(c.tx_rate) && c.tx_rate >= 0, "tx_rate", "must be a non-negative number");

   const auto& a = c.adversary;
   require(a.fork_rate >= 0 && a.fork_rate <= 1, "adversary.fork_rate", "must lie in [0, 1]");
   if (a.total() > 0) {
      require(c.protocol == Protocol::Hashgraph, "adversary", "adversaries are only modeled for hashgraph scenarios");
      require(a.total() < c.n, "adversary", "at least one member must be honest");
      require(c.allow_overfault || 3 * a.total() < c.n, "adversary",
              std::to_string(a.total()) + " adversaries with n = " + std::to_string(c.n) +
                 " break the bound of fewer than n/3 faulty members (set allow_overfault to run anyway)");
   }

   require(c.hashgraph.sync_period >= 1, "hashgraph.sync_period", "must be positive");
   require(c.hashgraph.coin_period >= 2, "hashgraph.coin_period", "must be at least 2");

   require(c.tangle.confidence_walks >= 1, "tangle.confidence_walks", "must be at least 1");
   require(c.tangle.confidence_threshold > 0 && c.tangle.confidence_threshold <= 1, "tangle.confidence_threshold",
           "must lie in (0, 1]");
   require(c.tangle.confidence_interval >= 1, "tangle.confidence_interval", "must be positive");
   if (c.tangle.walk_alpha)
      require(std::isfinite(*c.tangle.walk_alpha) && *c.tangle.walk_alpha >= 0, "tangle.walk_alpha",
              "must be a non-negative number");

   require(std::isfinite(c.powchain.block_interval) && c.powchain.block_interval > 0, "powchain.block_interval",
           "must be positive");
   require(c.powchain.block_capacity >= 1, "powchain.block_capacity", "must be positive");
   require(c.powchain.confirmations >= 1, "powchain.confirmations", "must be positive");
   require(std::isfinite(c.powchain.mean_fee) && c.powchain.mean_fee >= 0, "powchain.mean_fee",
           "must be non-negative");
   if (!c.powchain.shares.empty()) {
      require(c.powchain.shares.size() == c.n, "powchain.shares", "needs one share per member");
      try {
         powchain::check_shares(c.powchain.shares);
      } catch (const ConfigError& e) {
         throw ValidationError("powchain.shares", e.what());
      }
   }

   if (c.protocol == Protocol::Compare) {
      require(c.compare.size() >= 2, "compare", "a comparison needs at least two protocols");
      for (std::size_t i = 0; i < c.compare.size(); ++i)
         require(c.compare[i] != Protocol::Compare, "compare." + std::to_string(i), "cannot nest compare");
   } else {
      require(c.compare.empty(), "compare", "only allowed when protocol is compare");
   }
}

ScenarioConfig parse_config(const std::string& text, const Overrides& overrides)
{
   json j;
   try {
      j = json::parse(text);
   } catch (const json::parse_error& e) {
      throw ParseError(e.what());
   }
   ScenarioConfig c = from_json(j);
   if (overrides.seed)
      c.seed = *overrides.seed;
   c.allow_overfault = c.allow_overfault || overrides.allow_overfault;
   validate(c);
   return c;
}

ScenarioConfig load_config(const std::filesystem::path& path, const Overrides& overrides)
{
   std::ifstream in(path);
   if (!in)
      throw ParseError("cannot open " + path.string());
   std::stringstream ss;
   ss << in.rdbuf();
   return parse_config(ss.str(), overrides);
}

json to_json(const ScenarioConfig& c)
{
   json j;
   j["protocol"] = to_string(c.protocol);
   j["name"] = c.name;
   j["n"] = c.n;
   j["seed"] = c.seed;
   j["horizon_ticks"] = c.horizon_ticks;
   j["drain_ticks"] = c.drain_ticks ? json(*c.drain_ticks) : json(nullptr);
   j["tx_rate"] = c.tx_rate;
   j["latency"] = {{"base", c.latency.base}, {"jitter", c.latency.jitter}};
   j["adversary"] = {{"forkers", c.adversary.forkers},
                     {"silent", c.adversary.silent},
                     {"delayers", c.adversary.delayers},
                     {"fork_rate", c.adversary.fork_rate},
                     {"delay_ticks", c.adversary.delay_ticks}};
   j["allow_overfault"] = c.allow_overfault;
   j["hashgraph"] = {{"sync_period", c.hashgraph.sync_period},
                     {"coin_period", c.hashgraph.coin_period},
                     {"full_history", c.hashgraph.full_history},
                     {"suppress_empty_events", c.hashgraph.suppress_empty_events},
                     {"payload_bytes", c.hashgraph.payload_bytes}};
   j["tangle"] = {{"walk_alpha", c.tangle.walk_alpha ? json(*c.tangle.walk_alpha) : json(nullptr)},
                  {"pow_ticks", c.tangle.pow_ticks},
                  {"coordinator_interval", c.tangle.coordinator_interval},
                  {"confidence_walks", c.tangle.confidence_walks},
                  {"confidence_threshold", c.tangle.confidence_threshold},
                  {"confidence_interval", c.tangle.confidence_interval},
                  {"promote_after", c.tangle.promote_after}};
   j["powchain"] = {{"block_interval", c.powchain.block_interval},
                    {"block_capacity", c.powchain.block_capacity},
                    {"confirmations", c.powchain.confirmations},
                    {"shares", c.powchain.shares},
                    {"mean_fee", c.powchain.mean_fee}};
   json cmp = json::array();
   for (auto p : c.compare)
      cmp.push_back(to_string(p));
   j["compare"] = cmp;
   return j;
}

json to_json(const MetricsReport& r)
{
   json j;
   j["protocol"] = r.protocol;
   j["name"] = r.name;
   j["n"] = r.n;
   j["seed"] = r.seed;
   j["agreement"] = r.agreement;
   j["divergence"] = r.divergence;
   j["submitted"] = r.submitted;
   j["confirmed"] = r.confirmed;
   j["latency_mean"] = r.latency_mean;
   j["latency_p95"] = r.latency_p95;
   j["throughput_per_1000"] = r.throughput_per_1000;
   j["fairness_inversion_rate"] = r.fairness_inversion_rate;
   j["baseline_inversion_rate"] = r.baseline_inversion_rate ? json(*r.baseline_inversion_rate) : json(nullptr);
   j["stale_rate"] = r.stale_rate;
   j["competition"] = r.competition;
   j["end_tick"] = r.end_tick;
   if (r.propagation)
      j["propagation"] = {{"mean", r.propagation->mean},
                          {"min", r.propagation->min},
                          {"max", r.propagation->max},
                          {"trials", r.propagation->trials}};
   else
      j["propagation"] = nullptr;
   j["counters"] = r.counters;
   j["latency_samples"] = r.latency_samples;
   return j;
}

MetricsReport report_from_json(const json& j)
{
   try {
      MetricsReport r;
      r.protocol = j.at("protocol").get<std::string>();
      r.name = j.at("name").get<std::string>();
      r.n = j.at("n").get<std::uint32_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.agreement = j.at("agreement").get<bool>();
      r.divergence = j.at("divergence").get<std::string>();
      r.submitted = j.at("submitted").get<std::uint64_t>();
      r.confirmed = j.at("confirmed").get<std::uint64_t>();
      r.latency_mean = j.at("latency_mean").get<double>();
      r.latency_p95 = j.at("latency_p95").get<double>();
      r.throughput_per_1000 = j.at("throughput_per_1000").get<double>();
      r.fairness_inversion_rate = j.at("fairness_inversion_rate").get<double>();
      if (!j.at("baseline_inversion_rate").is_null())
         r.baseline_inversion_rate = j.at("baseline_inversion_rate").get<double>();
      r.stale_rate = j.at("stale_rate").get<double>();
      r.competition = j.at("competition").get<bool>();
      r.end_tick = j.at("end_tick").get<Tick>();
      if (const auto& p = j.at("propagation"); !p.is_null())
         r.propagation = PropagationSummary{p.at("mean").get<double>(), p.at("min").get<Tick>(),
                                            p.at("max").get<Tick>(), p.at("trials").get<std::uint32_t>()};
      r.counters = j.at("counters").get<std::map<std::string, double>>();
      r.latency_samples = j.at("latency_samples").get<std::vector<Tick>>();
      return r;
   } catch (const json::exception& e) {
      throw ParseError(std::string("malformed report: ") + e.what());
   }
}

std::string dump_report(const MetricsReport& report) { return to_json(report).dump(2) + "\n"; }

double percentile(std::vector<Tick> samples, double q)
{
   if (samples.empty())
      throw std::invalid_argument("percentile of an empty set");
   std::sort(samples.begin(), samples.end());
   auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
   rank = std::clamp<std::size_t>(rank, 1, samples.size());
   return static_cast<double>(samples[rank - 1]);
}

double inversion_rate(const std::vector<std::uint64_t>& order, const std::vector<Tick>& submitted_at)
{
   const std::size_t m = order.size();
   if (m < 2)
      return 0.0;
   std::vector<Tick> keys;
   keys.reserve(m);
   for (auto id : order)
      keys.push_back(submitted_at.at(id - 1));
   std::vector<Tick> sorted = keys;
   std::sort(sorted.begin(), sorted.end());
   sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

   // Fenwick tree over compressed submission ticks: for each position count
   // earlier entries submitted strictly later.
   std::vector<std::uint64_t> tree(sorted.size() + 1, 0);
   std::vector<std::uint64_t> same(sorted.size(), 0);
   std::uint64_t inversions = 0;
   for (std::size_t i = 0; i < m; ++i) {
      const auto rank = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), keys[i]) - sorted.begin());
      std::uint64_t not_later = 0;
      for (std::size_t k = rank + 1; k > 0; k -= k & (~k + 1))
         not_later += tree[k];
      inversions += i - not_later;
      for (std::size_t k = rank + 1; k < tree.size(); k += k & (~k + 1))
         ++tree[k];
      ++same[rank];
   }
   std::uint64_t comparable = static_cast<std::uint64_t>(m) * (m - 1) / 2;
   for (auto s : same)
      comparable -= s * (s - 1) / 2;
   return comparable ? static_cast<double>(inversions) / static_cast<double>(comparable) : 0.0;
}

namespace {

void fill_latency(MetricsReport& r, const std::vector<Tick>& submitted_at,
                  const std::vector<std::optional<Tick>>& confirmed_at, const std::vector<bool>& counted)
{
   Tick last = 0;
   double sum = 0;
   for (std::size_t i = 0; i < submitted_at.size(); ++i) {
      if (!counted[i])
         continue;
      ++r.submitted;
      if (!confirmed_at[i])
         continue;
      const Tick lat = *confirmed_at[i] - submitted_at[i];
      r.latency_samples.push_back(lat);
      sum += static_cast<double>(lat);
      last = std::max(last, *confirmed_at[i]);
   }
   r.confirmed = r.latency_samples.size();
   if (r.confirmed > 0) {
      r.latency_mean = sum / static_cast<double>(r.confirmed);
      r.latency_p95 = percentile(r.latency_samples, 0.95);
   }
   r.throughput_per_1000 = last > 0 ? 1000.0 * static_cast<double>(r.confirmed) / static_cast<double>(last) : 0.0;
}

std::string samples_csv(const std::vector<Tick>& submitted_at, const std::vector<std::optional<Tick>>& confirmed_at)
{
   std::ostringstream out;
   out << "tx_id,submitted_at,confirmed_at,latency\n";
   for (std::size_t i = 0; i < submitted_at.size(); ++i) {
      out << i + 1 << ',' << submitted_at[i] << ',';
      if (confirmed_at[i])
         out << *confirmed_at[i] << ',' << *confirmed_at[i] - submitted_at[i];
      else
         out << ',';
      out << '\n';
   }
   return out.str();
}

MetricsReport run_hashgraph(const ScenarioConfig& c, Artifacts* artifacts)
{
   gossip::HashgraphSimConfig sc;
   sc.n = c.n;
   sc.seed = c.seed;
   sc.horizon = c.horizon_ticks;
   sc.drain_ticks = c.drain_ticks.value_or(default_drain(Protocol::Hashgraph));
   sc.tx_rate = c.tx_rate;
   sc.payload_bytes = c.hashgraph.payload_bytes;
   sc.latency = c.latency;
   sc.fork_rate = c.adversary.fork_rate;
   sc.delay_ticks = c.adversary.delay_ticks;
   sc.sync_period = c.hashgraph.sync_period;
   sc.consensus.coin_period = c.hashgraph.coin_period;
   sc.full_history = c.hashgraph.full_history;
   sc.suppress_empty_events = c.hashgraph.suppress_empty_events;
   sc.record_messages = artifacts != nullptr;
   // Adversaries take the highest member ids.
   sc.behaviors.assign(c.n, gossip::Behavior::Honest);
   std::uint32_t slot = c.n;
   for (std::uint32_t i = 0; i < c.adversary.forkers; ++i)
      sc.behaviors[--slot] = gossip::Behavior::Forker;
   for (std::uint32_t i = 0; i < c.adversary.silent; ++i)
      sc.behaviors[--slot] = gossip::Behavior::Silent;
   for (std::uint32_t i = 0; i < c.adversary.delayers; ++i)
      sc.behaviors[--slot] = gossip::Behavior::Delayer;

   gossip::HashgraphNetwork net(sc);
   const auto res = net.run();

   MetricsReport r;
   r.protocol = "hashgraph";
   r.agreement = res.agreement;
   r.divergence = res.divergence;
   r.end_tick = res.end_tick;

   std::vector<Tick> submitted_at;
   std::vector<bool> counted;
   for (const auto& tx : res.transactions) {
      submitted_at.push_back(tx.submitted_at);
      counted.push_back(res.behaviors[tx.submitter.index] == gossip::Behavior::Honest);
   }
   fill_latency(r, submitted_at, res.confirmed_at, counted);

   std::uint32_t first_honest = 0;
   while (res.behaviors[first_honest] != gossip::Behavior::Honest)
      ++first_honest;
   std::vector<std::uint64_t> order, baseline;
   for (const auto& o : res.logs[first_honest])
      if (counted[o.transaction.id - 1] && res.confirmed_at[o.transaction.id - 1])
         order.push_back(o.transaction.id);
   for (auto id : res.receive_order)
      if (counted[id - 1] && res.confirmed_at[id - 1])
         baseline.push_back(id);
   r.fairness_inversion_rate = inversion_rate(order, submitted_at);
   r.baseline_inversion_rate = inversion_rate(baseline, submitted_at);

   const auto prop = gossip::measure_propagation({c.n, 100, false, c.seed});
   r.propagation = PropagationSummary{prop.mean, prop.min, prop.max, 100};

   r.counters["coin_votes"] = static_cast<double>(res.coin_votes);
   r.counters["longest_election"] = res.longest_election;
   r.counters["events_created"] = static_cast<double>(res.events_created);
   r.counters["rejected_events"] = static_cast<double>(res.rejected_events);
   r.counters["messages_sent"] = static_cast<double>(res.messages_sent);
   r.counters["common_round"] = res.common_round;
   r.counters["equivocators_detected"] = static_cast<double>(res.equivocators_detected.size());
   r.counters["converged"] = res.converged ? 1 : 0;

   if (artifacts) {
      (*artifacts)["samples.csv"] = samples_csv(submitted_at, res.confirmed_at);
      (*artifacts)["log.tsv"] = hashgraph::export_log(res.logs[first_honest]);
      std::ostringstream msgs;
      msgs << "send_tick,deliver_tick,from,to,event_count\n";
      for (const auto& m : res.messages)
         msgs << m.send_tick << ',' << m.deliver_tick << ',' << m.from << ',' << m.to << ',' << m.event_count << '\n';
      (*artifacts)["messages.csv"] = msgs.str();
      std::ostringstream trace;
      hashgraph::write_event_trace(trace, net.node(first_honest).view());
      (*artifacts)["trace.hgev"] = trace.str();
   }
   return r;
}

MetricsReport run_tangle(const ScenarioConfig& c, Artifacts* artifacts)
{
   tangle::TangleSimConfig sc;
   sc.n = c.n;
   sc.seed = c.seed;
   sc.horizon = c.horizon_ticks;
   sc.drain_ticks = c.drain_ticks.value_or(default_drain(Protocol::Tangle));
   sc.tx_rate = c.tx_rate;
   sc.latency = c.latency;
   sc.pow_ticks = c.tangle.pow_ticks;
   sc.coordinator_interval = c.tangle.coordinator_interval;
   sc.confidence_walks = c.tangle.confidence_walks;
   sc.confidence_threshold = c.tangle.confidence_threshold;
   sc.confidence_interval = c.tangle.confidence_interval;
   sc.promote_after = c.tangle.promote_after;
   sc.walk.alpha = c.tangle.walk_alpha;
   const auto res = tangle::run_scenario_tangle(sc);

   MetricsReport r;
   r.protocol = "tangle";
   r.end_tick = res.end_tick;
   fill_latency(r, res.submitted_at, res.confirmed_at, std::vector<bool>(res.submitted_at.size(), true));
   r.fairness_inversion_rate = inversion_rate(res.confirmation_order, res.submitted_at);
   std::size_t by_milestone = 0;
   for (std::size_t i = 0; i < res.confirmed_at.size(); ++i)
      if (res.confirmed_at[i] && res.confirmed_by_milestone[i])
         ++by_milestone;
   r.counters["milestones"] = static_cast<double>(res.milestones);
   r.counters["confirmed_by_milestone"] = static_cast<double>(by_milestone);
   r.counters["sites"] = static_cast<double>(res.state.size());
   r.counters["tips"] = static_cast<double>(res.state.tips().size());

   if (artifacts) {
      (*artifacts)["samples.csv"] = samples_csv(res.submitted_at, res.confirmed_at);
      std::ostringstream csv, dot;
      tangle::write_tangle_csv(csv, res.state);
      tangle::write_tangle_dot(dot, res.state);
      (*artifacts)["tangle.csv"] = csv.str();
      (*artifacts)["tangle.dot"] = dot.str();
   }
   return r;
}

MetricsReport run_powchain(const ScenarioConfig& c, Artifacts* artifacts)
{
   powchain::ChainSimConfig sc;
   sc.n = c.n;
   sc.seed = c.seed;
   sc.horizon = c.horizon_ticks;
   sc.drain_ticks = c.drain_ticks.value_or(default_drain(Protocol::Powchain));
   sc.tx_rate = c.tx_rate;
   sc.latency = c.latency;
   sc.block_interval = c.powchain.block_interval;
   sc.block_capacity = c.powchain.block_capacity;
   sc.confirmations = c.powchain.confirmations;
   sc.shares = c.powchain.shares;
   sc.mean_fee = c.powchain.mean_fee;
   const auto res = powchain::run_scenario_chain(sc);

   MetricsReport r;
   r.protocol = "powchain";
   r.agreement = res.agreement;
   r.divergence = res.divergence;
   r.end_tick = res.end_tick;
   r.competition = true;
   r.stale_rate = res.stale_rate;
   fill_latency(r, res.submitted_at, res.confirmed_at, std::vector<bool>(res.submitted_at.size(), true));
   r.fairness_inversion_rate = inversion_rate(res.chain_order, res.submitted_at);
   r.counters["blocks_mined"] = static_cast<double>(res.blocks_mined);
   r.counters["stale_blocks"] = static_cast<double>(res.stale_blocks);
   r.counters["reorgs"] = static_cast<double>(res.reorgs);
   r.counters["height"] = static_cast<double>(res.tree.height());

   if (artifacts) {
      (*artifacts)["samples.csv"] = samples_csv(res.submitted_at, res.confirmed_at);
      std::ostringstream csv;
      powchain::write_chain_csv(csv, res.tree);
      (*artifacts)["chain.csv"] = csv.str();
   }
   return r;
}

} // namespace

MetricsReport run(const ScenarioConfig& config, Artifacts* artifacts)
{
   validate(config);
   MetricsReport r;
   switch (config.protocol) {
   case Protocol::Hashgraph: r = run_hashgraph(config, artifacts); break;
   case Protocol::Tangle: r = run_tangle(config, artifacts); break;
   case Protocol::Powchain: r = run_powchain(config, artifacts); break;
   case Protocol::Compare: throw ValidationError("protocol", "compare configs run through compare()");
   }
   r.name = config.name;
   r.n = config.n;
   r.seed = config.seed;
   return r;
}

std::vector<ScenarioConfig> expand_compare(const ScenarioConfig& config)
{
   validate(config);
   if (config.protocol != Protocol::Compare)
      return {config};
   std::vector<ScenarioConfig> out;
   for (auto p : config.compare) {
      ScenarioConfig c = config;
      c.protocol = p;
      c.compare.clear();
      out.push_back(std::move(c));
   }
   return out;
}

ComparisonTable compare(const std::vector<ScenarioConfig>& configs)
{
   if (configs.size() < 2)
      throw ValidationError("configs", "a comparison needs at least two configs");
   const auto& first = configs.front();
   for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto& c = configs[i];
      const std::string at = "configs." + std::to_string(i);
      require(c.protocol != Protocol::Compare, at + ".protocol", "expand compare configs first");
      require(c.n == first.n, at + ".n", "network parameters differ between configs");
      require(c.horizon_ticks == first.horizon_ticks, at + ".horizon_ticks", "network parameters differ between configs");
      require(c.tx_rate == first.tx_rate, at + ".tx_rate", "network parameters differ between configs");
      require(c.latency == first.latency, at + ".latency", "network parameters differ between configs");
   }
   ComparisonTable t;
   for (const auto& c : configs)
      t.rows.push_back(run(c));
   return t;
}

namespace {

struct Column
{
   const char* name;
   std::string (*value)(const MetricsReport&);
};

std::string fixed(double v, int digits)
{
   std::ostringstream o;
   o << std::fixed << std::setprecision(digits) << v;
   return o.str();
}

const std::vector<Column>& columns()
{
   static const std::vector<Column> cols = {
      {"protocol", [](const MetricsReport& r) { return r.protocol; }},
      {"seed", [](const MetricsReport& r) { return std::to_string(r.seed); }},
      {"latency_mean", [](const MetricsReport& r) { return fixed(r.latency_mean, 2); }},
      {"latency_p95", [](const MetricsReport& r) { return fixed(r.latency_p95, 0); }},
      {"throughput_per_1000", [](const MetricsReport& r) { return fixed(r.throughput_per_1000, 2); }},
      {"fairness_inversion_rate", [](const MetricsReport& r) { return fixed(r.fairness_inversion_rate, 4); }},
      {"stale_rate", [](const MetricsReport& r) { return fixed(r.stale_rate, 4); }},
      {"confirmed", [](const MetricsReport& r) { return std::to_string(r.confirmed) + "/" + std::to_string(r.submitted); }},
      {"agreement", [](const MetricsReport& r) { return std::string(r.agreement ? "yes" : "no"); }},
      {"competition", [](const MetricsReport& r) { return std::string(r.competition ? "yes" : "no"); }},
   };
   return cols;
}

} // namespace

std::string ComparisonTable::text() const
{
   const auto& cols = columns();
   std::vector<std::size_t> width;
   for (const auto& c : cols) {
      std::size_t w = std::string(c.name).size();
      for (const auto& r : rows)
         w = std::max(w, c.value(r).size());
      width.push_back(w);
   }
   std::ostringstream out;
   auto line = [&](auto cell) {
      std::string s;
      for (std::size_t i = 0; i < cols.size(); ++i) {
         const std::string v = cell(cols[i]);
         s += (i ? "  " : "") + v + std::string(width[i] - v.size(), ' ');
      }
      s.erase(s.find_last_not_of(' ') + 1);
      out << s << '\n';
   };
   line([](const auto& c) { return std::string(c.name); });
   for (const auto& r : rows)
      line([&](const auto& c) { return c.value(r); });
   return out.str();
}

std::string ComparisonTable::csv() const
{
   const auto& cols = columns();
   std::ostringstream out;
   for (std::size_t i = 0; i < cols.size(); ++i)
      out << (i ? "," : "") << cols[i].name;
   out << '\n';
   for (const auto& r : rows) {
      for (std::size_t i = 0; i < cols.size(); ++i)
         out << (i ? "," : "") << cols[i].value(r);
      out << '\n';
   }
   return out.str();
}

json ComparisonTable::json() const
{
   nlohmann::json rows_json = nlohmann::json::array();
   for (const auto& r : rows)
      rows_json.push_back(to_json(r));
   return nlohmann::json{{"rows", rows_json}};
}

} // namespace ledgerlab::harness
