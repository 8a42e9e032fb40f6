#pragma once

#include <ledgerlab/scheduler.hpp>
#include <ledgerlab/types.hpp>

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ledgerlab::harness {

enum class Protocol
{
   Hashgraph,
   Tangle,
   Powchain,
   Compare,
};

const char* to_string(Protocol p);
Protocol protocol_from_string(const std::string& s); // ValidationError on unknown names

struct AdversarySpec
{
   std::uint32_t forkers = 0;
   std::uint32_t silent = 0;
   std::uint32_t delayers = 0;
   double fork_rate = 0.1;
   Tick delay_ticks = 20;

   std::uint32_t total() const { return forkers + silent + delayers; }
   bool operator==(const AdversarySpec&) const = default;
};

struct HashgraphKnobs
{
   Tick sync_period = 1;
   std::uint32_t coin_period = 10;
   bool full_history = false;
   bool suppress_empty_events = false;
   std::size_t payload_bytes = 16;
   bool operator==(const HashgraphKnobs&) const = default;
};

struct TangleKnobs
{
   std::optional<double> walk_alpha;
   Tick pow_ticks = 5;
   Tick coordinator_interval = 0;
   std::uint32_t confidence_walks = 100;
   double confidence_threshold = 0.95;
   Tick confidence_interval = 5;
   Tick promote_after = 100;
   bool operator==(const TangleKnobs&) const = default;
};

struct PowchainKnobs
{
   double block_interval = 60.0;
   std::size_t block_capacity = 3500;
   std::uint32_t confirmations = 6;
   std::vector<double> shares; // empty = uniform
   double mean_fee = 10.0;
   bool operator==(const PowchainKnobs&) const = default;
};

struct ScenarioConfig
{
   Protocol protocol = Protocol::Hashgraph;
   std::string name;
   std::uint32_t n = 4;
   std::uint64_t seed = 1;
   Tick horizon_ticks = 300;
   std::optional<Tick> drain_ticks; // unset: protocol default
   double tx_rate = 0.5;
   LatencyModel latency;
   AdversarySpec adversary;
   bool allow_overfault = false;
   HashgraphKnobs hashgraph;
   TangleKnobs tangle;
   PowchainKnobs powchain;
   std::vector<Protocol> compare; // protocols run by a compare config

   bool operator==(const ScenarioConfig&) const = default;
};

/// Command-line adjustments applied before validation.
struct Overrides
{
   std::optional<std::uint64_t> seed;
   bool allow_overfault = false;
};

/// Parses and validates; unknown keys are rejected. ParseError for
/// malformed JSON, ValidationError (with a field path) for bad values.
ScenarioConfig parse_config(const std::string& text, const Overrides& overrides = {});
ScenarioConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});
void validate(const ScenarioConfig& config);
nlohmann::json to_json(const ScenarioConfig& config);

/// Default drain time per protocol when the config leaves it unset.
Tick default_drain(Protocol p);

struct PropagationSummary
{
   double mean = 0.0;
   Tick min = 0;
   Tick max = 0;
   std::uint32_t trials = 0;
   bool operator==(const PropagationSummary&) const = default;
};

struct MetricsReport
{
   std::string protocol;
   std::string name;
   std::uint32_t n = 0;
   std::uint64_t seed = 0;
   bool agreement = true;
   std::string divergence;
   std::uint64_t submitted = 0; // honest-submitted transactions
   std::uint64_t confirmed = 0;
   double latency_mean = 0.0;
   double latency_p95 = 0.0;
   double throughput_per_1000 = 0.0;
   double fairness_inversion_rate = 0.0;
   std::optional<double> baseline_inversion_rate; // raw receive order, hashgraph only
   double stale_rate = 0.0;
   bool competition = false; // miners race each other for the right to append
   Tick end_tick = 0;
   std::optional<PropagationSummary> propagation;
   std::map<std::string, double> counters;
   std::vector<Tick> latency_samples; // per confirmed transaction, by id

   bool operator==(const MetricsReport&) const = default;
};

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string dump_report(const MetricsReport& report);

/// Files produced alongside a run (name -> contents).
using Artifacts = std::map<std::string, std::string>;

/// Runs one protocol. Compare configs are rejected here; use
/// expand_compare() and compare().
MetricsReport run(const ScenarioConfig& config, Artifacts* artifacts = nullptr);

/// Fraction of pairs with distinct submission ticks that the final order
/// inverts. `order` lists transaction ids; `submitted_at` is indexed by id - 1.
double inversion_rate(const std::vector<std::uint64_t>& order, const std::vector<Tick>& submitted_at);

/// Nearest-rank percentile of non-empty samples.
double percentile(std::vector<Tick> samples, double q);

struct ComparisonTable
{
   std::vector<MetricsReport> rows;

   std::string text() const;
   std::string csv() const;
   nlohmann::json json() const;
};

/// One config per protocol listed by a compare config, sharing every other
/// parameter.
std::vector<ScenarioConfig> expand_compare(const ScenarioConfig& config);

/// Needs at least two configs that agree on n, horizon, transaction rate and
/// latency; ValidationError otherwise.
ComparisonTable compare(const std::vector<ScenarioConfig>& configs);

} // namespace ledgerlab::harness
