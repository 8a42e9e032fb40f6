#include <ledgerlab/event_dag.hpp>
#include <ledgerlab/gossip.hpp>
#include <ledgerlab/harness.hpp>
#include <ledgerlab/virtual_voting.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace ledgerlab;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitDisagreement = 3;

void write_file(const fs::path& path, const std::string& contents)
{
   if (path.has_parent_path())
      fs::create_directories(path.parent_path());
   std::ofstream out(path, std::ios::binary);
   if (!out)
      throw std::runtime_error("cannot write " + path.string());
   out << contents;
}

/// --seed beats LEDGERLAB_SEED, which beats the config file.
std::optional<std::uint64_t> seed_override(const std::optional<std::uint64_t>& flag)
{
   if (flag)
      return flag;
   if (const char* env = std::getenv("LEDGERLAB_SEED"); env && *env) {
      char* end = nullptr;
      errno = 0;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (errno != 0 || *end != '\0' || env[0] == '-')
         throw ValidationError("LEDGERLAB_SEED", "not an unsigned 64-bit integer");
      return static_cast<std::uint64_t>(v);
   }
   return std::nullopt;
}

int report_table(const harness::ComparisonTable& table, const std::string& out, const std::string& csv_dir)
{
   std::cout << table.text();
   if (!out.empty())
      write_file(out, table.json().dump(2) + "\n");
   if (!csv_dir.empty())
      write_file(fs::path(csv_dir) / "comparison.csv", table.csv());
   for (const auto& r : table.rows)
      if (!r.agreement) {
         std::cerr << "agreement violated (" << r.protocol << "): " << r.divergence << '\n';
         return kExitDisagreement;
      }
   return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
   CLI::App app{"ledgerlab: deterministic hashgraph / tangle / PoW chain consensus lab"};
   app.require_subcommand(1);

   std::string config_path, out_path, csv_dir;
   std::optional<std::uint64_t> seed;
   bool allow_overfault = false;
   auto* run = app.add_subcommand("run", "run one scenario config");
   run->add_option("config", config_path, "scenario JSON")->required();
   run->add_option("--seed", seed, "override the config seed");
   run->add_option("--out", out_path, "write the JSON report here");
   run->add_option("--csv", csv_dir, "write per-sample CSV dumps into this directory");
   run->add_flag("--allow-overfault", allow_overfault, "permit n/3 or more adversaries");

   std::vector<std::string> compare_paths;
   auto* cmp = app.add_subcommand("compare", "run configs side by side");
   cmp->add_option("configs", compare_paths, "scenario JSON files")->required();
   cmp->add_option("--seed", seed, "override every config seed");
   cmp->add_option("--out", out_path, "write the JSON table here");
   cmp->add_option("--csv", csv_dir, "write comparison.csv into this directory");

   std::string trace_path;
   auto* replay = app.add_subcommand("replay", "recompute consensus from an event trace");
   replay->add_option("trace", trace_path, "trace.hgev file")->required();

   gossip::PropagationConfig prop;
   auto* propagation = app.add_subcommand("propagation", "measure gossip coverage time");
   propagation->add_option("--n", prop.n, "members")->required();
   propagation->add_option("--trials", prop.trials, "trials")->required();
   propagation->add_option("--seed", prop.seed, "seed");
   propagation->add_flag("--ideal", prop.ideal_doubling, "deterministic doubling instead of random targets");

   CLI11_PARSE(app, argc, argv);

   try {
      if (*run) {
         const harness::Overrides ov{seed_override(seed), allow_overfault};
         const auto config = harness::load_config(config_path, ov);
         if (config.protocol == harness::Protocol::Compare)
            return report_table(harness::compare(harness::expand_compare(config)), out_path, csv_dir);
         harness::Artifacts artifacts;
         const auto report = harness::run(config, csv_dir.empty() ? nullptr : &artifacts);
         const std::string text = harness::dump_report(report);
         if (out_path.empty())
            std::cout << text;
         else
            write_file(out_path, text);
         for (const auto& [name, contents] : artifacts)
            write_file(fs::path(csv_dir) / name, contents);
         if (!report.agreement) {
            std::cerr << "agreement violated: " << report.divergence << '\n';
            return kExitDisagreement;
         }
         return kExitOk;
      }
      if (*cmp) {
         const harness::Overrides ov{seed_override(seed), false};
         std::vector<harness::ScenarioConfig> configs;
         for (const auto& p : compare_paths)
            for (auto& c : harness::expand_compare(harness::load_config(p, ov)))
               configs.push_back(std::move(c));
         return report_table(harness::compare(configs), out_path, csv_dir);
      }
      if (*replay) {
         std::ifstream in(trace_path, std::ios::binary);
         if (!in)
            throw ParseError("cannot open " + trace_path);
         const auto trace = hashgraph::read_event_trace(in);
         hashgraph::HashgraphView view(trace.member_count);
         for (const auto& e : trace.events)
            view.insert(e);
         hashgraph::Consensus consensus(view);
         consensus.consensus_order();
         std::cout << hashgraph::export_log(consensus.log());
         return kExitOk;
      }
      if (*propagation) {
         const auto stats = gossip::measure_propagation(prop);
         nlohmann::json j{{"n", prop.n},
                          {"trials", prop.trials},
                          {"ideal_doubling", prop.ideal_doubling},
                          {"mean", stats.mean},
                          {"min", stats.min},
                          {"max", stats.max}};
         std::cout << j.dump(2) << '\n';
         return kExitOk;
      }
   } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalid;
   } catch (const ParseError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalid;
   } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalid;
   } catch (const hashgraph::DagError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalid;
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitFailure;
   }
   return kExitFailure;
}
