// pctlab command-line entry point.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pctlab/config.hpp"
#include "pctlab/errors.hpp"
#include "pctlab/experiment.hpp"
#include "pctlab/text_io.hpp"

namespace fs = std::filesystem;
using namespace pctlab;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kRuntime = 2, kIntegrity = 3 };

struct CommonArgs {
  std::string config;
  std::string out = "out";
  std::int64_t seed_offset = 0;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
  auto* c = cmd->add_option("--config", args.config, "experiment config file");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory")->capture_default_str();
  cmd->add_option("--seed-offset", args.seed_offset, "shift every seed base by this amount")
      ->capture_default_str();
  cmd->add_option("--jobs", args.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

ExperimentConfig load_config(const CommonArgs& args) {
  ConfigFile file = ConfigFile::load(args.config);
  if (args.seed_offset != 0) {
    if (file.has("seeds.offset"))
      throw ConfigError("--seed-offset conflicts with seeds.offset in " + args.config);
    file.set("seeds.offset", std::to_string(args.seed_offset));
  }
  return parse_experiment_config(file);
}

void print_update(const UpdateRunResult& r) {
  std::printf("pairs    %zu\n", r.pairs.size());
  std::printf("ER_old   %s\n", format_fixed4(r.mean_er_old).c_str());
  std::printf("ER_new   %s\n", format_fixed4(r.mean_er_new).c_str());
  std::printf("NFR      %s\n", format_fixed4(r.mean_nfr).c_str());
  std::printf("PFR      %s\n", format_fixed4(r.mean_pfr).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pctlab: positive-congruent training experiments on small synthetic tasks"};
  app.require_subcommand(1);

  CommonArgs pool_args, update_args, chain_args, stats_args;
  add_common(app.add_subcommand("train-pool", "train the seed pool(s) used by stats"), pool_args, true);
  add_common(app.add_subcommand("update", "train old/new pairs and measure flips"), update_args, true);
  add_common(app.add_subcommand("chain", "train a sequence of updates and the pairwise NFR matrix"),
             chain_args, true);
  add_common(app.add_subcommand("stats", "logit displacement study over a trained pool"), stats_args,
             true);

  auto* report = app.add_subcommand("report", "consolidate update manifests into one table");
  std::vector<std::string> manifests;
  std::string report_out = "out";
  report->add_option("manifests", manifests, "manifest files")->required();
  report->add_option("--out", report_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (app.got_subcommand("train-pool")) {
      const auto cfg = load_config(pool_args);
      const auto r = run_train_pool(cfg, {pool_args.out, pool_args.jobs});
      std::printf("trained %d, skipped %d\n", r.trained, r.skipped);
    } else if (app.got_subcommand("update")) {
      const auto cfg = load_config(update_args);
      print_update(run_update(cfg, {update_args.out, update_args.jobs}));
    } else if (app.got_subcommand("chain")) {
      const auto cfg = load_config(chain_args);
      const auto r = run_chain(cfg, {chain_args.out, chain_args.jobs});
      for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::cout << read_file(fs::path(chain_args.out) / "chain" / "pairwise_nfr.csv");
    } else if (app.got_subcommand("stats")) {
      const auto cfg = load_config(stats_args);
      const auto r = run_stats(cfg, {stats_args.out, stats_args.jobs});
      std::printf("probes %zu\n", r.probes.size());
    } else if (app.got_subcommand("report")) {
      std::vector<fs::path> paths(manifests.begin(), manifests.end());
      const auto r = run_report(paths, report_out);
      std::cout << read_file(fs::path(report_out) / "summary.txt");
      if (!r.errors.empty()) return kIntegrity;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const IntegrityError& e) {
    std::fprintf(stderr, "integrity error: %s\n", e.what());
    return kIntegrity;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
