#pragma once

// odenet-lab commands. Each reads its whole configuration first (so unknown
// keys fail before any work starts), then runs and writes CSV reports plus
// resolved_config.ini and VERSION into the output directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "odenet/trainer.hpp"
#include "odenet_lab/config.hpp"

namespace odenet::lab {

enum class ExitCode : int {
  ok = 0,
  failure = 1,    // unexpected error
  config = 2,     // bad config, bad data file, contract violation
  numerical = 3,  // overflow, non-convergence, divergent series, training divergence
  flagged = 4,    // report written, but statistics are unreliable or inconclusive
};

std::string_view version_string();

struct Invocation {
  std::string command;  // integrate | order | weak | train | compare
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Runs one command and maps errors to exit codes. Progress goes to `log`,
/// diagnostics to `err`.
int run_invocation(const Invocation& inv, std::ostream& log, std::ostream& err);

struct RunContext {
  const Config& config;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::ostream& log;
};

ExitCode cmd_integrate(const RunContext& ctx);
ExitCode cmd_order(const RunContext& ctx);
ExitCode cmd_weak(const RunContext& ctx);
ExitCode cmd_train(const RunContext& ctx);
ExitCode cmd_compare(const RunContext& ctx);

// ---- training setup shared by train and compare ----------------------------------

struct DataSpec {
  std::string source = "synthetic";  // synthetic | csv
  train::SyntheticKind kind = train::SyntheticKind::spirals;
  std::size_t n = 2000;
  double noise = 0.1;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  std::string csv_path;
  std::string label_column;
  double test_fraction = 0.2;
};

DataSpec read_data_spec(const Config& cfg);
std::pair<train::Dataset, train::Dataset> load_data(const DataSpec& spec, std::uint64_t run_seed);

/// Network keys of `section`; input_dim and classes are filled from data later.
arch::NetworkSpec read_network_spec(const Config& cfg, const std::string& section);
/// Optimizer keys of [train]; spec and seed are left for the caller.
train::TrainConfig read_optimizer(const Config& cfg);

struct GroupSpec {
  std::string name;
  arch::NetworkSpec spec;
  std::vector<std::uint64_t> seeds;
};

struct CompareSetup {
  DataSpec data;
  train::TrainConfig base;
  std::vector<GroupSpec> groups;
  std::size_t jobs = 1;
};

struct CompareResult {
  std::vector<std::string> groups;
  std::vector<std::uint64_t> seeds;             // sorted
  std::vector<std::vector<train::TrainRun>> runs;  // runs[group][seed index]
};

struct GroupSummary {
  std::string name;
  double mean_test_accuracy = 0.0;
  double std_test_accuracy = 0.0;
  std::size_t completed = 0;
  std::size_t failed = 0;
};

CompareSetup read_compare_setup(const Config& cfg);
/// Throws ContractError unless every group lists the same seed set (order ignored).
void validate_seed_sets(const std::vector<GroupSpec>& groups);
/// Runs every (group, seed) pair on up to `jobs` threads; results are ordered
/// by group then seed regardless of scheduling.
CompareResult run_compare(const CompareSetup& setup);
std::vector<GroupSummary> summarize(const CompareResult& result);
/// runs.csv, summary.csv, deltas.csv, k_values.csv (lm groups) and one
/// run JSON per (group, seed) under runs/.
void write_compare_report(const CompareResult& result, const std::filesystem::path& out);

}  // namespace odenet::lab
