#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "odenet/errors.hpp"
#include "odenet_lab/commands.hpp"
#include "odenet_lab/csv.hpp"

namespace odenet::lab {

DataSpec read_data_spec(const Config& cfg) {
  DataSpec d;
  d.source = cfg.text("data", "source", "synthetic");
  if (d.source == "synthetic") {
    d.kind = train::parse_synthetic_kind(cfg.text("data", "name", "spirals"));
    d.n = cfg.count("data", "n", 2000);
    d.noise = cfg.real("data", "noise", 0.1);
    if (d.n < 32) throw ConfigError("data.n: must be >= 32");
    if (!(d.noise >= 0.0)) throw ConfigError("data.noise: must be >= 0");
  } else if (d.source == "csv") {
    d.csv_path = cfg.text("data", "path");
    d.label_column = cfg.text("data", "label_column");
    d.test_fraction = cfg.real("data", "test_fraction", 0.2);
  } else {
    throw ConfigError("data.source: unknown source '" + d.source + "' (valid: synthetic, csv)");
  }
  if (cfg.has("data", "seed")) d.seed = cfg.count("data", "seed");
  return d;
}

std::pair<train::Dataset, train::Dataset> load_data(const DataSpec& spec, std::uint64_t run_seed) {
  const std::uint64_t seed = spec.seed.value_or(run_seed);
  if (spec.source == "csv") return train::split_csv(spec.csv_path, spec.label_column, spec.test_fraction, seed);
  return train::make_synthetic(spec.kind, spec.n, spec.noise, seed);
}

arch::NetworkSpec read_network_spec(const Config& cfg, const std::string& sec) {
  arch::NetworkSpec s;
  s.kind = arch::parse_arch_kind(cfg.text(sec, "kind"));
  s.depth = cfg.count(sec, "depth", 6);
  s.width = cfg.count(sec, "width", 16);
  if (s.kind == arch::ArchKind::polynet) s.poly_order = cfg.count(sec, "poly_order", 2);
  if (s.kind == arch::ArchKind::lm_resnet) {
    s.k_init_lo = cfg.real(sec, "k_init_lo", -0.1);
    s.k_init_hi = cfg.real(sec, "k_init_hi", 0.0);
  }
  s.policy.kind = arch::parse_policy_kind(cfg.text(sec, "policy", "none"));
  if (s.policy.kind == arch::PolicyKind::stochastic_depth) s.policy.p_l = cfg.real(sec, "p_l");
  return s;
}

train::TrainConfig read_optimizer(const Config& cfg) {
  train::TrainConfig c;
  c.epochs = cfg.count("train", "epochs", 200);
  c.batch_size = cfg.count("train", "batch_size", 32);
  c.lr.initial = cfg.real("train", "lr", c.lr.initial);
  if (cfg.has("train", "lr_decay_epochs")) {
    for (std::uint64_t e : cfg.counts("train", "lr_decay_epochs")) c.lr.decay_epochs.push_back(e);
  }
  c.lr.factor = cfg.real("train", "lr_decay_factor", c.lr.factor);
  c.momentum = cfg.real("train", "momentum", c.momentum);
  c.weight_decay = cfg.real("train", "weight_decay", c.weight_decay);
  return c;
}

namespace {

void fit_to_data(arch::NetworkSpec& spec, const train::Dataset& tr, const train::Dataset& te) {
  spec.input_dim = tr.feature_dim();
  spec.classes = std::max<std::size_t>(2, std::max(tr.classes, te.classes));
}

void write_k_rows(CsvWriter& csv, const train::TrainRun& run, const std::vector<std::string>& prefix) {
  for (std::size_t l = 0; l < run.k_values.size(); ++l) {
    for (const auto& p : prefix) csv.add(std::string_view(p));
    csv.add(l + 1).add(run.k_values[l]).add(std::abs(run.k_values[l]) > 1.0);
    csv.end_row();
  }
}

}  // namespace

ExitCode cmd_train(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const DataSpec data = read_data_spec(cfg);
  train::TrainConfig config = read_optimizer(cfg);
  config.spec = read_network_spec(cfg, "network");
  config.seed = ctx.seed;
  cfg.check_all_used();

  const auto [train_set, test_set] = load_data(data, ctx.seed);
  fit_to_data(config.spec, train_set, test_set);
  config.validate();
  const train::TrainRun run = train::train_recording_failure(config, train_set, test_set);
  write_text_file(ctx.out / "run.json", train::serialize_run(run));
  if (run.failed) {
    ctx.log << "train: diverged: " << run.failure_message << "\n";
    throw TrainingError("train: " + run.failure_message, run.failure_epoch.value_or(0));
  }

  CsvWriter curves(ctx.out / "curves.csv", {"epoch", "train_loss", "train_acc", "test_loss", "test_acc"});
  for (const auto& e : run.curves) {
    curves.add(e.epoch).add(e.train_loss).add(e.train_accuracy).add(e.test_loss).add(e.test_accuracy);
    curves.end_row();
  }
  curves.close();
  CsvWriter metrics(ctx.out / "metrics.csv", {"split", "loss", "accuracy"});
  metrics.add("train").add(run.final_train.loss).add(run.final_train.accuracy);
  metrics.end_row();
  metrics.add("test").add(run.final_test.loss).add(run.final_test.accuracy);
  metrics.end_row();
  metrics.close();
  if (config.spec.kind == arch::ArchKind::lm_resnet) {
    CsvWriter k(ctx.out / "k_values.csv", {"layer", "k_value", "outside_unit_interval"});
    write_k_rows(k, run, {});
    k.close();
  }
  arch::save_checkpoint(run.params, (ctx.out / "params.ckpt").string());
  ctx.log << "train: " << arch::to_string(config.spec.kind) << " depth " << config.spec.depth << ", "
          << config.epochs << " epochs, test accuracy " << format_real(run.final_test.accuracy) << "\n";
  if (!run.k_audit.outside.empty()) {
    ctx.log << "train: " << run.k_audit.outside.size() << " learned k_n outside [-1, 1]\n";
  }
  return ExitCode::ok;
}

// ---- compare ---------------------------------------------------------------------

void validate_seed_sets(const std::vector<GroupSpec>& groups) {
  if (groups.empty()) return;
  auto sorted = [](std::vector<std::uint64_t> s) {
    std::sort(s.begin(), s.end());
    return s;
  };
  const auto reference = sorted(groups.front().seeds);
  if (std::adjacent_find(reference.begin(), reference.end()) != reference.end()) {
    throw ContractError("compare: group '" + groups.front().name + "' repeats a seed");
  }
  for (const auto& g : groups) {
    if (sorted(g.seeds) != reference) {
      throw ContractError("compare: group '" + g.name + "' uses a different seed set than group '" +
                          groups.front().name + "'");
    }
  }
}

CompareSetup read_compare_setup(const Config& cfg) {
  CompareSetup setup;
  setup.data = read_data_spec(cfg);
  setup.base = read_optimizer(cfg);
  const auto names = cfg.words("compare", "groups");
  const auto shared_seeds = cfg.counts("compare", "seeds", {1, 2, 3});
  const std::uint64_t jobs = cfg.count("compare", "jobs", 0);
  setup.jobs = jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : jobs;
  for (const auto& name : names) {
    const std::string sec = "group." + name;
    if (!cfg.has_section(sec)) throw ConfigError("compare.groups: no [" + sec + "] section for group '" + name + "'");
    GroupSpec g;
    g.name = name;
    g.spec = read_network_spec(cfg, sec);
    g.seeds = cfg.has(sec, "seeds") ? cfg.counts(sec, "seeds") : shared_seeds;
    setup.groups.push_back(std::move(g));
  }
  if (setup.groups.size() < 2) throw ConfigError("compare.groups: need at least 2 groups");
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j]) throw ConfigError("compare.groups: duplicate group '" + names[i] + "'");
  validate_seed_sets(setup.groups);
  if (setup.groups.front().seeds.size() < 3) throw ConfigError("compare.seeds: need at least 3 seeds per group");
  return setup;
}

CompareResult run_compare(const CompareSetup& setup) {
  validate_seed_sets(setup.groups);
  CompareResult result;
  for (const auto& g : setup.groups) result.groups.push_back(g.name);
  result.seeds = setup.groups.front().seeds;
  std::sort(result.seeds.begin(), result.seeds.end());
  const std::size_t n_groups = setup.groups.size();
  const std::size_t n_seeds = result.seeds.size();
  result.runs.assign(n_groups, std::vector<train::TrainRun>(n_seeds));

  // Each task owns its data, tape, rng and parameters; tasks share nothing.
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_groups * n_seeds) return;
      const std::size_t gi = task / n_seeds;
      const std::size_t si = task % n_seeds;
      try {
        const auto [tr, te] = load_data(setup.data, result.seeds[si]);
        train::TrainConfig config = setup.base;
        config.spec = setup.groups[gi].spec;
        config.seed = result.seeds[si];
        fit_to_data(config.spec, tr, te);
        config.validate();
        result.runs[gi][si] = train::train_recording_failure(config, tr, te);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(1, setup.jobs), n_groups * n_seeds);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

std::vector<GroupSummary> summarize(const CompareResult& result) {
  std::vector<GroupSummary> out;
  for (std::size_t g = 0; g < result.groups.size(); ++g) {
    GroupSummary s;
    s.name = result.groups[g];
    std::vector<double> acc;
    for (const auto& run : result.runs[g]) {
      if (run.failed) {
        ++s.failed;
      } else {
        acc.push_back(run.final_test.accuracy);
      }
    }
    s.completed = acc.size();
    if (!acc.empty()) {
      double sum = 0.0;
      for (double a : acc) sum += a;
      s.mean_test_accuracy = sum / static_cast<double>(acc.size());
      if (acc.size() > 1) {
        double ss = 0.0;
        for (double a : acc) ss += (a - s.mean_test_accuracy) * (a - s.mean_test_accuracy);
        s.std_test_accuracy = std::sqrt(ss / static_cast<double>(acc.size() - 1));
      }
    } else {
      s.mean_test_accuracy = std::nan("");
      s.std_test_accuracy = std::nan("");
    }
    out.push_back(s);
  }
  return out;
}

void write_compare_report(const CompareResult& result, const std::filesystem::path& out) {
  std::filesystem::create_directories(out / "runs");
  CsvWriter runs(out / "runs.csv", {"group", "seed", "train_acc", "test_acc", "test_loss", "failed", "failure_epoch"});
  for (std::size_t g = 0; g < result.groups.size(); ++g) {
    for (std::size_t s = 0; s < result.seeds.size(); ++s) {
      const auto& run = result.runs[g][s];
      runs.add(std::string_view(result.groups[g])).add(static_cast<std::size_t>(result.seeds[s]));
      if (run.failed) {
        runs.add("").add("").add("").add(true).add(run.failure_epoch.value_or(0));
      } else {
        runs.add(run.final_train.accuracy).add(run.final_test.accuracy).add(run.final_test.loss).add(false).add("");
      }
      runs.end_row();
      write_text_file(out / "runs" / (result.groups[g] + "_seed" + std::to_string(result.seeds[s]) + ".json"),
                      train::serialize_run(run));
    }
  }
  runs.close();

  CsvWriter summary(out / "summary.csv", {"group", "mean_test_acc", "std_test_acc", "completed", "failed"});
  for (const auto& s : summarize(result)) {
    summary.add(std::string_view(s.name)).add(s.mean_test_accuracy).add(s.std_test_accuracy).add(s.completed).add(
        s.failed);
    summary.end_row();
  }
  summary.close();

  // Paired per-seed differences against the first group.
  CsvWriter deltas(out / "deltas.csv", {"group", "baseline", "seed", "baseline_test_acc", "group_test_acc", "delta"});
  for (std::size_t g = 1; g < result.groups.size(); ++g) {
    for (std::size_t s = 0; s < result.seeds.size(); ++s) {
      const auto& base = result.runs[0][s];
      const auto& run = result.runs[g][s];
      deltas.add(std::string_view(result.groups[g]))
          .add(std::string_view(result.groups[0]))
          .add(static_cast<std::size_t>(result.seeds[s]));
      if (base.failed || run.failed) {
        deltas.add("").add("").add("");
      } else {
        deltas.add(base.final_test.accuracy).add(run.final_test.accuracy).add(run.final_test.accuracy -
                                                                            base.final_test.accuracy);
      }
      deltas.end_row();
    }
  }
  deltas.close();

  bool any_lm = false;
  for (const auto& group_runs : result.runs)
    for (const auto& run : group_runs) any_lm = any_lm || !run.k_values.empty();
  if (any_lm) {
    CsvWriter k(out / "k_values.csv", {"group", "seed", "layer", "k_value", "outside_unit_interval"});
    for (std::size_t g = 0; g < result.groups.size(); ++g)
      for (std::size_t s = 0; s < result.seeds.size(); ++s)
        write_k_rows(k, result.runs[g][s], {result.groups[g], std::to_string(result.seeds[s])});
    k.close();
  }
}

ExitCode cmd_compare(const RunContext& ctx) {
  CompareSetup setup = read_compare_setup(ctx.config);
  ctx.config.check_all_used();
  const CompareResult result = run_compare(setup);
  write_compare_report(result, ctx.out);
  std::size_t failed = 0;
  for (const auto& s : summarize(result)) {
    ctx.log << "compare: " << s.name << " mean test accuracy " << format_real(s.mean_test_accuracy) << " (std "
            << format_real(s.std_test_accuracy) << ", " << s.completed << " runs)\n";
    failed += s.failed;
  }
  if (failed > 0) {
    ctx.log << "compare: " << failed << " runs diverged\n";
    return ExitCode::numerical;
  }
  return ExitCode::ok;
}

}  // namespace odenet::lab
