#include <filesystem>
#include <ostream>

#include "odenet/errors.hpp"
#include "odenet_lab/commands.hpp"
#include "odenet_lab/csv.hpp"

#ifndef ODENET_LAB_VERSION
#define ODENET_LAB_VERSION "0.0.0"
#endif

namespace odenet::lab {

std::string_view version_string() { return "odenet-lab " ODENET_LAB_VERSION; }

namespace {

using CommandFn = ExitCode (*)(const RunContext&);

CommandFn find_command(const std::string& name) {
  if (name == "integrate") return cmd_integrate;
  if (name == "order") return cmd_order;
  if (name == "weak") return cmd_weak;
  if (name == "train") return cmd_train;
  if (name == "compare") return cmd_compare;
  return nullptr;
}

int code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int run_invocation(const Invocation& inv, std::ostream& log, std::ostream& err) {
  const CommandFn command = find_command(inv.command);
  if (!command) {
    err << "error: unknown command '" << inv.command << "' (valid: integrate, order, weak, train, compare)\n";
    return code(ExitCode::config);
  }
  std::optional<Config> cfg;
  std::filesystem::path out;
  try {
    cfg = Config::from_file(inv.config_path);
    std::uint64_t seed = cfg->count("run", "seed", 0);
    if (inv.seed) {
      seed = *inv.seed;
      cfg->record("run", "seed", std::to_string(seed));
    }
    // The output location is not part of the experiment, so it is not echoed.
    out = cfg->text("run", "out", "odenet-out");
    cfg->forget("run", "out");
    if (inv.out_dir) out = *inv.out_dir;
    cfg->record("run", "command", inv.command);
    std::filesystem::create_directories(out);

    int result = code(ExitCode::ok);
    try {
      result = code(command(RunContext{*cfg, seed, out, log}));
    } catch (...) {
      write_text_file(out / "resolved_config.ini", cfg->resolved_ini());
      write_text_file(out / "VERSION", std::string(version_string()) + "\n");
      throw;
    }
    write_text_file(out / "resolved_config.ini", cfg->resolved_ini());
    write_text_file(out / "VERSION", std::string(version_string()) + "\n");
    return result;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return code(ExitCode::config);
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return code(ExitCode::config);
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << "\n";
    return code(ExitCode::config);
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return code(ExitCode::config);
  } catch (const OverflowError& e) {
    err << "numerical failure: " << e.what() << " (step " << e.step() << ")\n";
    return code(ExitCode::numerical);
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return code(ExitCode::numerical);
  } catch (const DivergenceError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return code(ExitCode::numerical);
  } catch (const TrainingError& e) {
    err << "training diverged: " << e.what() << "\n";
    return code(ExitCode::numerical);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return code(ExitCode::failure);
  }
}

}  // namespace odenet::lab
