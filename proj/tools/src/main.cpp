#include <iostream>

#include "CLI11.hpp"
#include "odenet_lab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Residual networks as ODE/SDE discretizations: experiments and reports"};
  app.set_version_flag("--version", std::string(odenet::lab::version_string()));
  app.require_subcommand(1, 1);

  odenet::lab::Invocation inv;
  std::uint64_t seed = 0;
  std::string out;
  const std::pair<const char*, const char*> commands[] = {
      {"integrate", "Integrate a test problem and write its trajectory"},
      {"order", "Measure empirical convergence order against a reference"},
      {"weak", "Monte Carlo weak-error sweep for an SDE"},
      {"train", "Train one residual network and write its run record"},
      {"compare", "Train several network groups over paired seeds"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_path, "INI config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override [run] seed");
    sub->add_option("--out", out, "Override [run] out directory");
    sub->callback([&inv, &seed, &out, sub, name = std::string(name)] {
      inv.command = name;
      if (sub->count("--seed")) inv.seed = seed;
      if (sub->count("--out")) inv.out_dir = out;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(odenet::lab::ExitCode::config);
  }
  return odenet::lab::run_invocation(inv, std::cout, std::cerr);
}
