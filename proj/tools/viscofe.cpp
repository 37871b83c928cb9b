#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "viscofe/cli.hpp"

namespace {

// Machine-readable failure report on stderr.
int report(std::string_view category, const std::string& message, int code) {
  nlohmann::ordered_json j{{"error", category}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace viscofe;
  CLI::App app{"Finite-deformation viscoelasticity: material point, exact shell and finite-element drivers"};
  app.require_subcommand(1);
  std::string config;
  int threads = 1;
  std::string out;
  for (const char* name : {"matpoint", "shell-exact", "patch-test", "shell-fem", "convergence"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "run configuration file")->required();
    sub->add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides output.dir)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what(), 1);
  }

  try {
    const cli::Command command = cli::command_from_string(app.get_subcommands().front()->get_name());
    const cli::RunConfig cfg = cli::load_config(config);
    if (cfg.command != command)
      raise(ErrorKind::Parse, config + ": config is for '" + std::string(cli::to_string(cfg.command)) +
                                  "' but the command is '" + std::string(cli::to_string(command)) + "'");
    for (const auto& f : cli::run(cfg, {threads, out})) std::cout << f.string() << '\n';
    return 0;
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), cli::exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report("internal", e.what(), 1);
  }
}
