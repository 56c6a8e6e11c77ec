// Command-line front end: one subcommand per pipeline stage.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rydsi/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace rydsi;
  CLI::App app{"rydsi: Rydberg gates between donors in silicon"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tol;
  bool reoptimize = false;
  app.add_option("--config", config_path, "INI config file; built-in defaults when omitted")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides run.output_dir)");
  app.add_option("--seed", seed, "master seed (overrides run.seed)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "integrator tolerance (overrides protocol.tol)");
  app.add_flag("--reoptimize-per-cell", reoptimize, "fidelity-map: optimize the pulse in every cell");

  const auto& table = commands();
  for (const auto& [name, fn] : table) app.add_subcommand(name, "run the " + name + " stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(Error::Category::Config);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (tol) cfg.tol = *tol;
    if (reoptimize) cfg.reoptimize_per_cell = true;
    cfg.validate();

    const OutputDir out(cfg.output_dir, cfg);
    const CommandResult r = table.at(name)(cfg, out);
    std::cout << "config_hash=" << cfg.hash() << "\n";
    for (const auto& [k, v] : r.summary) std::cout << k << "=" << v << "\n";
    for (const auto& n : r.notes) std::cout << "# " << n << "\n";
    for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "rydsi " << name << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "rydsi " << name << ": " << e.what() << "\n";
    return 1;
  }
}
