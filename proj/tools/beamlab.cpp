#include <CLI11.hpp>

#include <iostream>

#include "dampbeam/experiment.hpp"

using namespace dampbeam;

namespace {

void print(const RunManifest& m) {
  std::cout << "run     " << m.dir.string() << "\n"
            << "kind    " << m.kind << "\n"
            << "hash    " << m.config_hash << "\n"
            << "time    " << fmt(m.wall_time) << " s\n";
  for (const auto& [k, v] : m.metrics)
    if (k == "headline") std::cout << "result  " << v << "\n";
  for (const auto& f : m.files) std::cout << "file    " << f << "\n";
  for (const auto& [k, ok] : m.assertions) std::cout << (ok ? "PASS    " : "FAIL    ") << k << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamlab: damped-beam Carleman and null-control experiments"};
  app.require_subcommand(1);

  std::string config, out = "runs", dir;
  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
  auto* run = app.add_subcommand("run", "run an experiment into <out>/run-<hash>");
  run->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output root")->capture_default_str();
  auto* report = app.add_subcommand("report", "print the manifest of a finished run");
  report->add_option("run_dir", dir, "run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto cfg = load_config(config);
      std::cout << "ok " << cfg.kind << " " << cfg.hash() << "\n";
      return 0;
    }
    if (*run) {
      const auto m = run_experiment(load_config(config), out);
      print(m);
      return m.all_pass() ? 0 : 1;
    }
    const auto m = read_manifest(dir);
    print(m);
    return m.all_pass() ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
