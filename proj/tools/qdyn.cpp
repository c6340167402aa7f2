#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qdyn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qdyn - constrained quantum dynamics: integrate, check and plot scenarios"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  bool svg = false;
  double x0 = 0.5;
  int grid = 9;

  CLI::App* check = app.add_subcommand("check", "validate a scenario file");
  check->add_option("file", scenario_path, "scenario JSON file")->required();

  CLI::App* run = app.add_subcommand("run", "integrate all initial states, write CSV + summary");
  run->add_option("file", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "run the full initial-state grid");
  sweep->add_option("file", scenario_path, "scenario JSON file")->required();
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_flag("--svg", svg, "emit the cross-section plot (figure1.svg)");

  CLI::App* demo = app.add_subcommand("demo", "write and sweep a builtin scenario");
  std::string which;
  demo->add_option("name", which, "builtin scenario name (figure1)")
      ->required()
      ->check(CLI::IsMember({"figure1"}));
  demo->add_option("--x0", x0, "constraint slice <sigma_x> = x0");
  demo->add_option("--grid", grid, "lattice points per axis");
  demo->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  const int threads = qdyn::cli::threads_from_env();
  if (check->parsed()) return qdyn::cli::run_check(scenario_path, std::cout);
  if (run->parsed()) return qdyn::cli::run_run(scenario_path, out_dir, threads, std::cout);
  if (sweep->parsed()) return qdyn::cli::run_sweep(scenario_path, out_dir, svg, threads, std::cout);
  return qdyn::cli::run_demo_figure1(x0, grid, out_dir, threads, std::cout);
}
