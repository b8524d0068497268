#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taskcomm/harness.hpp"

namespace {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw taskcomm::ConfigError("bad --energy-grid entry: '" + item + "'");
    }
  }
  if (grid.empty()) {
    throw taskcomm::ConfigError("--energy-grid needs at least one value");
  }
  return grid;
}

struct SubcommandState {
  std::string config_path;
  std::string energy_grid;
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  std::string out;
};

void attach_common(CLI::App* cmd, SubcommandState& state) {
  cmd->add_option("-c,--config", state.config_path, "JSON config file");
  cmd->add_option("--energy-grid", state.energy_grid,
                  "comma-separated energies, overrides the config");
  cmd->add_option("--seed", state.seed, "master seed, overrides the config");
  cmd->add_option("--trials", state.trials,
                  "Monte-Carlo trials / noise draws, overrides the config");
  cmd->add_option("-o,--out", state.out, "output CSV path");
}

int run_kind(taskcomm::ExperimentKind kind, const SubcommandState& state) {
  taskcomm::ExperimentConfig config =
      state.config_path.empty()
          ? taskcomm::default_config(kind)
          : taskcomm::load_config(state.config_path, kind);
  taskcomm::CliOverrides overrides;
  if (!state.energy_grid.empty()) {
    overrides.energy_grid = parse_grid(state.energy_grid);
  }
  overrides.seed = state.seed;
  overrides.trials = state.trials;
  if (!state.out.empty()) overrides.out = state.out;
  taskcomm::apply_overrides(config, overrides);
  taskcomm::apply_env_seed(config);
  return taskcomm::run(config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "taskcomm: analog encoder design for multi-user estimation over a "
      "broadcast channel"};
  app.require_subcommand(1);

  SubcommandState linear, basis, nonlinear, validate;
  CLI::App* linear_cmd = app.add_subcommand(
      "linear-sweep", "sum-MSE vs energy for the linear task family");
  attach_common(linear_cmd, linear);
  CLI::App* basis_cmd = app.add_subcommand(
      "basis-compare", "compare svd / gram-schmidt / natural bases");
  attach_common(basis_cmd, basis);
  CLI::App* nonlinear_cmd = app.add_subcommand(
      "nonlinear-sweep", "train the multi-task net and sweep the feature encoder");
  attach_common(nonlinear_cmd, nonlinear);
  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "run the invariant suite and print a pass/fail table");
  attach_common(validate_cmd, validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (linear_cmd->parsed()) {
      return run_kind(taskcomm::ExperimentKind::kLinearSweep, linear);
    }
    if (basis_cmd->parsed()) {
      return run_kind(taskcomm::ExperimentKind::kBasisCompare, basis);
    }
    if (nonlinear_cmd->parsed()) {
      return run_kind(taskcomm::ExperimentKind::kNonlinearSweep, nonlinear);
    }
    if (validate_cmd->parsed()) {
      return run_kind(taskcomm::ExperimentKind::kValidate, validate);
    }
  } catch (const taskcomm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
