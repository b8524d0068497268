#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskcomm/design.hpp"
#include "taskcomm/model.hpp"

namespace taskcomm {

enum class ExperimentKind {
  kLinearSweep,
  kBasisCompare,
  kNonlinearSweep,
  kValidate,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kLinearSweep;
  ModelDims dims{4, 20, 4, 30};
  std::optional<int> subspace_dim = 8;
  std::uint64_t seed = 7;
  bool seed_specified = false;  // set when the config or a flag named it
  std::optional<std::uint64_t> channel_seed;
  std::vector<double> energy_grid;  // strictly increasing, nonnegative
  std::vector<std::string> methods;
  WeightMode weight_mode = WeightMode::kAuto;
  std::vector<std::string> basis_methods;
  long mc_trials = 0;
  std::string out = "results.csv";
  // nonlinear-sweep knobs
  long train_count = 10000;
  long test_count = 1000;
  int epochs = 2000;
  int batch = 128;
  double learn_rate = 1e-3;
  int noise_draws = 32;
  std::optional<std::string> checkpoint;  // load if present, else train + save
};

struct CliOverrides {
  std::optional<std::vector<double>> energy_grid;
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  std::optional<std::string> out;
};

ExperimentConfig default_config(ExperimentKind kind);

// Strict parse: unknown keys and type mismatches raise ConfigError naming the
// offending key. Fields not present keep the per-kind defaults.
ExperimentConfig parse_config(const nlohmann::json& j,
                              std::optional<ExperimentKind> kind_override = {});
ExperimentConfig load_config(const std::string& path,
                             std::optional<ExperimentKind> kind_override = {});

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides);
// TASKCOMM_SEED applies only when neither the config nor a flag set a seed.
void apply_env_seed(ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Executes the experiment; returns 0 on success, 1 on validation failure.
// Configuration problems throw ConfigError (mapped to exit code 2 by the CLI).
int run(const ExperimentConfig& config);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<ValidationCheck> run_validation_suite(std::uint64_t seed);

}  // namespace taskcomm
