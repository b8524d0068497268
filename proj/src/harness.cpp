#include "taskcomm/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "taskcomm/channel_eval.hpp"
#include "taskcomm/neural.hpp"
#include "taskcomm/refopt.hpp"
#include "taskcomm/rng.hpp"
#include "taskcomm/serialize.hpp"

namespace taskcomm {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kLinearSweep:
      return "linear-sweep";
    case ExperimentKind::kBasisCompare:
      return "basis-compare";
    case ExperimentKind::kNonlinearSweep:
      return "nonlinear-sweep";
    case ExperimentKind::kValidate:
      return "validate";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "linear-sweep") return ExperimentKind::kLinearSweep;
  if (name == "basis-compare") return ExperimentKind::kBasisCompare;
  if (name == "nonlinear-sweep") return ExperimentKind::kNonlinearSweep;
  if (name == "validate") return ExperimentKind::kValidate;
  throw ConfigError("unknown experiment kind: " + name);
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig config;
  config.kind = kind;
  switch (kind) {
    case ExperimentKind::kLinearSweep:
      config.energy_grid = {1, 3, 10, 30, 100, 300, 1000, 3000};
      config.methods = {"proposed", "reference", "tdm-equal", "tdm-opt",
                        "direct"};
      break;
    case ExperimentKind::kBasisCompare:
      config.energy_grid = {1, 3, 10, 30, 100, 300, 1000, 3000};
      config.basis_methods = {"svd", "gram-schmidt", "natural"};
      config.methods = config.basis_methods;
      break;
    case ExperimentKind::kNonlinearSweep:
      config.energy_grid = {0.5, 2, 8, 32, 128, 512};
      config.methods = {"proposed", "feature-broadcast"};
      break;
    case ExperimentKind::kValidate:
      config.energy_grid = {1, 30, 300};
      config.out = "validate.csv";
      break;
  }
  return config;
}

namespace {

template <typename T>
T get_typed(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void check_energy_grid(const std::vector<double>& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0) {
      throw ConfigError("energy_grid entries must be nonnegative");
    }
    if (i > 0 && grid[i] <= grid[i - 1]) {
      throw ConfigError("energy_grid must be strictly increasing");
    }
  }
}

const std::vector<std::string> kKnownMethods = {
    "proposed", "reference", "tdm-equal", "tdm-opt",
    "direct",   "svd",       "gram-schmidt", "natural",
    "feature-broadcast"};

void check_methods(const std::vector<std::string>& methods) {
  for (const std::string& m : methods) {
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) ==
        kKnownMethods.end()) {
      throw ConfigError("unknown method name: " + m);
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j,
                              std::optional<ExperimentKind> kind_override) {
  if (!j.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  ExperimentKind kind;
  if (kind_override) {
    kind = *kind_override;
    if (j.contains("kind") &&
        experiment_kind_from_string(
            get_typed<std::string>(j.at("kind"), "kind")) != kind) {
      throw ConfigError("config kind disagrees with the subcommand");
    }
  } else {
    if (!j.contains("kind")) {
      throw ConfigError("config needs a 'kind' field");
    }
    kind = experiment_kind_from_string(
        get_typed<std::string>(j.at("kind"), "kind"));
  }
  ExperimentConfig config = default_config(kind);

  static const std::vector<std::string> kAllowed = {
      "kind",        "dims",        "subspace",     "seed",
      "channel_seed", "energy_grid", "methods",      "weight_mode",
      "basis_methods", "mc_trials",  "out",          "train_count",
      "test_count",  "epochs",      "batch",        "learn_rate",
      "noise_draws", "checkpoint"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(kAllowed.begin(), kAllowed.end(), key) == kAllowed.end()) {
      throw ConfigError("unknown config key: '" + key + "'");
    }
  }

  if (j.contains("dims")) {
    const nlohmann::json& dims = j.at("dims");
    if (!dims.is_object()) {
      throw ConfigError("config key 'dims' has the wrong type");
    }
    for (const auto& [key, value] : dims.items()) {
      if (key == "users") {
        config.dims.users = get_typed<int>(value, "dims.users");
      } else if (key == "latent") {
        config.dims.latent = get_typed<int>(value, "dims.latent");
      } else if (key == "task") {
        config.dims.task = get_typed<int>(value, "dims.task");
      } else if (key == "obs") {
        config.dims.obs = get_typed<int>(value, "dims.obs");
      } else {
        throw ConfigError("unknown config key: 'dims." + key + "'");
      }
    }
  }
  if (j.contains("subspace")) {
    if (j.at("subspace").is_null()) {
      config.subspace_dim.reset();
    } else {
      config.subspace_dim = get_typed<int>(j.at("subspace"), "subspace");
    }
  }
  if (j.contains("seed")) {
    config.seed = get_typed<std::uint64_t>(j.at("seed"), "seed");
    config.seed_specified = true;
  }
  if (j.contains("channel_seed")) {
    config.channel_seed =
        get_typed<std::uint64_t>(j.at("channel_seed"), "channel_seed");
  }
  if (j.contains("energy_grid")) {
    config.energy_grid =
        get_typed<std::vector<double>>(j.at("energy_grid"), "energy_grid");
  }
  if (j.contains("methods")) {
    config.methods =
        get_typed<std::vector<std::string>>(j.at("methods"), "methods");
  }
  if (j.contains("weight_mode")) {
    try {
      config.weight_mode = weight_mode_from_string(
          get_typed<std::string>(j.at("weight_mode"), "weight_mode"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("basis_methods")) {
    config.basis_methods = get_typed<std::vector<std::string>>(
        j.at("basis_methods"), "basis_methods");
    if (kind == ExperimentKind::kBasisCompare) {
      config.methods = config.basis_methods;
    }
  }
  if (j.contains("mc_trials")) {
    config.mc_trials = get_typed<long>(j.at("mc_trials"), "mc_trials");
  }
  if (j.contains("out")) {
    config.out = get_typed<std::string>(j.at("out"), "out");
  }
  if (j.contains("train_count")) {
    config.train_count = get_typed<long>(j.at("train_count"), "train_count");
  }
  if (j.contains("test_count")) {
    config.test_count = get_typed<long>(j.at("test_count"), "test_count");
  }
  if (j.contains("epochs")) {
    config.epochs = get_typed<int>(j.at("epochs"), "epochs");
  }
  if (j.contains("batch")) {
    config.batch = get_typed<int>(j.at("batch"), "batch");
  }
  if (j.contains("learn_rate")) {
    config.learn_rate = get_typed<double>(j.at("learn_rate"), "learn_rate");
  }
  if (j.contains("noise_draws")) {
    config.noise_draws = get_typed<int>(j.at("noise_draws"), "noise_draws");
  }
  if (j.contains("checkpoint")) {
    config.checkpoint = get_typed<std::string>(j.at("checkpoint"), "checkpoint");
  }

  check_energy_grid(config.energy_grid);
  check_methods(config.methods);
  if (config.mc_trials < 0) {
    throw ConfigError("mc_trials must be >= 0");
  }
  if (config.dims.users < 1 || config.dims.latent < 1 ||
      config.dims.task < 1 || config.dims.obs < 1) {
    throw ConfigError("dims entries must be positive");
  }
  if (config.subspace_dim &&
      (*config.subspace_dim < 1 || *config.subspace_dim > config.dims.latent)) {
    throw ConfigError("subspace must lie in [1, dims.latent]");
  }
  if (config.train_count < 1 || config.test_count < 1 || config.epochs < 1 ||
      config.batch < 1 || config.noise_draws < 1) {
    throw ConfigError("training configuration entries must be positive");
  }
  return config;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<ExperimentKind> kind_override) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j, kind_override);
}

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides) {
  if (overrides.energy_grid) {
    config.energy_grid = *overrides.energy_grid;
    check_energy_grid(config.energy_grid);
  }
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.seed_specified = true;
  }
  if (overrides.trials) {
    if (*overrides.trials < 0) throw ConfigError("trials must be >= 0");
    config.mc_trials = *overrides.trials;
    config.noise_draws = static_cast<int>(
        std::max<long>(1, std::min<long>(*overrides.trials, 1 << 20)));
  }
  if (overrides.out) {
    config.out = *overrides.out;
  }
}

void apply_env_seed(ExperimentConfig& config) {
  if (config.seed_specified) return;
  if (const char* env = std::getenv("TASKCOMM_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw ConfigError("TASKCOMM_SEED is not an integer");
    }
    config.seed = static_cast<std::uint64_t>(v);
    config.seed_specified = true;
  }
}

nlohmann::json to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["kind"] = to_string(config.kind);
  j["dims"] = {{"users", config.dims.users},
               {"latent", config.dims.latent},
               {"task", config.dims.task},
               {"obs", config.dims.obs}};
  if (config.subspace_dim) {
    j["subspace"] = *config.subspace_dim;
  } else {
    j["subspace"] = nullptr;
  }
  j["seed"] = config.seed;
  if (config.channel_seed) j["channel_seed"] = *config.channel_seed;
  j["energy_grid"] = config.energy_grid;
  j["methods"] = config.methods;
  j["weight_mode"] = to_string(config.weight_mode);
  j["basis_methods"] = config.basis_methods;
  j["mc_trials"] = config.mc_trials;
  j["out"] = config.out;
  if (config.kind == ExperimentKind::kNonlinearSweep) {
    j["train_count"] = config.train_count;
    j["test_count"] = config.test_count;
    j["epochs"] = config.epochs;
    j["batch"] = config.batch;
    j["learn_rate"] = config.learn_rate;
    j["noise_draws"] = config.noise_draws;
    if (config.checkpoint) j["checkpoint"] = *config.checkpoint;
  }
  return j;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t channel_seed_of(const ExperimentConfig& config) {
  return config.channel_seed.value_or(config.seed + 1);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open output file: " + path);
  }
  out << text;
}

int run_linear_sweep(const ExperimentConfig& config) {
  const LinearGroundTruth model =
      synth_linear_model(config.dims, config.subspace_dim, config.seed);
  const GaussianStats stats = stats_from_ground_truth(model);
  ChannelSet channels =
      random_channels(config.dims.users, 0.0, channel_seed_of(config));

  SweepOptions opts;
  opts.weight_mode = config.weight_mode;
  opts.mc_trials = config.mc_trials;
  opts.seed = config.seed;
  const std::vector<SweepRow> rows = energy_sweep(
      model, stats, channels, config.energy_grid, config.methods, opts);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_text(config.out, csv.str());
  std::cout << "wrote " << rows.size() << " rows to " << config.out << '\n';
  return 0;
}

int run_nonlinear_sweep(const ExperimentConfig& config) {
  const long total = config.train_count + config.test_count;
  const NonlinearDataset all = synth_nonlinear_dataset(total, config.seed);
  auto [train_set, test_set] = split_dataset(all, config.train_count);

  MultiTaskNet net = make_net(NetDims{}, config.seed);
  FeatureStats fstats;
  bool loaded = false;
  if (config.checkpoint) {
    std::ifstream probe(*config.checkpoint);
    if (probe.good()) {
      auto [saved_net, saved_stats] =
          checkpoint_from_json(load_json(*config.checkpoint));
      net = std::move(saved_net);
      fstats = std::move(saved_stats);
      loaded = true;
      std::cout << "loaded checkpoint " << *config.checkpoint << '\n';
    }
  }
  if (!loaded) {
    TrainOptions topts;
    topts.epochs = config.epochs;
    topts.batch = config.batch;
    topts.learn_rate = config.learn_rate;
    topts.seed = config.seed;
    const TrainLog log = train(net, train_set, topts);
    std::cout << "trained " << config.epochs << " epochs, final loss "
              << (log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back())
              << '\n';
    fstats = feature_stats(net, train_set);
    if (config.checkpoint) {
      save_json(*config.checkpoint, checkpoint_to_json(net, fstats));
    }
  }

  const std::vector<Matrix> head_maps = linearize_heads(net);
  ChannelSet channels =
      random_channels(net.dims.tasks, 0.0, channel_seed_of(config));
  const int feature_dim = net.dims.feature;

  std::vector<SweepRow> rows;
  for (const double energy : config.energy_grid) {
    channels.energy = energy;
    for (const std::string& method : config.methods) {
      Matrix encoder;
      if (method == "proposed") {
        encoder = feature_encoder(head_maps, fstats, channels).active_matrix();
      } else if (method == "feature-broadcast") {
        encoder = std::sqrt(energy / feature_dim) *
                  Matrix::Identity(feature_dim, feature_dim);
      } else {
        throw ConfigError("nonlinear-sweep does not support method " + method);
      }
      const EvalReport report =
          end_to_end_eval(net, encoder, fstats, channels, test_set,
                          config.noise_draws, config.seed + 2, method);
      for (int n = 0; n <= net.dims.tasks; ++n) {
        SweepRow row;
        row.method = method;
        row.energy = energy;
        row.user = n < net.dims.tasks ? std::to_string(n) : "sum";
        row.mse_mc =
            n < net.dims.tasks ? report.per_user_mse(n) : report.sum_mse;
        row.mc_se = n < net.dims.tasks ? report.std_error(n)
                                       : report.sum_std_error;
        row.seed = config.seed;
        rows.push_back(std::move(row));
      }
    }
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_text(config.out, csv.str());
  std::cout << "wrote " << rows.size() << " rows to " << config.out << '\n';
  return 0;
}

int run_validate(const ExperimentConfig& config) {
  const std::vector<ValidationCheck> checks = run_validation_suite(config.seed);
  std::size_t passed = 0;
  std::ostringstream csv;
  csv << "check,status,detail\n";
  for (const ValidationCheck& check : checks) {
    if (check.passed) ++passed;
    std::printf("[%s] %-32s %s\n", check.passed ? "PASS" : "FAIL",
                check.name.c_str(), check.detail.c_str());
    csv << check.name << ',' << (check.passed ? "pass" : "fail") << ','
        << check.detail << '\n';
  }
  std::printf("%zu/%zu checks passed\n", passed, checks.size());
  write_text(config.out, csv.str());
  return passed == checks.size() ? 0 : 1;
}

}  // namespace

int run(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::kLinearSweep:
      return run_linear_sweep(config);
    case ExperimentKind::kBasisCompare:
      return run_linear_sweep(config);  // method list carries the difference
    case ExperimentKind::kNonlinearSweep:
      return run_nonlinear_sweep(config);
    case ExperimentKind::kValidate:
      return run_validate(config);
  }
  throw ConfigError("unhandled experiment kind");
}

namespace {

ValidationCheck check_bound(const std::string& name, double value,
                            double bound) {
  ValidationCheck check;
  check.name = name;
  check.passed = value <= bound;
  check.detail = format_double(value) + std::string(" <= ") +
                 format_double(bound);
  return check;
}

}  // namespace

std::vector<ValidationCheck> run_validation_suite(std::uint64_t seed) {
  std::vector<ValidationCheck> checks;

  // Whitening, PSD grams, subspace rank on the reference instance.
  const LinearGroundTruth model =
      synth_linear_model({4, 20, 4, 30}, 8, seed);
  const GaussianStats stats = stats_from_ground_truth(model);
  {
    const Matrix sigma_y =
        model.mixing * model.mixing.transpose() +
        Matrix::Identity(model.dims.obs, model.dims.obs);
    const double dev = (stats.whitener * sigma_y * stats.whitener -
                        Matrix::Identity(model.dims.obs, model.dims.obs))
                           .cwiseAbs()
                           .maxCoeff();
    checks.push_back(check_bound("whitening-identity", dev, 1e-8));
  }
  {
    double min_eig = 0.0;
    double gram_dev = 0.0;
    for (int n = 0; n < stats.num_users(); ++n) {
      const SymmetricEigen eig = symmetric_eigen(stats.gram[n]);
      min_eig = std::min(min_eig, eig.values.minCoeff());
      gram_dev = std::max(
          gram_dev,
          (stats.gram[n] - stats.cross[n].transpose() * stats.cross[n])
              .cwiseAbs()
              .maxCoeff());
    }
    checks.push_back(check_bound("gram-psd", -min_eig, 1e-10));
    checks.push_back(check_bound("gram-factorization", gram_dev, 1e-10));
  }
  {
    Matrix stacked(model.dims.users * model.dims.task, model.dims.latent);
    for (int n = 0; n < model.dims.users; ++n) {
      stacked.middleRows(n * model.dims.task, model.dims.task) =
          model.task_maps[n];
    }
    const Vector sv = right_singular_basis(stacked).singular_values;
    int above = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-8) ++above;
    }
    ValidationCheck check;
    check.name = "subspace-rank";
    check.passed = above <= 8;
    check.detail = std::to_string(above) + " singular values above 1e-8";
    checks.push_back(check);
  }

  // Water-filling and allocation KKT on random instances.
  {
    const CounterRng rng(seed, 7001);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Vector lambdas(5);
      for (int d = 0; d < 5; ++d) {
        lambdas(d) = std::abs(rng.normal(trial * 16 + d)) + 0.01;
      }
      const double gain = rng.normal(trial * 16 + 8) + 2.0;
      const double energy = std::abs(rng.normal(trial * 16 + 9)) * 5 + 0.5;
      const WaterFill wf = water_fill_beta(lambdas, gain, energy);
      const Vector w = water_fill_energies(lambdas, gain, wf.beta);
      worst = std::max(worst, std::abs(w.sum() - energy) /
                                  std::max(energy, 1.0));
    }
    checks.push_back(check_bound("waterfill-budget", worst, 1e-9));
  }
  {
    ChannelSet channels;
    channels.gains = Vector::Zero(3);
    const CounterRng rng(seed, 7002);
    channels.gains << rng.normal(0) + 2.0, rng.normal(1) - 2.5,
        rng.normal(2) + 1.5;
    channels.energy = 4.0;
    Matrix table(6, 3);
    for (int d = 0; d < 6; ++d) {
      for (int n = 0; n < 3; ++n) {
        table(d, n) = std::abs(rng.normal(16 + d * 3 + n));
      }
    }
    const EnergyAllocation alloc = allocate_energy(table, channels);
    double kkt = 0.0;
    for (int d = 0; d < 6; ++d) {
      double lhs = 0.0;
      for (int n = 0; n < 3; ++n) {
        const double a = 1.0 / (channels.gains(n) * channels.gains(n));
        const double denom = alloc.energies(d) + a;
        lhs += table(d, n) * a / (denom * denom);
      }
      if (alloc.energies(d) > 0.0) {
        kkt = std::max(kkt, std::abs(lhs - alloc.beta) /
                                std::max(1.0, alloc.beta));
      } else if (lhs > alloc.beta) {
        kkt = std::max(kkt, (lhs - alloc.beta) / std::max(1.0, alloc.beta));
      }
    }
    checks.push_back(check_bound("allocation-kkt", kkt, 1e-8));
    checks.push_back(check_bound(
        "allocation-budget",
        std::abs(alloc.energies.sum() - channels.energy) / channels.energy,
        1e-6));
  }

  // Basis orthonormality and the importance identity.
  {
    const ChannelSet channels = random_channels(4, 30.0, seed + 1);
    double ortho = 0.0;
    double importance_dev = 0.0;
    for (const BasisMethod method :
         {BasisMethod::kSvd, BasisMethod::kGramSchmidt, BasisMethod::kNatural}) {
      const Encoder enc =
          multiuser_encoder(stats, channels, WeightMode::kBlended, method);
      ortho = std::max(
          ortho, (enc.basis.transpose() * enc.basis -
                  Matrix::Identity(enc.dim(), enc.dim()))
                     .cwiseAbs()
                     .maxCoeff());
      for (int n = 0; n < stats.num_users(); ++n) {
        for (int d = 0; d < enc.dim(); ++d) {
          const double direct =
              (stats.cross[n] * enc.basis.col(d)).squaredNorm();
          importance_dev =
              std::max(importance_dev, std::abs(direct - enc.importance(d, n)));
        }
      }
    }
    checks.push_back(check_bound("basis-orthonormal", ortho, 1e-10));
    checks.push_back(check_bound("importance-identity", importance_dev, 1e-8));
  }

  // Single-user closed form against the convex reference.
  {
    double worst = 0.0;
    for (int trial = 0; trial < 2; ++trial) {
      const LinearGroundTruth small = synth_linear_model(
          {1, 6, 3, 6}, std::nullopt, seed + 100 + trial);
      const GaussianStats sstats = stats_from_ground_truth(small);
      const ChannelSet channels = random_channels(1, 5.0 + 10.0 * trial,
                                                  seed + 200 + trial);
      const Encoder enc = single_user_encoder(
          sstats.gram[0], channels.gains(0), channels.energy);
      const double closed = encoder_objective(enc, sstats, channels);
      const ReferenceSolution ref = solve_reference(sstats, channels);
      worst = std::max(worst, std::abs(closed - ref.objective) /
                                  std::max(closed, 1e-12));
    }
    checks.push_back(check_bound("single-user-vs-reference", worst, 1e-5));
  }

  // Reference solver: monotone history, two starts agree.
  {
    const ChannelSet channels = random_channels(4, 30.0, seed + 1);
    const ReferenceSolution a = solve_reference(stats, channels);
    SolveOptions opts;
    opts.start = Matrix::Zero(stats.obs_dim(), stats.obs_dim());
    const ReferenceSolution b = solve_reference(stats, channels, opts);
    double increase = 0.0;
    for (std::size_t i = 1; i < a.history.size(); ++i) {
      increase = std::max(increase, a.history[i] - a.history[i - 1]);
    }
    checks.push_back(check_bound("reference-monotone", increase, 0.0));
    checks.push_back(check_bound(
        "reference-two-starts",
        std::abs(a.objective - b.objective) / std::max(a.objective, 1e-12),
        1e-7));

    const Encoder proposed =
        multiuser_encoder(stats, channels, WeightMode::kBlended,
                          BasisMethod::kSvd);
    const double gap = encoder_objective(proposed, stats, channels) -
                       a.objective + 1e-8;
    ValidationCheck dominance;
    dominance.name = "reference-lower-bound";
    dominance.passed = gap >= 0.0;
    dominance.detail = "proposed - reference = " + format_double(gap);
    checks.push_back(dominance);
  }

  // Monte-Carlo agreement with the closed form.
  {
    const ChannelSet channels = random_channels(4, 30.0, seed + 1);
    const Encoder enc = multiuser_encoder(stats, channels,
                                          WeightMode::kBlended,
                                          BasisMethod::kSvd);
    const Matrix g = enc.active_matrix();
    const EvalReport analytic = analytic_mse(stats, g, channels);
    const EvalReport mc = simulate(model, g, channels, 20000, seed + 3);
    double worst_z = 0.0;
    for (int n = 0; n < analytic.per_user_mse.size(); ++n) {
      const double z = std::abs(mc.per_user_mse(n) - analytic.per_user_mse(n)) /
                       std::max(mc.std_error(n), 1e-300);
      worst_z = std::max(worst_z, z);
    }
    checks.push_back(check_bound("monte-carlo-agreement", worst_z, 4.0));
  }

  // Baseline ordering at the reference dimensions.
  {
    ChannelSet channels = random_channels(4, 0.0, seed + 1);
    bool ordered = true;
    double max_ratio = 0.0;
    for (const double energy : {3.0, 30.0, 300.0}) {
      channels.energy = energy;
      const Encoder proposed = multiuser_encoder(
          stats, channels, WeightMode::kAuto, BasisMethod::kSvd);
      const double p =
          analytic_mse(stats, proposed.active_matrix(), channels).sum_mse;
      const double tdm =
          tdm_baseline(stats, channels, TdmSplit::kEqual).report.sum_mse;
      const double direct = direct_broadcast(stats, channels).sum_mse;
      const ReferenceSolution ref = solve_reference(stats, channels);
      const double floor_total = [&] {
        double f = 0.0;
        for (int n = 0; n < stats.num_users(); ++n) f += stats.noiseless_mse(n);
        return f;
      }();
      ordered = ordered && p <= tdm + 1e-9 && p <= direct + 1e-9;
      max_ratio = std::max(
          max_ratio, (p - floor_total) / std::max(ref.objective, 1e-12));
      ordered = ordered && p <= 1.05 * (ref.objective + floor_total);
    }
    ValidationCheck check;
    check.name = "baseline-ordering";
    check.passed = ordered;
    check.detail = "max excess ratio vs reference = " + format_double(max_ratio);
    checks.push_back(check);
  }

  // Encoder JSON round trip.
  {
    const ChannelSet channels = random_channels(4, 30.0, seed + 1);
    const Encoder enc = multiuser_encoder(stats, channels,
                                          WeightMode::kBlended,
                                          BasisMethod::kSvd);
    const Encoder restored = encoder_from_json(to_json(enc));
    const double dev =
        std::max((restored.basis - enc.basis).cwiseAbs().maxCoeff(),
                 (restored.energies - enc.energies).cwiseAbs().maxCoeff());
    checks.push_back(check_bound("encoder-json-roundtrip", dev, 0.0));
  }

  // Byte determinism of a small sweep.
  {
    ChannelSet channels = random_channels(4, 0.0, seed + 1);
    SweepOptions opts;
    opts.seed = seed;
    opts.mc_trials = 500;
    const std::vector<double> grid = {1.0, 10.0};
    const std::vector<std::string> methods = {"proposed", "direct"};
    std::ostringstream first, second;
    write_sweep_csv(first,
                    energy_sweep(model, stats, channels, grid, methods, opts));
    write_sweep_csv(second,
                    energy_sweep(model, stats, channels, grid, methods, opts));
    ValidationCheck check;
    check.name = "sweep-determinism";
    check.passed = first.str() == second.str();
    check.detail = check.passed ? "byte-identical" : "outputs differ";
    checks.push_back(check);
  }

  return checks;
}

}  // namespace taskcomm
