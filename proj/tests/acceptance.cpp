// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "taskcomm/channel_eval.hpp"
#include "taskcomm/harness.hpp"
#include "taskcomm/neural.hpp"
#include "taskcomm/refopt.hpp"
#include "taskcomm/rng.hpp"
#include "test_support.hpp"

using namespace taskcomm;
using taskcomm::testing::make_codiagonal_instance;
using taskcomm::testing::random_feasible_encoder;
using taskcomm::testing::symmetric_finite_difference;

namespace {

int g_failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int criterion, const std::string& label, bool passed,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %2d: %-34s %s (%.1fs)\n",
              passed ? "PASS" : "FAIL", criterion, label.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!passed) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Single-user optimality: closed form vs convex reference and random
//    competitors on 30 random instances with obs dimension <= 10.
void criterion_1() {
  Timer timer;
  const CounterRng rng(1001, 0);
  double worst_gap = 0.0;
  bool beats_random = true;
  for (int trial = 0; trial < 30; ++trial) {
    const int obs = 3 + static_cast<int>(rng.uniform(trial * 8) * 8);     // <= 10
    const int task = 1 + static_cast<int>(rng.uniform(trial * 8 + 1) * 4);
    const int latent = 3 + static_cast<int>(rng.uniform(trial * 8 + 2) * 9);
    const GaussianStats stats = stats_from_ground_truth(synth_linear_model(
        {1, latent, task, obs}, std::nullopt, 3000 + trial));
    ChannelSet channels = random_channels(1, 0.0, 4000 + trial);
    channels.energy = 0.5 + 79.5 * rng.uniform(trial * 8 + 3);

    const Encoder closed = single_user_encoder(stats.gram[0],
                                               channels.gains(0),
                                               channels.energy);
    const double closed_objective = encoder_objective(closed, stats, channels);
    const ReferenceSolution ref = solve_reference(stats, channels);
    worst_gap = std::max(worst_gap,
                         std::abs(closed_objective - ref.objective) /
                             std::max(closed_objective, 1e-12));

    for (int probe = 0; probe < 1000; ++probe) {
      const Matrix g = random_feasible_encoder(
          obs, obs, channels.energy,
          0.05 + 0.95 * rng.uniform(trial * 3000 + probe), rng,
          static_cast<std::uint64_t>(trial) * 2000 + probe);
      const double competitor =
          excess_sum_mse(g, stats.gram, channels.gains);
      if (closed_objective > competitor + 1e-12) {
        beats_random = false;
      }
    }
  }
  const bool passed = worst_gap < 1e-5 && beats_random;
  report(1, "single-user optimality", passed,
         "max rel gap vs reference " + fmt(worst_gap) +
             (beats_random ? ", beats 30x1000 random encoders"
                           : ", LOST to a random encoder"),
         timer.seconds());
}

// ---------------------------------------------------------------------------
// 2. Exactness on simultaneously co-diagonalizable instances.
void criterion_2() {
  Timer timer;
  double worst_gap = 0.0;
  double worst_residual = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto instance = make_codiagonal_instance(
        6 + (trial % 5), 3, 2 + (trial % 3), 2.0 + 2.0 * trial,
        5000 + static_cast<std::uint64_t>(trial));
    const Encoder enc =
        multiuser_encoder(instance.stats, instance.channels,
                          WeightMode::kBlended, BasisMethod::kSvd);
    const double design =
        encoder_objective(enc, instance.stats, instance.channels);
    const ReferenceSolution ref =
        solve_reference(instance.stats, instance.channels);
    worst_gap = std::max(worst_gap, std::abs(design - ref.objective) /
                                        std::max(design, 1e-12));
    worst_residual = std::max(
        worst_residual,
        stationarity_residual(enc, instance.stats, instance.channels));
  }
  const bool passed = worst_gap < 1e-6 && worst_residual < 1e-7;
  report(2, "co-diagonal exactness", passed,
         "max rel gap " + fmt(worst_gap) + ", max stationarity residual " +
             fmt(worst_residual),
         timer.seconds());
}

// ---------------------------------------------------------------------------
// Shared sweep for criteria 3-5: 20 instances at the reference dimensions,
// 8 energies each.
struct SweepCell {
  double proposed, reference, tdm_equal, direct, svd, gram_schmidt, natural;
};

std::vector<SweepCell> run_reference_sweep() {
  std::vector<SweepCell> cells;
  const std::vector<double> energies = {1, 3, 10, 30, 100, 300, 1000, 3000};
  for (int instance = 0; instance < 20; ++instance) {
    const LinearGroundTruth model = synth_linear_model(
        {4, 20, 4, 30}, 8, 6000 + static_cast<std::uint64_t>(instance));
    const GaussianStats stats = stats_from_ground_truth(model);
    ChannelSet channels =
        random_channels(4, 0.0, 7000 + static_cast<std::uint64_t>(instance));
    double floor_total = 0.0;
    for (int n = 0; n < 4; ++n) floor_total += stats.noiseless_mse(n);
    for (const double energy : energies) {
      channels.energy = energy;
      SweepCell cell{};
      const auto design_mse = [&](BasisMethod method) {
        const Encoder enc = multiuser_encoder(stats, channels,
                                              WeightMode::kAuto, method);
        return floor_total + encoder_objective(enc, stats, channels);
      };
      cell.proposed = design_mse(BasisMethod::kSvd);
      cell.svd = cell.proposed;
      cell.gram_schmidt = design_mse(BasisMethod::kGramSchmidt);
      cell.natural = design_mse(BasisMethod::kNatural);
      cell.reference =
          floor_total + solve_reference(stats, channels).objective;
      cell.tdm_equal =
          tdm_baseline(stats, channels, TdmSplit::kEqual).report.sum_mse;
      cell.direct = direct_broadcast(stats, channels).sum_mse;
      cells.push_back(cell);
    }
  }
  return cells;
}

void criteria_3_4_5() {
  Timer timer;
  const std::vector<SweepCell> cells = run_reference_sweep();
  const double sweep_seconds = timer.seconds();

  // 3. Near-optimality of the proposed design against the convex reference.
  double worst_ratio = 0.0;
  for (const SweepCell& cell : cells) {
    worst_ratio = std::max(worst_ratio, cell.proposed / cell.reference);
  }
  report(3, "near-optimality vs reference", worst_ratio <= 1.05,
         "max sum-MSE ratio " + fmt(worst_ratio) + " over " +
             std::to_string(cells.size()) + " points (bound 1.05)",
         sweep_seconds);

  // 4. Baseline ordering with strict improvement at half the points.
  Timer timer4;
  bool ordered = true;
  int strict = 0;
  for (const SweepCell& cell : cells) {
    if (cell.proposed > cell.tdm_equal + 1e-9 ||
        cell.proposed > cell.direct + 1e-9) {
      ordered = false;
    }
    const double margin = 0.01;
    if (cell.proposed < (1.0 - margin) * cell.tdm_equal &&
        cell.proposed < (1.0 - margin) * cell.direct) {
      ++strict;
    }
  }
  const bool half = 2 * strict >= static_cast<int>(cells.size());
  report(4, "baseline ordering", ordered && half,
         std::string(ordered ? "ordered everywhere" : "ORDER VIOLATED") +
             ", >1% improvement at " + std::to_string(strict) + "/" +
             std::to_string(cells.size()) + " points",
         timer4.seconds());

  // 5. Basis comparison: svd never loses to natural, and stays within 1% of
  //    gram-schmidt.
  Timer timer5;
  bool basis_ok = true;
  double worst_vs_gs = 0.0;
  for (const SweepCell& cell : cells) {
    if (cell.svd > cell.natural + 1e-9) basis_ok = false;
    worst_vs_gs = std::max(worst_vs_gs, cell.svd / cell.gram_schmidt);
    if (cell.svd > 1.01 * cell.gram_schmidt + 1e-12) basis_ok = false;
  }
  report(5, "basis comparison", basis_ok,
         "svd <= natural everywhere, svd/gs max ratio " + fmt(worst_vs_gs),
         timer5.seconds());
}

// ---------------------------------------------------------------------------
// 6. Monte-Carlo agreement with the closed form at 1e5 trials.
void criterion_6() {
  Timer timer;
  double worst_z = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int obs = 4 + (trial % 9);
    const int users = 2 + (trial % 3);
    const LinearGroundTruth model = synth_linear_model(
        {users, obs + 2, 3, obs}, std::nullopt,
        8000 + static_cast<std::uint64_t>(trial));
    const GaussianStats stats = stats_from_ground_truth(model);
    ChannelSet channels = random_channels(
        users, 1.0 + 3.0 * trial, 9000 + static_cast<std::uint64_t>(trial));
    const Encoder enc = multiuser_encoder(stats, channels,
                                          WeightMode::kBlended,
                                          BasisMethod::kSvd);
    const Matrix g = enc.active_matrix();
    const EvalReport analytic = analytic_mse(stats, g, channels);
    const EvalReport mc =
        simulate(model, g, channels, 100000,
                 10077 + static_cast<std::uint64_t>(trial));
    for (int n = 0; n < users; ++n) {
      const double z =
          std::abs(mc.per_user_mse(n) - analytic.per_user_mse(n)) /
          std::max(mc.std_error(n), 1e-300);
      worst_z = std::max(worst_z, z);
    }
  }
  report(6, "analytic/monte-carlo agreement", worst_z <= 3.0,
         "max |z| " + fmt(worst_z) + " over 20 instances (bound 3)",
         timer.seconds());
}

// ---------------------------------------------------------------------------
// 7. Reference solver self-consistency.
void criterion_7() {
  Timer timer;
  bool monotone = true;
  double start_gap = 0.0;
  double grad_gap = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const GaussianStats stats = stats_from_ground_truth(synth_linear_model(
        {3, 8, 3, 7}, 4, 11000 + static_cast<std::uint64_t>(trial)));
    ChannelSet channels = random_channels(
        3, 2.0 + 5.0 * trial, 12000 + static_cast<std::uint64_t>(trial));
    const ReferenceSolution a = solve_reference(stats, channels);
    for (std::size_t i = 1; i < a.history.size(); ++i) {
      if (a.history[i] > a.history[i - 1] + 1e-15) monotone = false;
    }
    SolveOptions opts;
    opts.start = Matrix::Zero(7, 7);
    const ReferenceSolution b = solve_reference(stats, channels, opts);
    start_gap = std::max(start_gap,
                         std::abs(a.objective - b.objective) /
                             std::max(std::abs(a.objective), 1e-12));

    const Matrix base = project_psd_trace(
        0.4 * channels.energy / 7.0 *
            (Matrix::Identity(7, 7) +
             0.3 * symmetrize(CounterRng(trial, 5).normal_matrix(7, 7))),
        channels.energy);
    const auto [value, grad] = objective_and_gradient(base, stats, channels);
    const Matrix fd = symmetric_finite_difference(
        [&](const Matrix& r) { return reference_objective(r, stats, channels); },
        base, 1e-5);
    grad_gap = std::max(grad_gap, (grad - fd).norm() / fd.norm());
  }
  const bool passed = monotone && start_gap < 1e-7 && grad_gap < 1e-5;
  report(7, "reference self-consistency", passed,
         std::string(monotone ? "monotone" : "NON-MONOTONE") +
             ", two-start gap " + fmt(start_gap) + ", gradient FD gap " +
             fmt(grad_gap),
         timer.seconds());
}

// ---------------------------------------------------------------------------
// 8. Neural extension end to end.
void criterion_8() {
  Timer timer;
  const long train_count = 10000;
  const long test_count = 1000;
  const NonlinearDataset all =
      synth_nonlinear_dataset(train_count + test_count, 13001);
  auto [train_set, test_set] = split_dataset(all, train_count);

  MultiTaskNet net = make_net(NetDims{}, 13002);
  TrainOptions opts;
  opts.epochs = 300;
  opts.seed = 13003;
  train(net, train_set, opts);
  const FeatureStats stats = feature_stats(net, train_set);
  const std::vector<Matrix> maps = linearize_heads(net);

  ChannelSet channels = random_channels(3, 0.0, 13004);
  const std::vector<double> energies = {0.5, 2, 8, 32, 128, 512};
  bool beats_uniform = true;
  std::string detail;
  for (const double energy : energies) {
    channels.energy = energy;
    const Encoder enc = feature_encoder(maps, stats, channels);
    const EvalReport proposed =
        end_to_end_eval(net, enc.active_matrix(), stats, channels, test_set,
                        32, 13005, "proposed");
    const Matrix uniform =
        std::sqrt(energy / 12.0) * Matrix::Identity(12, 12);
    const EvalReport baseline =
        end_to_end_eval(net, uniform, stats, channels, test_set, 32, 13005,
                        "feature-broadcast");
    if (proposed.sum_mse >= baseline.sum_mse) beats_uniform = false;
  }

  channels.energy = 1e6;
  const Encoder enc = feature_encoder(maps, stats, channels);
  const EvalReport asymptote = end_to_end_eval(
      net, enc.active_matrix(), stats, channels, test_set, 8, 13006);
  const double noiseless = network_test_mse(net, test_set);
  const double rel = std::abs(asymptote.sum_mse - noiseless) / noiseless;

  const bool passed = beats_uniform && rel <= 0.01;
  report(8, "neural extension", passed,
         std::string(beats_uniform ? "beats uniform at 6 energies"
                                   : "LOST to uniform broadcast") +
             ", high-energy gap " + fmt(rel) + " (bound 0.01)",
         timer.seconds());
}

// ---------------------------------------------------------------------------
// 9. Layer-wise gradient checks on random probes.
void criterion_9() {
  Timer timer;
  NetDims dims;
  dims.input = 6;
  dims.trunk_hidden = 5;
  dims.feature = 4;
  dims.head_hidden = 3;
  dims.output = 2;
  dims.tasks = 2;
  double worst = 0.0;
  const double step = 1e-5;
  for (int probe = 0; probe < 5; ++probe) {
    MultiTaskNet net = make_net(dims, 14000 + static_cast<std::uint64_t>(probe));
    const CounterRng rng(14100 + static_cast<std::uint64_t>(probe), 0);
    const Matrix y = rng.normal_matrix(4, 6);
    const std::vector<Matrix> x = {rng.normal_matrix(4, 2, 500),
                                   rng.normal_matrix(4, 2, 900)};
    const auto [loss, grads] = loss_and_gradients(net, y, x);

    auto check_param = [&](double* param, double analytic) {
      const double saved = *param;
      *param = saved + step;
      const double up = loss_and_gradients(net, y, x).first;
      *param = saved - step;
      const double down = loss_and_gradients(net, y, x).first;
      *param = saved;
      const double fd = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - analytic) /
                                  std::max(std::abs(fd), 1e-8));
    };
    check_param(&net.trunk1.weight(probe % 5, probe % 6),
                grads.trunk1.weight(probe % 5, probe % 6));
    check_param(&net.trunk1.bias(probe % 5), grads.trunk1.bias(probe % 5));
    check_param(&net.trunk2.weight(probe % 4, probe % 5),
                grads.trunk2.weight(probe % 4, probe % 5));
    check_param(&net.trunk2.bias(probe % 4), grads.trunk2.bias(probe % 4));
    check_param(&net.heads[probe % 2].in.weight(probe % 3, probe % 4),
                grads.heads[probe % 2].in.weight(probe % 3, probe % 4));
    check_param(&net.heads[probe % 2].in.bias(probe % 3),
                grads.heads[probe % 2].in.bias(probe % 3));
    check_param(&net.heads[probe % 2].out.weight(probe % 2, probe % 3),
                grads.heads[probe % 2].out.weight(probe % 2, probe % 3));
    check_param(&net.heads[probe % 2].out.bias(probe % 2),
                grads.heads[probe % 2].out.bias(probe % 2));
  }
  report(9, "layer gradient checks", worst < 1e-4,
         "max rel FD error " + fmt(worst) + " (bound 1e-4)", timer.seconds());
}

// ---------------------------------------------------------------------------
// 10. Byte determinism of the validate suite outputs.
void criterion_10() {
  Timer timer;
  namespace fs = std::filesystem;
  const fs::path first = fs::temp_directory_path() / "taskcomm_acc_v1.csv";
  const fs::path second = fs::temp_directory_path() / "taskcomm_acc_v2.csv";
  ExperimentConfig config = default_config(ExperimentKind::kValidate);
  config.seed = 7;
  config.out = first.string();
  const int rc1 = run(config);
  config.out = second.string();
  const int rc2 = run(config);

  auto slurp = [](const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
  };
  const std::string a = slurp(first);
  const std::string b = slurp(second);
  fs::remove(first);
  fs::remove(second);
  const bool passed = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
  report(10, "validate determinism", passed,
         passed ? "byte-identical validate CSV across runs"
                : "outputs differ or validate failed",
         timer.seconds());
}

}  // namespace

int main() {
  std::printf("taskcomm acceptance suite\n");
  criterion_1();
  criterion_2();
  criteria_3_4_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
