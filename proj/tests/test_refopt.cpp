#include <doctest.h>

#include <cmath>

#include "taskcomm/refopt.hpp"
#include "taskcomm/rng.hpp"
#include "test_support.hpp"

using namespace taskcomm;
using taskcomm::testing::make_codiagonal_instance;
using taskcomm::testing::random_feasible_encoder;
using taskcomm::testing::symmetric_finite_difference;

namespace {

GaussianStats random_stats(int users, int latent, int task, int obs,
                           std::uint64_t seed) {
  return stats_from_ground_truth(
      synth_linear_model({users, latent, task, obs}, std::nullopt, seed));
}

}  // namespace

TEST_CASE("objective_and_gradient: value at zero is the total gram trace") {
  const GaussianStats stats = random_stats(3, 6, 2, 5, 1);
  const ChannelSet channels = random_channels(3, 4.0, 2);
  const auto [value, grad] =
      objective_and_gradient(Matrix::Zero(5, 5), stats, channels);
  double expected = 0.0;
  for (int n = 0; n < 3; ++n) expected += stats.gram[n].trace();
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(grad.rows() == 5);
}

TEST_CASE("objective_and_gradient: scalar closed form") {
  std::vector<Matrix> cross = {Matrix::Constant(1, 1, std::sqrt(0.7))};
  std::vector<Matrix> prior = {Matrix::Constant(1, 1, 0.7)};
  const GaussianStats stats =
      stats_from_moments(cross, prior, Matrix::Identity(1, 1));
  ChannelSet channels;
  channels.gains = Vector::Constant(1, 1.0);
  channels.energy = 1.0;
  const Matrix r = Matrix::Constant(1, 1, 0.6);
  const auto [value, grad] = objective_and_gradient(r, stats, channels);
  CHECK(value == doctest::Approx(0.7 / 1.6).epsilon(1e-12));
  CHECK(grad(0, 0) == doctest::Approx(-0.7 / (1.6 * 1.6)).epsilon(1e-12));
}

TEST_CASE("objective_and_gradient: rejects asymmetric input") {
  const GaussianStats stats = random_stats(2, 4, 2, 4, 3);
  const ChannelSet channels = random_channels(2, 2.0, 4);
  Matrix bad = Matrix::Zero(4, 4);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(objective_and_gradient(bad, stats, channels),
                  std::invalid_argument);
}

TEST_CASE("objective_and_gradient: matches central finite differences") {
  const GaussianStats stats = random_stats(3, 6, 2, 5, 7);
  const ChannelSet channels = random_channels(3, 3.0, 8);
  // A strictly interior PSD point.
  const Matrix base = 0.3 * Matrix::Identity(5, 5) +
                      0.1 * stats.gram[0] / std::max(1.0, stats.gram[0].norm());
  const auto [value, grad] = objective_and_gradient(base, stats, channels);
  const Matrix fd = symmetric_finite_difference(
      [&](const Matrix& r) {
        return reference_objective(r, stats, channels);
      },
      base, 1e-5);
  CHECK((grad - fd).norm() / fd.norm() < 1e-5);
  CHECK(value == doctest::Approx(reference_objective(base, stats, channels)));
}

TEST_CASE("project_psd_trace: feasible input unchanged") {
  Matrix s(2, 2);
  s << 0.4, 0.1, 0.1, 0.3;
  const Matrix projected = project_psd_trace(s, 1.0);
  CHECK((projected - s).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("project_psd_trace: clamp then shift") {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 2.0;
  s(1, 1) = -1.0;
  const Matrix projected = project_psd_trace(s, 1.0);
  CHECK(projected(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(projected(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("project_psd_trace: closest feasible point among random probes") {
  const CounterRng rng(17, 0);
  const int dim = 4;
  const double energy = 2.0;
  Matrix s(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      s(i, j) = rng.normal(i * dim + j);
    }
  }
  s = symmetrize(s);
  const Matrix projected = project_psd_trace(s, energy);
  const double dist = (projected - s).norm();

  const CounterRng probe_rng(18, 0);
  for (int probe = 0; probe < 1000; ++probe) {
    // Random feasible point: random PSD matrix scaled into the trace ball.
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        a(i, j) = probe_rng.normal(
            static_cast<std::uint64_t>(probe) * dim * dim + i * dim + j);
      }
    }
    Matrix feasible = a * a.transpose();
    const double trace = feasible.trace();
    if (trace > 0.0) {
      feasible *= energy * probe_rng.uniform(probe) / trace;
    }
    CHECK(dist <= (feasible - s).norm() + 1e-9);
  }
}

TEST_CASE("factor_encoder: identity, zero, and reconstruction") {
  const Matrix g_id = factor_encoder(Matrix::Identity(2, 2));
  CHECK(g_id.rows() == 2);
  CHECK((g_id.transpose() * g_id - Matrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  CHECK(factor_encoder(Matrix::Zero(3, 3)).rows() == 0);

  const CounterRng rng(23, 0);
  Matrix a(5, 3);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) {
      a(i, j) = rng.normal(i * 3 + j);
    }
  }
  const Matrix r = a * a.transpose();
  const Matrix g = factor_encoder(r);
  CHECK(g.rows() == 3);
  CHECK((g.transpose() * g - r).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solve_reference: zero energy stays at the origin") {
  const GaussianStats stats = random_stats(2, 5, 2, 4, 9);
  const ChannelSet channels = random_channels(2, 0.0, 10);
  const ReferenceSolution sol = solve_reference(stats, channels);
  CHECK(sol.gram.cwiseAbs().maxCoeff() == 0.0);
  double expected = 0.0;
  for (int n = 0; n < 2; ++n) expected += stats.gram[n].trace();
  CHECK(sol.objective == doctest::Approx(expected));
  CHECK(sol.converged);
}

TEST_CASE("solve_reference: matches the single-user closed form") {
  for (int trial = 0; trial < 10; ++trial) {
    const int obs = 4 + (trial % 5);
    const GaussianStats stats =
        random_stats(1, obs, 3, obs, 100 + static_cast<std::uint64_t>(trial));
    const ChannelSet channels =
        random_channels(1, 0.5 + 3.0 * trial, 200 + static_cast<std::uint64_t>(trial));
    const Encoder closed = single_user_encoder(
        stats.gram[0], channels.gains(0), channels.energy);
    const double closed_objective = encoder_objective(closed, stats, channels);
    const ReferenceSolution ref = solve_reference(stats, channels);
    CHECK(std::abs(ref.objective - closed_objective) /
              std::max(closed_objective, 1e-12) < 1e-6);
  }
}

TEST_CASE("solve_reference: matches multiuser design on co-diagonalizable instances") {
  for (const std::uint64_t seed : {301ull, 302ull, 303ull}) {
    const auto instance = make_codiagonal_instance(7, 3, 3, 5.0, seed);
    const Encoder enc =
        multiuser_encoder(instance.stats, instance.channels,
                          WeightMode::kBlended, BasisMethod::kSvd);
    const double design = encoder_objective(enc, instance.stats,
                                            instance.channels);
    const ReferenceSolution ref =
        solve_reference(instance.stats, instance.channels);
    CHECK(std::abs(ref.objective - design) / std::max(design, 1e-12) < 1e-6);
  }
}

TEST_CASE("solve_reference: monotone history and two-start agreement") {
  const GaussianStats stats = random_stats(3, 8, 3, 7, 11);
  const ChannelSet channels = random_channels(3, 6.0, 12);
  const ReferenceSolution a = solve_reference(stats, channels);
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    CHECK(a.history[i] <= a.history[i - 1] + 1e-15);
  }
  CHECK(a.converged);
  // Feasibility of the final iterate.
  CHECK(a.gram.trace() <= channels.energy + 1e-9);
  CHECK(symmetric_eigen(a.gram).values.minCoeff() >= -1e-9);

  SolveOptions opts;
  opts.start = Matrix::Zero(7, 7);
  const ReferenceSolution b = solve_reference(stats, channels, opts);
  CHECK(std::abs(a.objective - b.objective) /
            std::max(std::abs(a.objective), 1e-12) < 1e-7);
}

TEST_CASE("solve_reference: lower bound for every design encoder") {
  const GaussianStats stats = random_stats(3, 9, 3, 8, 13);
  const ChannelSet channels = random_channels(3, 10.0, 14);
  const ReferenceSolution ref = solve_reference(stats, channels);
  for (const BasisMethod method :
       {BasisMethod::kSvd, BasisMethod::kGramSchmidt, BasisMethod::kNatural}) {
    const Encoder enc =
        multiuser_encoder(stats, channels, WeightMode::kBlended, method);
    CHECK(ref.objective <= encoder_objective(enc, stats, channels) + 1e-8);
  }
  // And for random feasible encoders.
  const CounterRng rng(15, 0);
  for (int probe = 0; probe < 50; ++probe) {
    const Matrix g = random_feasible_encoder(
        8, 8, channels.energy, rng.uniform(probe), rng,
        static_cast<std::uint64_t>(probe) + 1000);
    CHECK(ref.objective <=
          excess_sum_mse(g, stats.gram, channels.gains) + 1e-8);
  }
}
