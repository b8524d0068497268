#include "taskcomm/refopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "taskcomm/design.hpp"

namespace taskcomm {

std::pair<double, Matrix> objective_and_gradient(const Matrix& r,
                                                 const GaussianStats& stats,
                                                 const ChannelSet& channels) {
  const Eigen::Index obs = stats.obs_dim();
  if (r.rows() != obs || r.cols() != obs) {
    throw std::invalid_argument("objective_and_gradient: bad R shape");
  }
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("objective_and_gradient: R must be symmetric");
  }
  const Matrix rs = symmetrize(r);
  double value = 0.0;
  Matrix grad = Matrix::Zero(obs, obs);
  const Matrix identity = Matrix::Identity(obs, obs);
  for (int n = 0; n < stats.num_users(); ++n) {
    const double a = 1.0 / (channels.gains(n) * channels.gains(n));
    const Matrix inv = (rs + a * identity).llt().solve(identity);
    value += a * inv.cwiseProduct(stats.gram[n]).sum();
    grad -= a * (inv * stats.gram[n] * inv);
  }
  return {value, symmetrize(grad)};
}

double reference_objective(const Matrix& r, const GaussianStats& stats,
                           const ChannelSet& channels) {
  const Eigen::Index obs = stats.obs_dim();
  const Matrix rs = symmetrize(r);
  double value = 0.0;
  const Matrix identity = Matrix::Identity(obs, obs);
  for (int n = 0; n < stats.num_users(); ++n) {
    const double a = 1.0 / (channels.gains(n) * channels.gains(n));
    const Matrix inv = (rs + a * identity).llt().solve(identity);
    value += a * inv.cwiseProduct(stats.gram[n]).sum();
  }
  return value;
}

Matrix project_psd_trace(const Matrix& s, double energy) {
  if (energy < 0.0) {
    throw std::invalid_argument("project_psd_trace: energy must be >= 0");
  }
  const SymmetricEigen eig = symmetric_eigen(s);
  Vector clamped = eig.values.cwiseMax(0.0);
  if (clamped.sum() > energy) {
    // Uniform-shift projection of the clamped spectrum onto the simplex
    // {x >= 0, sum x = energy}.
    std::vector<double> sorted(clamped.data(), clamped.data() + clamped.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double prefix = 0.0;
    double shift = sorted.front() - energy;  // fallback: only top survives
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      prefix += sorted[k];
      const double candidate = (prefix - energy) / static_cast<double>(k + 1);
      if (candidate < sorted[k]) {
        shift = candidate;
      } else {
        break;
      }
    }
    clamped = (clamped.array() - shift).cwiseMax(0.0).matrix();
  }
  return symmetrize(eig.vectors * clamped.asDiagonal() *
                    eig.vectors.transpose());
}

Matrix factor_encoder(const Matrix& r) {
  const SymmetricEigen eig = symmetric_eigen(r);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) > 1e-12) ++kept;
  }
  Matrix encoder(kept, r.cols());
  for (Eigen::Index i = 0; i < kept; ++i) {
    encoder.row(i) = std::sqrt(eig.values(i)) * eig.vectors.col(i).transpose();
  }
  return encoder;
}

ReferenceSolution solve_reference(const GaussianStats& stats,
                                  const ChannelSet& channels,
                                  const SolveOptions& opts) {
  validate_channels(channels);
  const Eigen::Index obs = stats.obs_dim();
  const double energy = channels.energy;

  ReferenceSolution sol;
  Matrix r = opts.start
                 ? project_psd_trace(*opts.start, energy)
                 : Matrix((energy / static_cast<double>(obs)) *
                          Matrix::Identity(obs, obs));
  auto [value, grad] = objective_and_gradient(r, stats, channels);
  sol.history.push_back(value);

  constexpr double kArmijo = 1e-4;
  int stall = 0;
  int iter = 0;
  // The accepted step carries over with headroom to grow, so nearly flat
  // objectives (very weak channels) do not crawl at a fixed unit step.
  double step_init = opts.initial_step;
  for (; iter < opts.max_iter; ++iter) {
    double step = step_init;
    Matrix candidate;
    double candidate_value = value;
    bool accepted = false;
    while (step > 1e-18) {
      candidate = project_psd_trace(r - step * grad, energy);
      const double directional = grad.cwiseProduct(candidate - r).sum();
      if (directional >= 0.0) break;  // projected step is a fixed point
      candidate_value = reference_objective(candidate, stats, channels);
      if (candidate_value <= value + kArmijo * directional) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    step_init = std::min(std::max(step * 4.0, 1e-18), 1e15);
    if (!accepted) {
      sol.converged = true;  // no feasible descent direction left
      break;
    }
    const double decrease = value - candidate_value;
    r = candidate;
    value = candidate_value;
    grad = objective_and_gradient(r, stats, channels).second;
    sol.history.push_back(value);
    if (decrease < opts.tol * std::max(std::abs(value), 1e-300)) {
      if (++stall >= 10) {
        sol.converged = true;
        ++iter;
        break;
      }
    } else {
      stall = 0;
    }
  }
  sol.iterations = iter;
  sol.gram = r;
  sol.encoder = factor_encoder(r);
  sol.objective = value;
  return sol;
}

}  // namespace taskcomm
