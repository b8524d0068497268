#include "taskcomm/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace taskcomm {

Matrix Encoder::matrix() const {
  return energies.cwiseMax(0.0).cwiseSqrt().asDiagonal() * basis.transpose();
}

Matrix Encoder::active_matrix() const {
  Matrix out(static_cast<Eigen::Index>(active_dims.size()), basis.rows());
  for (std::size_t i = 0; i < active_dims.size(); ++i) {
    const int d = active_dims[i];
    out.row(static_cast<Eigen::Index>(i)) =
        std::sqrt(energies(d)) * basis.col(d).transpose();
  }
  return out;
}

namespace {

std::vector<int> funded_dims(const Vector& w) {
  std::vector<int> dims;
  for (Eigen::Index d = 0; d < w.size(); ++d) {
    if (w(d) > 0.0) dims.push_back(static_cast<int>(d));
  }
  return dims;
}

// Clamp the total to the budget; bisection can overshoot by its tolerance.
void fit_to_budget(Vector& w, double energy) {
  const double total = w.sum();
  if (total > energy && total > 0.0) w *= energy / total;
}

double water_fill_total(const Vector& lambdas, double inv_gain_sq,
                        double beta) {
  double total = 0.0;
  for (Eigen::Index d = 0; d < lambdas.size(); ++d) {
    const double l = std::max(lambdas(d), 0.0);
    if (l <= 0.0) continue;
    total += std::max(std::sqrt(l / beta) - inv_gain_sq, 0.0);
  }
  return total;
}

}  // namespace

WaterFill water_fill_beta(const Vector& eigenvalues, double gain,
                          double energy) {
  if (gain == 0.0) {
    throw std::invalid_argument("water_fill_beta: gain must be nonzero");
  }
  if (energy < 0.0) {
    throw std::invalid_argument("water_fill_beta: energy must be >= 0");
  }
  const double lambda_max = eigenvalues.size() ? eigenvalues.maxCoeff() : 0.0;
  if (lambda_max <= 0.0) {
    return {0.0, true};
  }
  const double inv_gain_sq = 1.0 / (gain * gain);
  // At beta_hi every dimension is priced out of the allocation.
  const double beta_hi = lambda_max / (inv_gain_sq * inv_gain_sq);
  if (energy == 0.0) {
    return {beta_hi, false};
  }
  double lo = beta_hi;
  while (water_fill_total(eigenvalues, inv_gain_sq, lo) < energy) {
    lo *= 0.5;
    if (lo < 1e-300) break;
  }
  double hi = beta_hi;
  const double tol = 1e-10 * std::max(energy, 1.0);
  double beta = lo;
  for (int it = 0; it < 400; ++it) {
    beta = std::sqrt(lo * hi);
    const double total = water_fill_total(eigenvalues, inv_gain_sq, beta);
    if (std::abs(total - energy) <= tol) break;
    if (total > energy) {
      lo = beta;
    } else {
      hi = beta;
    }
  }
  return {beta, false};
}

Vector water_fill_energies(const Vector& eigenvalues, double gain,
                           double beta) {
  const double inv_gain_sq = 1.0 / (gain * gain);
  Vector w = Vector::Zero(eigenvalues.size());
  for (Eigen::Index d = 0; d < eigenvalues.size(); ++d) {
    const double l = std::max(eigenvalues(d), 0.0);
    if (l <= 0.0 || beta <= 0.0) continue;
    w(d) = std::max(std::sqrt(l / beta) - inv_gain_sq, 0.0);
  }
  return w;
}

Encoder single_user_encoder(const Matrix& task_gram, double gain,
                            double energy) {
  if (energy < 0.0) {
    throw std::invalid_argument("single_user_encoder: energy must be >= 0");
  }
  if (gain == 0.0) {
    throw std::invalid_argument("single_user_encoder: gain must be nonzero");
  }
  if ((task_gram - task_gram.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("single_user_encoder: gram must be symmetric");
  }
  const SymmetricEigen eig = symmetric_eigen(task_gram);
  Encoder enc;
  enc.basis = eig.vectors;
  enc.importance = eig.values.cwiseMax(0.0);
  const WaterFill wf = water_fill_beta(eig.values, gain, energy);
  if (wf.degenerate || energy == 0.0) {
    enc.energies = Vector::Zero(eig.values.size());
    enc.multiplier = wf.degenerate ? 0.0 : wf.beta / (gain * gain);
  } else {
    enc.energies = water_fill_energies(eig.values, gain, wf.beta);
    fit_to_budget(enc.energies, energy);
    // Stored in the convention of the multi-user stationarity equation,
    // where the single-user multiplier picks up an h^-2 factor.
    enc.multiplier = wf.beta / (gain * gain);
  }
  enc.active_dims = funded_dims(enc.energies);
  return enc;
}

TaskWeights task_weights(const ChannelSet& channels, WeightMode mode) {
  validate_channels(channels);
  if (mode == WeightMode::kAuto) {
    throw std::invalid_argument(
        "task_weights: auto is resolved by multiuser_encoder, pick a rule");
  }
  const int users = channels.num_users();
  TaskWeights weights;
  weights.mode = mode;
  weights.values.resize(users);
  const Vector abs_gains = channels.gains.cwiseAbs();
  switch (mode) {
    case WeightMode::kAuto:
      break;  // unreachable
    case WeightMode::kUnit:
      weights.values.setOnes();
      break;
    case WeightMode::kHighSnr:
      weights.values = abs_gains.cwiseInverse();
      break;
    case WeightMode::kLowSnr:
      weights.values = abs_gains;
      break;
    case WeightMode::kBlended: {
      const double h_min = abs_gains.minCoeff();
      const double snr_min = channels.energy * h_min * h_min;
      if (snr_min <= 0.0) {
        weights.values = abs_gains;
        weights.zero_energy_fallback = true;
        break;
      }
      for (int n = 0; n < users; ++n) {
        const double h = abs_gains(n);
        weights.values(n) = h / (h * h + 1.0 / snr_min);
      }
      break;
    }
  }
  return weights;
}

Matrix shared_basis(const GaussianStats& stats, const TaskWeights& weights,
                    BasisMethod method) {
  const int obs = stats.obs_dim();
  const int users = stats.num_users();
  if (weights.values.size() != users) {
    throw std::invalid_argument("shared_basis: weights/users mismatch");
  }
  if (method == BasisMethod::kNatural) {
    return Matrix::Identity(obs, obs);
  }

  Eigen::Index stack_rows = 0;
  for (const Matrix& c : stats.cross) stack_rows += c.rows();
  Matrix stack(stack_rows, obs);
  Eigen::Index at = 0;
  for (int n = 0; n < users; ++n) {
    stack.middleRows(at, stats.cross[n].rows()) =
        weights.values(n) * stats.cross[n];
    at += stats.cross[n].rows();
  }

  if (method == BasisMethod::kSvd) {
    return right_singular_basis(stack).basis;
  }

  // Gram-Schmidt over the stacked rows in user order, completed with natural
  // basis vectors.
  Matrix basis(obs, obs);
  Eigen::Index accepted = 0;
  auto try_accept = [&](Vector candidate) {
    const double original_norm = candidate.norm();
    if (original_norm <= 0.0) return;
    for (Eigen::Index j = 0; j < accepted; ++j) {
      candidate -= basis.col(j).dot(candidate) * basis.col(j);
    }
    // Second orthogonalization pass keeps the basis clean near rank drops.
    for (Eigen::Index j = 0; j < accepted; ++j) {
      candidate -= basis.col(j).dot(candidate) * basis.col(j);
    }
    const double residual = candidate.norm();
    if (residual > 1e-10 * std::max(1.0, original_norm)) {
      basis.col(accepted++) = candidate / residual;
    }
  };
  for (Eigen::Index r = 0; r < stack.rows() && accepted < obs; ++r) {
    try_accept(stack.row(r).transpose());
  }
  for (int d = 0; d < obs && accepted < obs; ++d) {
    try_accept(Vector::Unit(obs, d));
  }
  fix_column_signs(basis);
  return basis;
}

Matrix importance_table(const Matrix& basis,
                        const std::vector<Matrix>& grams) {
  const Eigen::Index dim = basis.cols();
  Matrix table(dim, static_cast<Eigen::Index>(grams.size()));
  for (std::size_t n = 0; n < grams.size(); ++n) {
    const Matrix projected = basis.transpose() * grams[n] * basis;
    for (Eigen::Index d = 0; d < dim; ++d) {
      table(d, static_cast<Eigen::Index>(n)) = std::max(projected(d, d), 0.0);
    }
  }
  return table;
}

namespace {

// LHS of the per-dimension stationarity equation at energy w.
double price(const Matrix& c, const Vector& inv_gain_sq, Eigen::Index d,
             double w) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < c.cols(); ++n) {
    const double a = inv_gain_sq(n);
    const double denom = w + a;
    total += c(d, n) * a / (denom * denom);
  }
  return total;
}

double solve_dimension(const Matrix& c, const Vector& inv_gain_sq,
                       Eigen::Index d, double beta) {
  if (price(c, inv_gain_sq, d, 0.0) <= beta) return 0.0;
  double hi = 1.0;
  while (price(c, inv_gain_sq, d, hi) > beta) {
    hi *= 2.0;
    if (hi > 1e300) return hi;
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (price(c, inv_gain_sq, d, mid) > beta) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

EnergyAllocation allocate_energy(const Matrix& importance,
                                 const ChannelSet& channels) {
  validate_channels(channels);
  if (importance.cols() != channels.num_users()) {
    throw std::invalid_argument("allocate_energy: importance/users mismatch");
  }
  if (importance.size() > 0 && importance.minCoeff() < -1e-12) {
    throw std::invalid_argument("allocate_energy: negative importance entry");
  }
  const Matrix c = importance.cwiseMax(0.0);
  const Eigen::Index dim = c.rows();
  const double energy = channels.energy;

  EnergyAllocation alloc;
  alloc.energies = Vector::Zero(dim);
  const double c_max = c.size() ? c.maxCoeff() : 0.0;
  if (c_max <= 0.0) {
    return alloc;  // nothing worth funding
  }

  const Vector inv_gain_sq =
      channels.gains.array().square().inverse().matrix();
  double beta_hi = 0.0;
  for (Eigen::Index d = 0; d < dim; ++d) {
    beta_hi = std::max(beta_hi, price(c, inv_gain_sq, d, 0.0));
  }
  if (energy == 0.0) {
    alloc.beta = beta_hi;
    return alloc;
  }

  auto total_at = [&](double beta, Vector& w) {
    double total = 0.0;
    for (Eigen::Index d = 0; d < dim; ++d) {
      w(d) = solve_dimension(c, inv_gain_sq, d, beta);
      total += w(d);
    }
    return total;
  };

  Vector w(dim);
  double lo = beta_hi;
  while (total_at(lo, w) < energy) {
    lo *= 0.5;
    if (lo < 1e-300) break;
  }
  double hi = beta_hi;
  const double tol = 1e-9 * std::max(energy, 1.0);
  double beta = lo;
  for (int it = 0; it < 300; ++it) {
    beta = std::sqrt(lo * hi);
    const double total = total_at(beta, w);
    if (std::abs(total - energy) <= tol) break;
    if (total > energy) {
      lo = beta;
    } else {
      hi = beta;
    }
  }
  fit_to_budget(w, energy);
  alloc.energies = w;
  alloc.beta = beta;
  return alloc;
}

namespace {

// Allocation objective evaluated on the importance table; equals the
// channel-excess MSE of the factored encoder.
double table_objective(const Matrix& table, const Vector& energies,
                       const Vector& gains) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < table.cols(); ++n) {
    const double a = 1.0 / (gains(n) * gains(n));
    for (Eigen::Index d = 0; d < table.rows(); ++d) {
      total += table(d, n) * a / (energies(d) + a);
    }
  }
  return total;
}

Encoder encoder_for_weights(const GaussianStats& stats,
                            const ChannelSet& channels,
                            const TaskWeights& weights,
                            BasisMethod basis_method) {
  const Matrix basis = shared_basis(stats, weights, basis_method);
  const Matrix table = importance_table(basis, stats.gram);

  // Directions nothing cares about are never funded.
  Matrix pruned = table;
  const double c_max = table.size() ? table.maxCoeff() : 0.0;
  for (Eigen::Index d = 0; d < pruned.rows(); ++d) {
    if (table.row(d).maxCoeff() < 1e-12 * c_max) {
      pruned.row(d).setZero();
    }
  }
  const EnergyAllocation alloc = allocate_energy(pruned, channels);

  Encoder enc;
  enc.basis = basis;
  enc.energies = alloc.energies;
  enc.importance = table;
  enc.multiplier = alloc.beta;
  enc.active_dims = funded_dims(enc.energies);
  return enc;
}

}  // namespace

Encoder multiuser_encoder(const GaussianStats& stats,
                          const ChannelSet& channels, WeightMode weight_mode,
                          BasisMethod basis_method) {
  if (stats.num_users() != channels.num_users()) {
    throw std::invalid_argument("multiuser_encoder: stats/channels mismatch");
  }
  if (weight_mode != WeightMode::kAuto) {
    return encoder_for_weights(stats, channels,
                               task_weights(channels, weight_mode),
                               basis_method);
  }
  // Auto: the weight rules are cheap heuristics; evaluate the exact
  // allocation objective under each and keep the winner.
  Encoder best;
  double best_objective = std::numeric_limits<double>::infinity();
  for (const WeightMode mode :
       {WeightMode::kUnit, WeightMode::kHighSnr, WeightMode::kLowSnr,
        WeightMode::kBlended}) {
    Encoder candidate = encoder_for_weights(
        stats, channels, task_weights(channels, mode), basis_method);
    const double objective = table_objective(
        candidate.importance, candidate.energies, channels.gains);
    if (objective < best_objective) {
      best_objective = objective;
      best = std::move(candidate);
    }
  }
  return best;
}

double excess_sum_mse(const Matrix& encoder, const std::vector<Matrix>& grams,
                      const Vector& gains) {
  if (grams.empty()) return 0.0;
  const Eigen::Index obs = grams[0].rows();
  Matrix gram_encoder = Matrix::Zero(obs, obs);
  if (encoder.rows() > 0) {
    gram_encoder = symmetrize(encoder.transpose() * encoder);
  }
  double total = 0.0;
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(grams.size()); ++n) {
    const double a = 1.0 / (gains(n) * gains(n));
    const Matrix shifted = gram_encoder + a * Matrix::Identity(obs, obs);
    const Matrix solved = shifted.llt().solve(grams[static_cast<std::size_t>(n)]);
    total += a * solved.trace();
  }
  return total;
}

double encoder_objective(const Encoder& encoder, const GaussianStats& stats,
                         const ChannelSet& channels) {
  return excess_sum_mse(encoder.active_matrix(), stats.gram, channels.gains);
}

double stationarity_residual(const Encoder& encoder,
                             const GaussianStats& stats,
                             const ChannelSet& channels) {
  const Matrix g = encoder.matrix();
  const double g_norm = g.norm();
  if (g_norm == 0.0) return 0.0;
  const Eigen::Index obs = g.cols();
  const Matrix gram_encoder = symmetrize(g.transpose() * g);
  Matrix lhs = Matrix::Zero(g.rows(), obs);
  for (int n = 0; n < stats.num_users(); ++n) {
    const double a = 1.0 / (channels.gains(n) * channels.gains(n));
    const Matrix shifted = gram_encoder + a * Matrix::Identity(obs, obs);
    const auto llt = shifted.llt();
    const Matrix inner = llt.solve(stats.gram[n] * llt.solve(Matrix::Identity(obs, obs)));
    lhs += a * g * inner;
  }
  return (lhs - encoder.multiplier * g).norm() / g_norm;
}

const char* to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::kUnit:
      return "unit";
    case WeightMode::kHighSnr:
      return "high-snr";
    case WeightMode::kLowSnr:
      return "low-snr";
    case WeightMode::kBlended:
      return "blended";
    case WeightMode::kAuto:
      return "auto";
  }
  return "unknown";
}

const char* to_string(BasisMethod method) {
  switch (method) {
    case BasisMethod::kSvd:
      return "svd";
    case BasisMethod::kGramSchmidt:
      return "gram-schmidt";
    case BasisMethod::kNatural:
      return "natural";
  }
  return "unknown";
}

WeightMode weight_mode_from_string(const std::string& name) {
  if (name == "unit") return WeightMode::kUnit;
  if (name == "high-snr") return WeightMode::kHighSnr;
  if (name == "low-snr") return WeightMode::kLowSnr;
  if (name == "blended") return WeightMode::kBlended;
  if (name == "auto") return WeightMode::kAuto;
  throw std::invalid_argument("unknown weight mode: " + name);
}

BasisMethod basis_method_from_string(const std::string& name) {
  if (name == "svd") return BasisMethod::kSvd;
  if (name == "gram-schmidt") return BasisMethod::kGramSchmidt;
  if (name == "natural") return BasisMethod::kNatural;
  throw std::invalid_argument("unknown basis method: " + name);
}

}  // namespace taskcomm
