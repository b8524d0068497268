#pragma once

#include <vector>

#include "taskcomm/model.hpp"

namespace taskcomm {

// kAuto is an encoder-level policy: build the design under each of the four
// weight rules and keep the one with the smallest allocation objective.
enum class WeightMode { kUnit, kHighSnr, kLowSnr, kBlended, kAuto };
enum class BasisMethod { kSvd, kGramSchmidt, kNatural };

struct TaskWeights {
  Vector values;  // m_n > 0
  WeightMode mode = WeightMode::kUnit;
  // Blended weights need a positive energy budget; with E = 0 the rule
  // degrades to the low-SNR weights and this flag records it.
  bool zero_energy_fallback = false;
};

// Factored linear encoder G = sqrt(W) P^T: an orthogonal feature basis plus a
// per-feature energy budget. importance(d, n) = p_d^T M_n p_d measures how
// much user n's estimate degrades when feature d is received noisily.
struct Encoder {
  Matrix basis;                  // P, dim×dim orthogonal, features as columns
  Vector energies;               // w >= 0
  Matrix importance;             // dim×users
  std::vector<int> active_dims;  // indices with w_d > 0
  double multiplier = 0.0;       // beta of the allocation stationarity equation

  int dim() const { return static_cast<int>(basis.rows()); }
  double total_energy() const { return energies.sum(); }
  // Full dim×dim matrix; unfunded features contribute zero rows.
  Matrix matrix() const;
  // Rows restricted to active_dims (what actually goes over the air).
  Matrix active_matrix() const;
};

struct WaterFill {
  double beta = 0.0;
  bool degenerate = false;  // all eigenvalues zero: any zero-energy G is optimal
};

// Lagrange multiplier of the single-user water-filling problem: finds beta
// with sum_d max(sqrt(lambda_d / beta) - h^-2, 0) = E by bisection.
WaterFill water_fill_beta(const Vector& eigenvalues, double gain,
                          double energy);
Vector water_fill_energies(const Vector& eigenvalues, double gain,
                           double beta);

// Exact single-user optimum: eigenbasis of the task gram matrix plus
// water-filling energies.
Encoder single_user_encoder(const Matrix& task_gram, double gain,
                            double energy);

TaskWeights task_weights(const ChannelSet& channels, WeightMode mode);

// Orthogonal basis spanning the union of the users' interested subspaces.
// svd: right singular vectors of the stacked weighted cross matrices;
// gram-schmidt: orthonormalized stacked rows in user order, completed with
// natural vectors; natural: identity.
Matrix shared_basis(const GaussianStats& stats, const TaskWeights& weights,
                    BasisMethod method);

Matrix importance_table(const Matrix& basis, const std::vector<Matrix>& grams);

struct EnergyAllocation {
  Vector energies;
  double beta = 0.0;
};

// Minimizes sum_d sum_n c(d,n) h_n^-2 / (w_d + h_n^-2) subject to
// sum w_d <= E, w >= 0. Outer bisection on the multiplier beta; per-dimension
// inner bisection on the stationarity equation
//   sum_n c(d,n) h_n^-2 / (w_d + h_n^-2)^2 = beta.
EnergyAllocation allocate_energy(const Matrix& importance,
                                 const ChannelSet& channels);

// Full pipeline: task weights -> shared basis -> importance -> allocation.
Encoder multiuser_encoder(const GaussianStats& stats,
                          const ChannelSet& channels, WeightMode weight_mode,
                          BasisMethod basis_method);

// Channel-induced excess MSE summed over users,
// sum_n h_n^-2 Tr(M_n (G^T G + h_n^-2 I)^-1); the design objective.
double excess_sum_mse(const Matrix& encoder, const std::vector<Matrix>& grams,
                      const Vector& gains);
double encoder_objective(const Encoder& encoder, const GaussianStats& stats,
                         const ChannelSet& channels);

// Normalized residual of the multi-user first-order optimality condition at
// the encoder; zero exactly at stationary points.
double stationarity_residual(const Encoder& encoder,
                             const GaussianStats& stats,
                             const ChannelSet& channels);

const char* to_string(WeightMode mode);
const char* to_string(BasisMethod method);
WeightMode weight_mode_from_string(const std::string& name);
BasisMethod basis_method_from_string(const std::string& name);

}  // namespace taskcomm
