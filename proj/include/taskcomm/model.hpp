#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "taskcomm/linalg.hpp"

namespace taskcomm {

struct ModelDims {
  int users = 1;   // N
  int latent = 1;  // dimension of the latent source z
  int task = 1;    // dimension of each user's target x_n
  int obs = 1;     // dimension of the observed data y
};

// Ground-truth linear generative model: y = C z + v, x_n = K_n z with
// z ~ N(0, I) and v ~ N(0, I). When subspace_dim is set, the rows of every
// K_n lie in one random subspace of that dimension, which couples the users'
// tasks.
struct LinearGroundTruth {
  ModelDims dims;
  std::optional<int> subspace_dim;
  Matrix mixing;                  // C, obs×latent
  std::vector<Matrix> task_maps;  // K_n, task×latent
  std::uint64_t seed = 0;
};

// Whitened second-order statistics; the canonical representation consumed by
// all designers and evaluators. cross[n] is expressed in whitened
// y-coordinates, so the observation covariance is the identity downstream.
struct GaussianStats {
  std::vector<Matrix> cross;  // Sigma_{x_n y} * whitener, task×obs
  std::vector<Matrix> prior;  // Sigma_{x_n}, task×task
  std::vector<Matrix> gram;   // M_n = cross_n^T cross_n, obs×obs
  Matrix whitener;            // Sigma_y^{-1/2}
  Vector mean_y;

  int num_users() const { return static_cast<int>(cross.size()); }
  int obs_dim() const { return static_cast<int>(whitener.rows()); }
  int task_dim(int n) const { return static_cast<int>(cross[n].rows()); }
  // MSE of the best linear estimate from a clean observation.
  double noiseless_mse(int n) const {
    return prior[n].trace() - gram[n].trace();
  }
};

struct ChannelSet {
  Vector gains;         // h_n, all nonzero
  double energy = 0.0;  // total transmit energy budget E >= 0

  int num_users() const { return static_cast<int>(gains.size()); }
};

struct SampleBatch {
  Matrix y;               // count×obs, one sample per row
  std::vector<Matrix> x;  // count×task per user
  std::uint64_t seed = 0;
};

// Draws C and the K_n with i.i.d. standard normal entries; with subspace_dim
// set, K_n rows are standard-normal combinations of an orthonormal basis of a
// random subspace. Deterministic per seed.
LinearGroundTruth synth_linear_model(const ModelDims& dims,
                                     std::optional<int> subspace_dim,
                                     std::uint64_t seed);

// Sigma_y = C C^T + I, whitener = Sigma_y^{-1/2}, cross_n = K_n C^T whitener,
// prior_n = K_n K_n^T, gram_n = cross_n^T cross_n.
GaussianStats stats_from_ground_truth(const LinearGroundTruth& model);

// Entry point for caller-supplied raw moments; whitens once at construction.
GaussianStats stats_from_moments(std::vector<Matrix> cross_raw,
                                 std::vector<Matrix> prior,
                                 const Matrix& sigma_y);

SampleBatch sample_batch(const LinearGroundTruth& model, long count,
                         std::uint64_t seed);

// i.i.d. standard normal gains, redrawn while |h_n| < 1e-3.
ChannelSet random_channels(int users, double energy, std::uint64_t seed);

void validate_channels(const ChannelSet& channels);

}  // namespace taskcomm
