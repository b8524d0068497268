#include "taskcomm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "taskcomm/rng.hpp"

namespace taskcomm {

namespace {

// Stream ids keep every random fill independent of the others.
enum Stream : std::uint64_t {
  kMixing = 0,
  kSubspace = 1,
  kTaskMaps = 16,   // + user index
  kBatchLatent = 2,
  kBatchNoise = 3,
  kGains = 4,
};

void check_dims(const ModelDims& d, std::optional<int> subspace_dim) {
  if (d.users < 1 || d.latent < 1 || d.task < 1 || d.obs < 1) {
    throw std::invalid_argument("synth_linear_model: dimensions must be positive");
  }
  if (subspace_dim && (*subspace_dim < 1 || *subspace_dim > d.latent)) {
    throw std::invalid_argument(
        "synth_linear_model: subspace_dim must lie in [1, latent]");
  }
}

}  // namespace

LinearGroundTruth synth_linear_model(const ModelDims& dims,
                                     std::optional<int> subspace_dim,
                                     std::uint64_t seed) {
  check_dims(dims, subspace_dim);
  LinearGroundTruth model;
  model.dims = dims;
  model.subspace_dim = subspace_dim;
  model.seed = seed;
  model.mixing = CounterRng(seed, kMixing).normal_matrix(dims.obs, dims.latent);

  Matrix subspace_basis;  // latent×s, orthonormal columns
  if (subspace_dim) {
    const Matrix raw =
        CounterRng(seed, kSubspace).normal_matrix(dims.latent, *subspace_dim);
    Eigen::HouseholderQR<Matrix> qr(raw);
    subspace_basis =
        qr.householderQ() * Matrix::Identity(dims.latent, *subspace_dim);
  }

  model.task_maps.reserve(dims.users);
  for (int n = 0; n < dims.users; ++n) {
    const CounterRng rng(seed, kTaskMaps + static_cast<std::uint64_t>(n));
    if (subspace_dim) {
      const Matrix coeffs = rng.normal_matrix(dims.task, *subspace_dim);
      model.task_maps.push_back(coeffs * subspace_basis.transpose());
    } else {
      model.task_maps.push_back(rng.normal_matrix(dims.task, dims.latent));
    }
  }
  return model;
}

GaussianStats stats_from_ground_truth(const LinearGroundTruth& model) {
  const int obs = model.dims.obs;
  const Matrix sigma_y = symmetrize(model.mixing * model.mixing.transpose() +
                                    Matrix::Identity(obs, obs));
  std::vector<Matrix> cross_raw;
  std::vector<Matrix> prior;
  cross_raw.reserve(model.task_maps.size());
  prior.reserve(model.task_maps.size());
  for (const Matrix& k : model.task_maps) {
    cross_raw.push_back(k * model.mixing.transpose());
    prior.push_back(symmetrize(k * k.transpose()));
  }
  return stats_from_moments(std::move(cross_raw), std::move(prior), sigma_y);
}

GaussianStats stats_from_moments(std::vector<Matrix> cross_raw,
                                 std::vector<Matrix> prior,
                                 const Matrix& sigma_y) {
  if (cross_raw.empty() || cross_raw.size() != prior.size()) {
    throw std::invalid_argument(
        "stats_from_moments: need matching nonempty cross/prior lists");
  }
  if (sigma_y.rows() != sigma_y.cols()) {
    throw std::invalid_argument("stats_from_moments: sigma_y must be square");
  }
  GaussianStats stats;
  stats.whitener = symmetric_inv_sqrt(sigma_y, 1e-12);
  stats.mean_y = Vector::Zero(sigma_y.rows());
  stats.cross.reserve(cross_raw.size());
  stats.gram.reserve(cross_raw.size());
  for (std::size_t n = 0; n < cross_raw.size(); ++n) {
    if (cross_raw[n].cols() != sigma_y.rows()) {
      throw std::invalid_argument(
          "stats_from_moments: cross matrix " + std::to_string(n) +
          " has wrong column count");
    }
    stats.cross.push_back(cross_raw[n] * stats.whitener);
    stats.gram.push_back(
        symmetrize(stats.cross[n].transpose() * stats.cross[n]));
  }
  stats.prior = std::move(prior);
  return stats;
}

SampleBatch sample_batch(const LinearGroundTruth& model, long count,
                         std::uint64_t seed) {
  if (count < 1) {
    throw std::invalid_argument("sample_batch: count must be >= 1");
  }
  const int latent = model.dims.latent;
  const int obs = model.dims.obs;
  SampleBatch batch;
  batch.seed = seed;
  const Matrix z =
      CounterRng(seed, kBatchLatent).normal_matrix(count, latent);
  const Matrix v = CounterRng(seed, kBatchNoise).normal_matrix(count, obs);
  batch.y = z * model.mixing.transpose() + v;
  batch.x.reserve(model.task_maps.size());
  for (const Matrix& k : model.task_maps) {
    batch.x.push_back(z * k.transpose());
  }
  return batch;
}

ChannelSet random_channels(int users, double energy, std::uint64_t seed) {
  if (users < 1) {
    throw std::invalid_argument("random_channels: users must be >= 1");
  }
  if (energy < 0.0) {
    throw std::invalid_argument("random_channels: energy must be >= 0");
  }
  constexpr std::uint64_t kMaxAttempts = 64;
  const CounterRng rng(seed, kGains);
  ChannelSet channels;
  channels.energy = energy;
  channels.gains.resize(users);
  for (int n = 0; n < users; ++n) {
    double h = 0.0;
    for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      h = rng.normal(static_cast<std::uint64_t>(n) * kMaxAttempts + attempt);
      if (std::abs(h) >= 1e-3) break;
    }
    channels.gains(n) = h;
  }
  return channels;
}

void validate_channels(const ChannelSet& channels) {
  if (channels.num_users() < 1) {
    throw std::invalid_argument("channels: need at least one user");
  }
  for (int n = 0; n < channels.num_users(); ++n) {
    if (channels.gains(n) == 0.0) {
      throw std::invalid_argument("channels: gains must be nonzero");
    }
  }
  if (channels.energy < 0.0) {
    throw std::invalid_argument("channels: energy must be >= 0");
  }
}

}  // namespace taskcomm
