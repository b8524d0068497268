#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskcomm/channel_eval.hpp"
#include "taskcomm/design.hpp"
#include "taskcomm/model.hpp"

namespace taskcomm {

struct LinearLayer {
  Matrix weight;  // out×in
  Vector bias;    // out
};

struct NetDims {
  int input = 20;
  int trunk_hidden = 16;
  int feature = 12;
  int head_hidden = 8;
  int output = 3;
  int tasks = 3;
};

// Hard-parameter-sharing multi-task MLP: a tanh trunk producing the shared
// feature vector q, and one small head per task whose first layer is linear
// (that layer is what gets linearized for encoder design).
struct MultiTaskNet {
  struct Head {
    LinearLayer in;   // feature -> head_hidden, tanh after
    LinearLayer out;  // head_hidden -> output
  };

  NetDims dims;
  std::uint64_t seed = 0;
  LinearLayer trunk1;  // input -> trunk_hidden, tanh after
  LinearLayer trunk2;  // trunk_hidden -> feature, tanh after

  std::vector<Head> heads;

  // Batch conventions: one sample per row.
  Matrix features(const Matrix& y) const;
  Matrix head_output(int task, const Matrix& q) const;
  std::vector<Matrix> forward(const Matrix& y) const;
};

MultiTaskNet make_net(const NetDims& dims, std::uint64_t seed);

struct NonlinearDataset {
  Matrix y;               // count×20
  std::vector<Matrix> x;  // tasks blocks of count×3
  Matrix z;               // count×8 latent, kept for diagnostics
  std::uint64_t seed = 0;

  long count() const { return y.rows(); }
};

// The three users' target functions evaluated on latent rows.
std::vector<Matrix> nonlinear_targets(const Matrix& z);

NonlinearDataset synth_nonlinear_dataset(long count, std::uint64_t seed);

// Row-range split; both halves share the dataset's mixing matrix.
std::pair<NonlinearDataset, NonlinearDataset> split_dataset(
    const NonlinearDataset& data, long head_count);

struct TrainOptions {
  int epochs = 2000;
  int batch = 128;
  double learn_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-sample loss, summed over tasks
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history(std::move(history)) {}
  std::vector<double> history;
};

// Gradients in the same shapes as the parameters; loss is the mean over the
// batch of the per-sample squared error summed over all tasks.
struct NetGradients {
  LinearLayer trunk1;
  LinearLayer trunk2;
  std::vector<MultiTaskNet::Head> heads;
};

std::pair<double, NetGradients> loss_and_gradients(
    const MultiTaskNet& net, const Matrix& y, const std::vector<Matrix>& x);

// Adam on minibatches with a seed-deterministic shuffle.
TrainLog train(MultiTaskNet& net, const NonlinearDataset& data,
               const TrainOptions& opts);

double network_test_mse(const MultiTaskNet& net, const NonlinearDataset& data);

struct FeatureStats {
  Vector mean;       // mu_q
  Matrix cov;        // Sigma_q
  Matrix whitener;   // Sigma_q^{-1/2}, spectrum floored at 1e-8 * max eig
  Matrix sqrt_cov;   // Sigma_q^{1/2}
};

FeatureStats feature_stats(const MultiTaskNet& net,
                           const NonlinearDataset& data);

// Weight matrix of each head's first (linear) layer.
std::vector<Matrix> linearize_heads(const MultiTaskNet& net);

// Linear encoder over whitened features: basis from the right singular
// vectors of the stacked A_n Sigma_q^{1/2}, energies from allocate_energy on
// the importances ||A_n Sigma_q^{1/2} p_d||^2.
Encoder feature_encoder(const std::vector<Matrix>& head_maps,
                        const FeatureStats& stats, const ChannelSet& channels);

// Full transmission chain on a test set: whiten features, encode, add
// channel noise, MMSE-estimate the features, reconstruct each head input and
// finish the inference. noise_draws independent channel uses per sample.
EvalReport end_to_end_eval(const MultiTaskNet& net, const Matrix& encoder,
                           const FeatureStats& stats,
                           const ChannelSet& channels,
                           const NonlinearDataset& testset, int noise_draws,
                           std::uint64_t seed, std::string method = "proposed");

}  // namespace taskcomm
