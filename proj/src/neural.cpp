#include "taskcomm/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taskcomm/rng.hpp"

namespace taskcomm {

namespace {

enum Stream : std::uint64_t {
  kInitTrunk1 = 100,
  kInitTrunk2 = 101,
  kInitHeads = 128,  // + 2 * task
  kDataLatent = 200,
  kDataObsNoise = 201,
  kDataMixing = 202,
  kShuffle = 300,
  kEvalNoise = 400,  // + user
};

Matrix affine(const Matrix& rows, const LinearLayer& layer) {
  return (rows * layer.weight.transpose()).rowwise() +
         layer.bias.transpose();
}

LinearLayer glorot_layer(int out, int in, const CounterRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  LinearLayer layer;
  layer.weight.resize(out, in);
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) {
      const double u = rng.uniform(static_cast<std::uint64_t>(r) * in + c);
      layer.weight(r, c) = (2.0 * u - 1.0) * limit;
    }
  }
  layer.bias = Vector::Zero(out);
  return layer;
}

}  // namespace

Matrix MultiTaskNet::features(const Matrix& y) const {
  const Matrix h1 = affine(y, trunk1).array().tanh();
  return affine(h1, trunk2).array().tanh();
}

Matrix MultiTaskNet::head_output(int task, const Matrix& q) const {
  const Head& head = heads[static_cast<std::size_t>(task)];
  const Matrix g1 = affine(q, head.in).array().tanh();
  return affine(g1, head.out);
}

std::vector<Matrix> MultiTaskNet::forward(const Matrix& y) const {
  const Matrix q = features(y);
  std::vector<Matrix> outputs;
  outputs.reserve(heads.size());
  for (std::size_t n = 0; n < heads.size(); ++n) {
    outputs.push_back(head_output(static_cast<int>(n), q));
  }
  return outputs;
}

MultiTaskNet make_net(const NetDims& dims, std::uint64_t seed) {
  MultiTaskNet net;
  net.dims = dims;
  net.seed = seed;
  net.trunk1 = glorot_layer(dims.trunk_hidden, dims.input,
                            CounterRng(seed, kInitTrunk1));
  net.trunk2 = glorot_layer(dims.feature, dims.trunk_hidden,
                            CounterRng(seed, kInitTrunk2));
  net.heads.resize(static_cast<std::size_t>(dims.tasks));
  for (int n = 0; n < dims.tasks; ++n) {
    net.heads[static_cast<std::size_t>(n)].in =
        glorot_layer(dims.head_hidden, dims.feature,
                     CounterRng(seed, kInitHeads + 2 * static_cast<std::uint64_t>(n)));
    net.heads[static_cast<std::size_t>(n)].out =
        glorot_layer(dims.output, dims.head_hidden,
                     CounterRng(seed, kInitHeads + 2 * static_cast<std::uint64_t>(n) + 1));
  }
  return net;
}

std::vector<Matrix> nonlinear_targets(const Matrix& z) {
  const long count = z.rows();
  Matrix x1(count, 3), x2(count, 3), x3(count, 3);
  for (long i = 0; i < count; ++i) {
    const double z0 = z(i, 0), z1 = z(i, 1), z2 = z(i, 2), z3 = z(i, 3),
                 z4 = z(i, 4);
    const double relu_z1 = std::max(z1, 0.0);
    const double bump_z2 = std::exp(-z2 * z2);
    x1(i, 0) = 2.0 * std::sin(z0) + relu_z1 + 0.5 * bump_z2;
    x1(i, 1) = relu_z1 + 3.0 * bump_z2;
    x1(i, 2) = std::sin(z0) - bump_z2;
    x2(i, 0) = 0.3 * z4 * z4 + 2.0 * std::cos(z1);
    x2(i, 1) = -0.2 * relu_z1 + 3.0 * bump_z2;
    x2(i, 2) = std::sin(0.01 * z0) + std::atan(z3);
    x3(i, 0) = 2.0 * z1 + 0.1 * std::sin(z3);
    x3(i, 1) = 2.0 * std::sin(z0) - 0.05 * std::atan(z3) + std::abs(z1);
    x3(i, 2) = relu_z1;
  }
  return {x1, x2, x3};
}

NonlinearDataset synth_nonlinear_dataset(long count, std::uint64_t seed) {
  if (count < 1) {
    throw std::invalid_argument("synth_nonlinear_dataset: count must be >= 1");
  }
  constexpr int kLatent = 8;
  constexpr int kObs = 20;
  NonlinearDataset data;
  data.seed = seed;
  data.z = CounterRng(seed, kDataLatent).normal_matrix(count, kLatent);
  const Matrix v = CounterRng(seed, kDataObsNoise).normal_matrix(count, kObs);
  const Matrix mixing =
      CounterRng(seed, kDataMixing).normal_matrix(kObs, kLatent);
  data.y = data.z * mixing.transpose() + v;
  data.x = nonlinear_targets(data.z);
  return data;
}

std::pair<NonlinearDataset, NonlinearDataset> split_dataset(
    const NonlinearDataset& data, long head_count) {
  if (head_count < 1 || head_count >= data.count()) {
    throw std::invalid_argument("split_dataset: head_count out of range");
  }
  const long tail_count = data.count() - head_count;
  NonlinearDataset head, tail;
  head.seed = tail.seed = data.seed;
  head.y = data.y.topRows(head_count);
  head.z = data.z.topRows(head_count);
  tail.y = data.y.bottomRows(tail_count);
  tail.z = data.z.bottomRows(tail_count);
  for (const Matrix& block : data.x) {
    head.x.push_back(block.topRows(head_count));
    tail.x.push_back(block.bottomRows(tail_count));
  }
  return {std::move(head), std::move(tail)};
}

std::pair<double, NetGradients> loss_and_gradients(
    const MultiTaskNet& net, const Matrix& y, const std::vector<Matrix>& x) {
  const long batch = y.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  // Forward with caches.
  const Matrix h1 = affine(y, net.trunk1).array().tanh();
  const Matrix q = affine(h1, net.trunk2).array().tanh();

  NetGradients grads;
  grads.heads.resize(net.heads.size());
  Matrix d_q = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (std::size_t n = 0; n < net.heads.size(); ++n) {
    const MultiTaskNet::Head& head = net.heads[n];
    const Matrix g1 = affine(q, head.in).array().tanh();
    const Matrix out = affine(g1, head.out);
    const Matrix diff = out - x[n];
    loss += diff.squaredNorm() * inv_batch;

    const Matrix d_out = 2.0 * inv_batch * diff;
    grads.heads[n].out.weight = d_out.transpose() * g1;
    grads.heads[n].out.bias = d_out.colwise().sum().transpose();
    const Matrix d_g1_pre =
        (d_out * head.out.weight).cwiseProduct((1.0 - g1.array().square()).matrix());
    grads.heads[n].in.weight = d_g1_pre.transpose() * q;
    grads.heads[n].in.bias = d_g1_pre.colwise().sum().transpose();
    d_q += d_g1_pre * head.in.weight;
  }

  const Matrix d_a2 =
      d_q.cwiseProduct((1.0 - q.array().square()).matrix());
  grads.trunk2.weight = d_a2.transpose() * h1;
  grads.trunk2.bias = d_a2.colwise().sum().transpose();
  const Matrix d_a1 = (d_a2 * net.trunk2.weight)
                          .cwiseProduct((1.0 - h1.array().square()).matrix());
  grads.trunk1.weight = d_a1.transpose() * y;
  grads.trunk1.bias = d_a1.colwise().sum().transpose();
  return {loss, std::move(grads)};
}

namespace {

// Adam state per parameter tensor.
struct Moments {
  Matrix m_w, v_w;
  Vector m_b, v_b;

  explicit Moments(const LinearLayer& layer)
      : m_w(Matrix::Zero(layer.weight.rows(), layer.weight.cols())),
        v_w(Matrix::Zero(layer.weight.rows(), layer.weight.cols())),
        m_b(Vector::Zero(layer.bias.size())),
        v_b(Vector::Zero(layer.bias.size())) {}
};

void adam_update(LinearLayer& layer, const LinearLayer& grad, Moments& mom,
                 const TrainOptions& opts, double bias1, double bias2) {
  const auto step = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = opts.beta1 * m + (1.0 - opts.beta1) * g;
    v = (opts.beta2 * v.array() + (1.0 - opts.beta2) * g.array().square())
            .matrix();
    const auto m_hat = m.array() / bias1;
    const auto v_hat = v.array() / bias2;
    param.array() -= opts.learn_rate * m_hat / (v_hat.sqrt() + opts.epsilon);
  };
  step(layer.weight, grad.weight, mom.m_w, mom.v_w);
  step(layer.bias, grad.bias, mom.m_b, mom.v_b);
}

std::vector<long> shuffled_indices(long count, const CounterRng& rng,
                                   std::uint64_t epoch) {
  std::vector<long> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), 0L);
  // Fisher-Yates driven by the counter stream.
  for (long i = count - 1; i > 0; --i) {
    const double u =
        rng.uniform(epoch * static_cast<std::uint64_t>(count) +
                    static_cast<std::uint64_t>(i));
    const long j = static_cast<long>(u * static_cast<double>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(std::min(j, i))]);
  }
  return idx;
}

}  // namespace

TrainLog train(MultiTaskNet& net, const NonlinearDataset& data,
               const TrainOptions& opts) {
  if (data.count() < 1) {
    throw std::invalid_argument("train: dataset is empty");
  }
  const long count = data.count();
  const long batch = std::min<long>(std::max(opts.batch, 1), count);
  const CounterRng shuffle_rng(opts.seed, kShuffle);

  Moments m_trunk1(net.trunk1), m_trunk2(net.trunk2);
  std::vector<std::pair<Moments, Moments>> m_heads;
  for (const auto& head : net.heads) {
    m_heads.emplace_back(Moments(head.in), Moments(head.out));
  }

  TrainLog log;
  long adam_step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const std::vector<long> order =
        shuffled_indices(count, shuffle_rng, static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    long batches = 0;
    for (long start = 0; start < count; start += batch) {
      const long size = std::min(batch, count - start);
      Matrix y(size, data.y.cols());
      std::vector<Matrix> x(net.heads.size());
      for (auto& block : x) block.resize(size, data.x[0].cols());
      for (long i = 0; i < size; ++i) {
        const long src = order[static_cast<std::size_t>(start + i)];
        y.row(i) = data.y.row(src);
        for (std::size_t n = 0; n < x.size(); ++n) {
          x[n].row(i) = data.x[n].row(src);
        }
      }

      auto [loss, grads] = loss_and_gradients(net, y, x);
      if (!std::isfinite(loss)) {
        throw TrainingError("train: loss diverged", log.epoch_loss);
      }
      epoch_loss += loss;
      ++batches;

      ++adam_step;
      const double bias1 = 1.0 - std::pow(opts.beta1, adam_step);
      const double bias2 = 1.0 - std::pow(opts.beta2, adam_step);
      adam_update(net.trunk1, grads.trunk1, m_trunk1, opts, bias1, bias2);
      adam_update(net.trunk2, grads.trunk2, m_trunk2, opts, bias1, bias2);
      for (std::size_t n = 0; n < net.heads.size(); ++n) {
        adam_update(net.heads[n].in, grads.heads[n].in, m_heads[n].first,
                    opts, bias1, bias2);
        adam_update(net.heads[n].out, grads.heads[n].out, m_heads[n].second,
                    opts, bias1, bias2);
      }
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return log;
}

double network_test_mse(const MultiTaskNet& net, const NonlinearDataset& data) {
  const std::vector<Matrix> outputs = net.forward(data.y);
  double total = 0.0;
  for (std::size_t n = 0; n < outputs.size(); ++n) {
    total += (outputs[n] - data.x[n]).squaredNorm();
  }
  return total / static_cast<double>(data.count());
}

FeatureStats feature_stats(const MultiTaskNet& net,
                           const NonlinearDataset& data) {
  const Matrix q = net.features(data.y);
  FeatureStats stats;
  stats.mean = q.colwise().mean().transpose();
  const Matrix centered = q.rowwise() - stats.mean.transpose();
  stats.cov = symmetrize(centered.transpose() * centered /
                         static_cast<double>(q.rows()));
  const double max_eig = symmetric_eigen(stats.cov).values(0);
  const double floor = 1e-8 * std::max(max_eig, 0.0);
  stats.whitener = symmetric_inv_sqrt(stats.cov, std::max(floor, 1e-300));
  stats.sqrt_cov = symmetric_sqrt(stats.cov, 0.0);
  return stats;
}

std::vector<Matrix> linearize_heads(const MultiTaskNet& net) {
  std::vector<Matrix> maps;
  maps.reserve(net.heads.size());
  for (const auto& head : net.heads) {
    maps.push_back(head.in.weight);
  }
  return maps;
}

Encoder feature_encoder(const std::vector<Matrix>& head_maps,
                        const FeatureStats& stats,
                        const ChannelSet& channels) {
  validate_channels(channels);
  if (static_cast<int>(head_maps.size()) != channels.num_users()) {
    throw std::invalid_argument("feature_encoder: heads/channels mismatch");
  }
  const Eigen::Index feature_dim = stats.sqrt_cov.rows();
  Eigen::Index stack_rows = 0;
  for (const Matrix& a : head_maps) stack_rows += a.rows();
  Matrix stack(stack_rows, feature_dim);
  Eigen::Index at = 0;
  std::vector<Matrix> linear_grams;
  linear_grams.reserve(head_maps.size());
  for (const Matrix& a : head_maps) {
    const Matrix scaled = a * stats.sqrt_cov;
    stack.middleRows(at, a.rows()) = scaled;
    at += a.rows();
    linear_grams.push_back(symmetrize(scaled.transpose() * scaled));
  }
  const Matrix basis = right_singular_basis(stack).basis;
  const Matrix table = importance_table(basis, linear_grams);

  Matrix pruned = table;
  const double c_max = table.size() ? table.maxCoeff() : 0.0;
  for (Eigen::Index d = 0; d < pruned.rows(); ++d) {
    if (table.row(d).maxCoeff() < 1e-12 * c_max) pruned.row(d).setZero();
  }
  const EnergyAllocation alloc = allocate_energy(pruned, channels);

  Encoder enc;
  enc.basis = basis;
  enc.energies = alloc.energies;
  enc.importance = table;
  enc.multiplier = alloc.beta;
  for (Eigen::Index d = 0; d < enc.energies.size(); ++d) {
    if (enc.energies(d) > 0.0) enc.active_dims.push_back(static_cast<int>(d));
  }
  return enc;
}

EvalReport end_to_end_eval(const MultiTaskNet& net, const Matrix& encoder,
                           const FeatureStats& stats,
                           const ChannelSet& channels,
                           const NonlinearDataset& testset, int noise_draws,
                           std::uint64_t seed, std::string method) {
  if (noise_draws < 1) {
    throw std::invalid_argument("end_to_end_eval: noise_draws must be >= 1");
  }
  validate_channels(channels);
  const int users = channels.num_users();
  const long count = testset.count();
  const Eigen::Index r = encoder.rows();

  const Matrix q = net.features(testset.y);
  const Matrix whitened =
      (q.rowwise() - stats.mean.transpose()) * stats.whitener;
  const Matrix sent = whitened * encoder.transpose();  // count×r

  const std::vector<Matrix> head_maps = linearize_heads(net);

  EvalReport report;
  report.method = std::move(method);
  report.energy = channels.energy;
  report.mode = EvalMode::kMonteCarlo;
  report.trials = static_cast<long>(noise_draws) * count;
  report.per_user_mse = Vector::Zero(users);
  report.std_error = Vector::Zero(users);
  report.mse_floor = Vector::Zero(users);

  // Per-user decode and reconstruction maps.
  std::vector<Matrix> estimators, reconstructs;
  std::vector<Vector> head_shifts;
  for (int n = 0; n < users; ++n) {
    const double gain = channels.gains(n);
    // MMSE estimate of the whitened features from r_n = h s + u.
    const Matrix channel_cov = gain * gain * (encoder * encoder.transpose()) +
                               Matrix::Identity(r, r);
    estimators.push_back(gain * encoder.transpose() *
                         channel_cov.llt().solve(Matrix::Identity(r, r)));
    reconstructs.push_back(head_maps[n] * stats.sqrt_cov);
    head_shifts.push_back(head_maps[n] * stats.mean +
                          net.heads[static_cast<std::size_t>(n)].in.bias);
  }

  Vector err_sum = Vector::Zero(users);
  Vector err_sq_sum = Vector::Zero(users);
  double total_sum = 0.0;
  double total_sq_sum = 0.0;
  Matrix draw_err(count, users);
  for (int t = 0; t < noise_draws; ++t) {
    for (int n = 0; n < users; ++n) {
      const CounterRng noise_rng(seed,
                                 kEvalNoise + static_cast<std::uint64_t>(n));
      const std::uint64_t offset = static_cast<std::uint64_t>(t) *
                                   static_cast<std::uint64_t>(count) *
                                   static_cast<std::uint64_t>(r);
      const Matrix noise = noise_rng.normal_matrix(count, r, offset);
      const Matrix received = channels.gains(n) * sent + noise;
      const Matrix est_features = received * estimators[n].transpose();
      const Matrix head_in =
          (est_features * reconstructs[n].transpose()).rowwise() +
          head_shifts[n].transpose();
      const Matrix g1 = head_in.array().tanh();
      const Matrix out = affine(g1, net.heads[static_cast<std::size_t>(n)].out);
      for (long i = 0; i < count; ++i) {
        draw_err(i, n) = (out.row(i) - testset.x[n].row(i)).squaredNorm();
      }
    }
    // One transmission serves every user, so per-sample totals carry the
    // cross-user correlation into the sum's standard error.
    for (long i = 0; i < count; ++i) {
      double sample_total = 0.0;
      for (int n = 0; n < users; ++n) {
        const double err = draw_err(i, n);
        err_sum(n) += err;
        err_sq_sum(n) += err * err;
        sample_total += err;
      }
      total_sum += sample_total;
      total_sq_sum += sample_total * sample_total;
    }
  }

  const double total = static_cast<double>(report.trials);
  const auto standard_error = [total](double sum, double sq_sum) {
    const double mean = sum / total;
    const double var =
        total > 1 ? std::max(0.0, (sq_sum - total * mean * mean) / (total - 1.0))
                  : 0.0;
    return std::sqrt(var / total);
  };
  for (int n = 0; n < users; ++n) {
    report.per_user_mse(n) = err_sum(n) / total;
    report.std_error(n) = standard_error(err_sum(n), err_sq_sum(n));
  }
  report.sum_mse = total_sum / total;
  report.sum_std_error = standard_error(total_sum, total_sq_sum);
  return report;
}

}  // namespace taskcomm
