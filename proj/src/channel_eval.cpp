#include "taskcomm/channel_eval.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "taskcomm/refopt.hpp"
#include "taskcomm/rng.hpp"

namespace taskcomm {

namespace {

enum Stream : std::uint64_t {
  kSimLatent = 32,
  kSimObsNoise = 33,
  kSimChannelNoise = 64,  // + user index
};

double user_excess(const Matrix& gram_encoder, const Matrix& task_gram,
                   double gain) {
  const Eigen::Index obs = task_gram.rows();
  const double a = 1.0 / (gain * gain);
  const Matrix shifted = gram_encoder + a * Matrix::Identity(obs, obs);
  return a * shifted.llt().solve(task_gram).trace();
}

EvalReport analytic_from_gram(const GaussianStats& stats,
                              const Matrix& gram_encoder,
                              const ChannelSet& channels,
                              std::string method) {
  const int users = stats.num_users();
  EvalReport report;
  report.method = std::move(method);
  report.energy = channels.energy;
  report.mode = EvalMode::kAnalytic;
  report.per_user_mse.resize(users);
  report.mse_floor.resize(users);
  for (int n = 0; n < users; ++n) {
    report.mse_floor(n) = stats.noiseless_mse(n);
    report.per_user_mse(n) =
        report.mse_floor(n) +
        user_excess(gram_encoder, stats.gram[n], channels.gains(n));
  }
  report.sum_mse = report.per_user_mse.sum();
  return report;
}

}  // namespace

Decoder mmse_decoder(const GaussianStats& stats, const Matrix& encoder,
                     double gain, int user) {
  if (user < 0 || user >= stats.num_users()) {
    throw std::invalid_argument("mmse_decoder: user index out of range");
  }
  if (encoder.cols() != stats.obs_dim() && encoder.rows() != 0) {
    throw std::invalid_argument("mmse_decoder: encoder/stats shape mismatch");
  }
  const Eigen::Index r = encoder.rows();
  Decoder decoder;
  decoder.user = user;
  const Matrix channel_cov = gain * gain * (encoder * encoder.transpose()) +
                             Matrix::Identity(r, r);
  decoder.map = gain * stats.cross[user] * encoder.transpose() *
                channel_cov.llt().solve(Matrix::Identity(r, r));
  return decoder;
}

EvalReport analytic_mse(const GaussianStats& stats, const Matrix& encoder,
                        const ChannelSet& channels, std::string method) {
  validate_channels(channels);
  if (stats.num_users() != channels.num_users()) {
    throw std::invalid_argument("analytic_mse: stats/channels mismatch");
  }
  const Eigen::Index obs = stats.obs_dim();
  Matrix gram_encoder = Matrix::Zero(obs, obs);
  if (encoder.rows() > 0) {
    gram_encoder = symmetrize(encoder.transpose() * encoder);
  }
  return analytic_from_gram(stats, gram_encoder, channels, std::move(method));
}

EvalReport simulate(const LinearGroundTruth& model, const Matrix& encoder,
                    const ChannelSet& channels, long trials,
                    std::uint64_t seed, std::string method) {
  if (trials < 1) {
    throw std::invalid_argument("simulate: trials must be >= 1");
  }
  validate_channels(channels);
  const GaussianStats stats = stats_from_ground_truth(model);
  const int users = stats.num_users();
  const Eigen::Index r = encoder.rows();

  std::vector<Decoder> decoders;
  decoders.reserve(users);
  for (int n = 0; n < users; ++n) {
    decoders.push_back(mmse_decoder(stats, encoder, channels.gains(n), n));
  }

  const CounterRng latent_rng(seed, kSimLatent);
  const CounterRng obs_rng(seed, kSimObsNoise);
  Vector err_sum = Vector::Zero(users);
  Vector err_sq_sum = Vector::Zero(users);
  double total_sum = 0.0;
  double total_sq_sum = 0.0;

  constexpr long kBlock = 4096;
  const int latent = model.dims.latent;
  const int obs = model.dims.obs;
  Matrix block_err;
  for (long start = 0; start < trials; start += kBlock) {
    const long block = std::min(kBlock, trials - start);
    const std::uint64_t z_off =
        static_cast<std::uint64_t>(start) * static_cast<std::uint64_t>(latent);
    const std::uint64_t v_off =
        static_cast<std::uint64_t>(start) * static_cast<std::uint64_t>(obs);
    const Matrix z = latent_rng.normal_matrix(block, latent, z_off);
    const Matrix v = obs_rng.normal_matrix(block, obs, v_off);
    const Matrix y = z * model.mixing.transpose() + v;
    const Matrix sent = (stats.whitener * y.transpose()).transpose() *
                        encoder.transpose();  // block×r
    block_err.resize(block, users);
    for (int n = 0; n < users; ++n) {
      const CounterRng noise_rng(seed,
                                 kSimChannelNoise + static_cast<std::uint64_t>(n));
      const std::uint64_t u_off =
          static_cast<std::uint64_t>(start) * static_cast<std::uint64_t>(r);
      const Matrix noise = noise_rng.normal_matrix(block, r, u_off);
      const Matrix received = channels.gains(n) * sent + noise;
      const Matrix estimate = received * decoders[n].map.transpose();
      const Matrix target = z * model.task_maps[n].transpose();
      for (long i = 0; i < block; ++i) {
        block_err(i, n) = (estimate.row(i) - target.row(i)).squaredNorm();
      }
    }
    // Fixed trial order keeps the accumulation machine-deterministic. All
    // users decode the same transmission, so the per-trial total is tracked
    // directly rather than recombined from per-user moments.
    for (long i = 0; i < block; ++i) {
      double trial_total = 0.0;
      for (int n = 0; n < users; ++n) {
        const double err = block_err(i, n);
        err_sum(n) += err;
        err_sq_sum(n) += err * err;
        trial_total += err;
      }
      total_sum += trial_total;
      total_sq_sum += trial_total * trial_total;
    }
  }

  const auto standard_error = [trials](double sum, double sq_sum) {
    const double mean = sum / static_cast<double>(trials);
    const double var =
        trials > 1
            ? std::max(0.0, (sq_sum - static_cast<double>(trials) * mean * mean) /
                                static_cast<double>(trials - 1))
            : 0.0;
    return std::sqrt(var / static_cast<double>(trials));
  };

  EvalReport report;
  report.method = std::move(method);
  report.energy = channels.energy;
  report.mode = EvalMode::kMonteCarlo;
  report.trials = trials;
  report.per_user_mse = err_sum / static_cast<double>(trials);
  report.std_error.resize(users);
  for (int n = 0; n < users; ++n) {
    report.std_error(n) = standard_error(err_sum(n), err_sq_sum(n));
  }
  report.sum_mse = total_sum / static_cast<double>(trials);
  report.sum_std_error = standard_error(total_sum, total_sq_sum);
  report.mse_floor.resize(users);
  for (int n = 0; n < users; ++n) report.mse_floor(n) = stats.noiseless_mse(n);
  return report;
}

TdmBaseline tdm_baseline(const GaussianStats& stats,
                         const ChannelSet& channels, TdmSplit split) {
  validate_channels(channels);
  const int users = stats.num_users();
  const int obs = stats.obs_dim();
  TdmBaseline tdm;
  tdm.user_energy = Vector::Zero(users);
  tdm.user_encoders.reserve(users);

  if (split == TdmSplit::kEqual) {
    const double share = channels.energy / static_cast<double>(users);
    for (int n = 0; n < users; ++n) {
      tdm.user_encoders.push_back(
          single_user_encoder(stats.gram[n], channels.gains(n), share));
      tdm.user_energy(n) = tdm.user_encoders.back().total_energy();
    }
  } else {
    // One shared multiplier across all users' water-filling problems: stack
    // every user's eigen-spectrum as private dimensions of a joint
    // allocation (each row funds exactly one user).
    std::vector<SymmetricEigen> eigs;
    eigs.reserve(users);
    for (int n = 0; n < users; ++n) {
      eigs.push_back(symmetric_eigen(stats.gram[n]));
    }
    Matrix joint = Matrix::Zero(static_cast<Eigen::Index>(users) * obs, users);
    for (int n = 0; n < users; ++n) {
      for (int d = 0; d < obs; ++d) {
        joint(static_cast<Eigen::Index>(n) * obs + d, n) =
            std::max(eigs[n].values(d), 0.0);
      }
    }
    const EnergyAllocation alloc = allocate_energy(joint, channels);
    for (int n = 0; n < users; ++n) {
      Encoder enc;
      enc.basis = eigs[n].vectors;
      enc.energies = alloc.energies.segment(static_cast<Eigen::Index>(n) * obs, obs);
      enc.importance = eigs[n].values.cwiseMax(0.0);
      enc.multiplier = alloc.beta;
      for (int d = 0; d < obs; ++d) {
        if (enc.energies(d) > 0.0) enc.active_dims.push_back(d);
      }
      tdm.user_energy(n) = enc.total_energy();
      tdm.user_encoders.push_back(std::move(enc));
    }
  }

  EvalReport report;
  report.method = split == TdmSplit::kEqual ? "tdm-equal" : "tdm-opt";
  report.energy = channels.energy;
  report.mode = EvalMode::kAnalytic;
  report.per_user_mse.resize(users);
  report.mse_floor.resize(users);
  for (int n = 0; n < users; ++n) {
    const Matrix g = tdm.user_encoders[n].active_matrix();
    const Matrix gram_encoder =
        g.rows() > 0 ? Matrix(symmetrize(g.transpose() * g))
                     : Matrix(Matrix::Zero(obs, obs));
    report.mse_floor(n) = stats.noiseless_mse(n);
    report.per_user_mse(n) =
        report.mse_floor(n) +
        user_excess(gram_encoder, stats.gram[n], channels.gains(n));
  }
  report.sum_mse = report.per_user_mse.sum();
  tdm.report = std::move(report);
  return tdm;
}

EvalReport direct_broadcast(const GaussianStats& stats,
                            const ChannelSet& channels) {
  validate_channels(channels);
  const int obs = stats.obs_dim();
  const double eta = std::sqrt(channels.energy / static_cast<double>(obs));
  const Matrix encoder = eta * Matrix::Identity(obs, obs);
  return analytic_mse(stats, encoder, channels, "direct");
}

std::vector<SweepRow> report_rows(const EvalReport& analytic,
                                  const EvalReport* monte_carlo,
                                  std::uint64_t seed) {
  std::vector<SweepRow> rows;
  const int users = static_cast<int>(analytic.per_user_mse.size());
  for (int n = 0; n <= users; ++n) {
    SweepRow row;
    row.method = analytic.method;
    row.energy = analytic.energy;
    row.user = n < users ? std::to_string(n) : "sum";
    row.mse_analytic =
        n < users ? analytic.per_user_mse(n) : analytic.sum_mse;
    if (monte_carlo) {
      row.mse_mc =
          n < users ? monte_carlo->per_user_mse(n) : monte_carlo->sum_mse;
      row.mc_se = n < users ? monte_carlo->std_error(n)
                            : monte_carlo->sum_std_error;
    }
    row.seed = seed;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> energy_sweep(const LinearGroundTruth& model,
                                   const GaussianStats& stats,
                                   const ChannelSet& gains_template,
                                   const std::vector<double>& energies,
                                   const std::vector<std::string>& methods,
                                   const SweepOptions& opts) {
  if (energies.empty()) {
    throw std::invalid_argument("energy_sweep: need at least one energy");
  }
  std::vector<SweepRow> rows;
  for (const double energy : energies) {
    ChannelSet channels = gains_template;
    channels.energy = energy;
    for (const std::string& method : methods) {
      EvalReport analytic;
      Matrix encoder;  // shared-broadcast methods fill this for MC
      bool has_encoder = false;
      if (method == "proposed" || method == "svd" || method == "gram-schmidt" ||
          method == "natural") {
        const BasisMethod basis = method == "proposed"
                                      ? BasisMethod::kSvd
                                      : basis_method_from_string(method);
        const Encoder enc =
            multiuser_encoder(stats, channels, opts.weight_mode, basis);
        encoder = enc.active_matrix();
        has_encoder = true;
        analytic = analytic_mse(stats, encoder, channels, method);
      } else if (method == "reference") {
        const ReferenceSolution ref = solve_reference(stats, channels);
        encoder = ref.encoder;
        has_encoder = true;
        analytic = analytic_mse(stats, encoder, channels, method);
      } else if (method == "tdm-equal") {
        analytic = tdm_baseline(stats, channels, TdmSplit::kEqual).report;
      } else if (method == "tdm-opt") {
        analytic = tdm_baseline(stats, channels, TdmSplit::kOptimized).report;
      } else if (method == "direct") {
        analytic = direct_broadcast(stats, channels);
        encoder = std::sqrt(energy / stats.obs_dim()) *
                  Matrix::Identity(stats.obs_dim(), stats.obs_dim());
        has_encoder = true;
      } else {
        throw std::invalid_argument("energy_sweep: unknown method " + method);
      }

      if (opts.mc_trials > 0 && has_encoder) {
        const EvalReport mc = simulate(model, encoder, channels,
                                       opts.mc_trials, opts.seed, method);
        const auto cell = report_rows(analytic, &mc, opts.seed);
        rows.insert(rows.end(), cell.begin(), cell.end());
      } else {
        const auto cell = report_rows(analytic, nullptr, opts.seed);
        rows.insert(rows.end(), cell.begin(), cell.end());
      }
    }
  }
  return rows;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "method,E,user,mse_analytic,mse_mc,mc_se,seed\n";
  for (const SweepRow& row : rows) {
    out << row.method << ',' << format_double(row.energy) << ',' << row.user
        << ',';
    if (row.mse_analytic) out << format_double(*row.mse_analytic);
    out << ',';
    if (row.mse_mc) out << format_double(*row.mse_mc);
    out << ',';
    if (row.mc_se) out << format_double(*row.mc_se);
    out << ',' << row.seed << '\n';
  }
}

}  // namespace taskcomm
