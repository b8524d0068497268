#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "taskcomm/design.hpp"
#include "taskcomm/model.hpp"

namespace taskcomm {

struct Decoder {
  Matrix map;  // task×r estimator applied to the received vector
  int user = 0;
};

enum class EvalMode { kAnalytic, kMonteCarlo };

struct EvalReport {
  std::string method;
  double energy = 0.0;
  EvalMode mode = EvalMode::kAnalytic;
  Vector per_user_mse;
  double sum_mse = 0.0;
  Vector mse_floor;   // noiseless MSE per user
  long trials = 0;    // Monte-Carlo only
  Vector std_error;   // Monte-Carlo only, per user
  // Standard error of sum_mse from the per-trial totals; users share the
  // transmitted signal, so their errors are correlated and this is not the
  // norm of the per-user errors.
  double sum_std_error = 0.0;

  // Channel-induced part of the MSE, above the noiseless floor.
  double excess(int user) const {
    return per_user_mse(user) - mse_floor(user);
  }
};

// MMSE estimator of x_n from r_n = h s + u: F = h cross_n G^T (h^2 GG^T + I)^-1.
Decoder mmse_decoder(const GaussianStats& stats, const Matrix& encoder,
                     double gain, int user);

// Closed-form per-user MSE for an arbitrary encoder matrix (rows×obs).
EvalReport analytic_mse(const GaussianStats& stats, const Matrix& encoder,
                        const ChannelSet& channels,
                        std::string method = "analytic");

// Monte-Carlo transceiver run: sample, whiten, encode, add channel noise,
// decode, accumulate squared error. Deterministic per seed.
EvalReport simulate(const LinearGroundTruth& model, const Matrix& encoder,
                    const ChannelSet& channels, long trials,
                    std::uint64_t seed, std::string method = "monte-carlo");

enum class TdmSplit { kEqual, kOptimized };

struct TdmBaseline {
  EvalReport report;
  std::vector<Encoder> user_encoders;
  Vector user_energy;
};

// Each user gets a private single-user design over its own energy share;
// the optimized split solves all users' water-filling problems under one
// shared multiplier.
TdmBaseline tdm_baseline(const GaussianStats& stats,
                         const ChannelSet& channels, TdmSplit split);

// G = sqrt(E / D_y) I: every whitened dimension transmitted at equal power.
EvalReport direct_broadcast(const GaussianStats& stats,
                            const ChannelSet& channels);

struct SweepRow {
  std::string method;
  double energy = 0.0;
  std::string user;  // "0".."N-1" or "sum"
  std::optional<double> mse_analytic;
  std::optional<double> mse_mc;
  std::optional<double> mc_se;
  std::uint64_t seed = 0;
};

struct SweepOptions {
  WeightMode weight_mode = WeightMode::kAuto;
  long mc_trials = 0;  // 0 disables the Monte-Carlo columns
  std::uint64_t seed = 0;
};

// Evaluates every (energy, method) cell. Known methods: proposed, reference,
// tdm-equal, tdm-opt, direct, svd, gram-schmidt, natural.
std::vector<SweepRow> energy_sweep(const LinearGroundTruth& model,
                                   const GaussianStats& stats,
                                   const ChannelSet& gains_template,
                                   const std::vector<double>& energies,
                                   const std::vector<std::string>& methods,
                                   const SweepOptions& opts);

std::vector<SweepRow> report_rows(const EvalReport& analytic,
                                  const EvalReport* monte_carlo,
                                  std::uint64_t seed);

// Fixed schema: method,E,user,mse_analytic,mse_mc,mc_se,seed.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace taskcomm
