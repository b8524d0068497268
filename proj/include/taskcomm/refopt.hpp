#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "taskcomm/model.hpp"

namespace taskcomm {

// Globally optimal reference for the encoder design problem, obtained by
// projected gradient descent on the convex objective in R = G^T G over the
// PSD trace ball {R >= 0, Tr(R) <= E}.
struct ReferenceSolution {
  Matrix gram;                  // optimal R
  Matrix encoder;               // G with G^T G = R, active rows only
  double objective = 0.0;       // excess sum MSE at R
  std::vector<double> history;  // objective per accepted iterate
  bool converged = false;
  int iterations = 0;
};

struct SolveOptions {
  int max_iter = 20000;
  double tol = 1e-10;          // relative decrease threshold
  double initial_step = 1.0;   // Armijo backtracking start
  std::optional<Matrix> start; // defaults to (E / D) I
};

// Objective sum_n h_n^-2 Tr(M_n (R + h_n^-2 I)^-1) and its (symmetric)
// gradient at R.
std::pair<double, Matrix> objective_and_gradient(const Matrix& r,
                                                 const GaussianStats& stats,
                                                 const ChannelSet& channels);
double reference_objective(const Matrix& r, const GaussianStats& stats,
                           const ChannelSet& channels);

// Euclidean projection onto {R >= 0, Tr(R) <= energy}: clamp the spectrum at
// zero, then shift it down uniformly if the trace still exceeds the budget.
Matrix project_psd_trace(const Matrix& s, double energy);

// Keeps eigenvalues above 1e-12 and returns G = Lambda^{1/2} U^T on them.
Matrix factor_encoder(const Matrix& r);

ReferenceSolution solve_reference(const GaussianStats& stats,
                                  const ChannelSet& channels,
                                  const SolveOptions& opts = {});

}  // namespace taskcomm
