#pragma once

#include <string>
#include <utility>
#include <vector>

#include "thzsb/numerics.hpp"
#include "thzsb/signal.hpp"
#include "thzsb/types.hpp"

namespace thzsb {

enum class EstimatorKind { Ml, RalsSb, WdSb };

struct ChannelEstimate {
  ComplexMatrix h_hat;  // n_bs x k_u
  EstimatorKind method = EstimatorKind::Ml;
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;  // one entry per half-update (RALS only)
  double elapsed_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct RalsConfig {
  double beta_u = 1.0;  // ridge on the left factor, nominally sigma_v^2
  double beta_v = 1.0;  // ridge on the right factor
  RealVector lambda_fading;  // diagonal of Lambda; empty means identity
  int max_iters = 100;
  double rel_tol = 1e-6;

  void validate(int k_u) const;
};

enum class WhiteningMode { Perfect, Estimated };

struct WdSbConfig {
  int n_data = 0;       // N, columns of the data frame
  double sigma2 = 0.0;  // noise variance, assumed known
  double p_d = 1.0;
  WhiteningMode whitening = WhiteningMode::Estimated;
};

// Pilot-only maximum-likelihood estimate: the recombined pilot observation
// hit with the pilot Gram inverse, h_hat = W_RF Y_p X_p / (p_p tau_p). The
// left factor follows the reference formula verbatim and is biased for a
// non-unitary random combiner; pseudo_inverse_combining = true swaps it for
// pinv(W_RF^H).
ChannelEstimate estimate_ml(const ReceivedFrame& frame, const PilotBlock& pilots,
                            const RfCombiner& combiner,
                            bool pseudo_inverse_combining = false);

// Regularized alternating least squares on the joint pilot+data block.
// y_joint holds [Y_p, Y_d]; the factorization W_RF y_joint ~ U Lambda V is
// alternated with exact ridge LS half-updates (each one the closed-form
// minimizer, so the recorded objective never increases), V's pilot columns
// are initialized to X_p^H, and the mixing ambiguity is resolved through
// Gamma = V_p X_p / (p_p tau_p). Returns the channel estimate and the jointly
// recovered data block X_d_hat (n x k_u). A Gamma with condition number above
// 1e12 raises NumericalError. Requires the stacked square combiner.
std::pair<ChannelEstimate, ComplexMatrix> estimate_rals_sb(
    const ReceivedFrame& y_joint, const PilotBlock& pilots,
    const RfCombiner& combiner, const RalsConfig& cfg, SeededRng& rng);

// Whitening-and-decorrelation estimator. The whitening factor W_hat comes
// from the blind data covariance (R_Y - N sigma2 I)/(N p_d), eigenvalues
// clamped at zero and the leading k_u pairs kept, or from the SVD of true_h
// in perfect mode (bound-validation instrument). The residual unitary factor
// is the orthogonal-Procrustes solution built from the pilot cross-term
// W_hat^H W_RF Y_p X_p, and h_hat = W_hat T_hat^H. Fewer than k_u positive
// eigenvalues leaves the missing components zero-padded and records a
// rank-deficiency warning. Requires the stacked square combiner.
ChannelEstimate estimate_wd_sb(const ReceivedFrame& frame_p,
                               const ReceivedFrame& frame_d,
                               const PilotBlock& pilots,
                               const RfCombiner& combiner, const WdSbConfig& cfg,
                               const ComplexMatrix* true_h = nullptr);

}  // namespace thzsb
