#include "thzsb/estimators.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/LU>

namespace thzsb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_stacked_square(const RfCombiner& combiner, const char* who) {
  if (combiner.w_rf.rows() != combiner.w_rf.cols()) {
    throw ContractError(std::string(who) + ": requires the stacked square combiner");
  }
}

}  // namespace

void RalsConfig::validate(int k_u) const {
  std::string problems;
  auto complain = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (!(beta_u > 0.0)) complain("beta_u must be > 0");
  if (!(beta_v > 0.0)) complain("beta_v must be > 0");
  if (lambda_fading.size() != 0 && lambda_fading.size() != k_u) {
    complain("lambda_fading must be empty or length k_u");
  }
  for (Eigen::Index i = 0; i < lambda_fading.size(); ++i) {
    if (!(lambda_fading(i) > 0.0)) {
      complain("lambda_fading entries must be > 0");
      break;
    }
  }
  if (max_iters < 1) complain("max_iters must be >= 1");
  if (!(rel_tol > 0.0)) complain("rel_tol must be > 0");
  if (!problems.empty()) throw ConfigError("rals config: " + problems);
}

ChannelEstimate estimate_ml(const ReceivedFrame& frame, const PilotBlock& pilots,
                            const RfCombiner& combiner,
                            bool pseudo_inverse_combining) {
  const auto start = Clock::now();
  require_stacked_square(combiner, "estimate_ml");
  if (frame.y.rows() != combiner.w_rf.cols()) {
    throw ContractError("estimate_ml: frame rows do not match the combiner");
  }
  if (frame.y.cols() != pilots.x_p.rows()) {
    throw ContractError("estimate_ml: frame columns do not match tau_p");
  }
  const double tau_p = static_cast<double>(pilots.x_p.rows());
  const ComplexMatrix left = pseudo_inverse_combining
                                 ? pinv(ComplexMatrix(combiner.w_rf.adjoint()))
                                 : combiner.w_rf;
  ChannelEstimate out;
  out.method = EstimatorKind::Ml;
  out.h_hat = left * frame.y * pilots.x_p / (pilots.p_p * tau_p);
  out.iterations = 0;
  out.converged = true;
  out.elapsed_seconds = seconds_since(start);
  return out;
}

std::pair<ChannelEstimate, ComplexMatrix> estimate_rals_sb(
    const ReceivedFrame& y_joint, const PilotBlock& pilots,
    const RfCombiner& combiner, const RalsConfig& cfg, SeededRng& rng) {
  const auto start = Clock::now();
  require_stacked_square(combiner, "estimate_rals_sb");
  const Eigen::Index n_bs = combiner.w_rf.rows();
  const Eigen::Index tau_p = pilots.x_p.rows();
  const Eigen::Index k_u = pilots.x_p.cols();
  const Eigen::Index tau_c = y_joint.y.cols();
  if (y_joint.y.rows() != n_bs) {
    throw ContractError("estimate_rals_sb: frame rows do not match the combiner");
  }
  if (tau_c <= tau_p) {
    throw ContractError("estimate_rals_sb: joint block must append data after the pilots");
  }
  cfg.validate(static_cast<int>(k_u));

  RealVector lambda = cfg.lambda_fading;
  if (lambda.size() == 0) lambda = RealVector::Ones(k_u);

  // Everything below lives in antenna space: with the stacked square combiner
  // the ridge LS problems on W_RF^H U are exactly the ones on U against the
  // recombined observations.
  const ComplexMatrix y_a = combiner.w_rf * y_joint.y;

  ComplexMatrix u = complex_gaussian(rng, n_bs, k_u, 1.0);
  ComplexMatrix v = complex_gaussian(rng, k_u, tau_c, 1.0);
  v.leftCols(tau_p) = pilots.x_p.adjoint();

  ChannelEstimate est;
  est.method = EstimatorKind::RalsSb;
  est.converged = false;
  est.objective_trace.reserve(2 * cfg.max_iters);

  // The objective is rebuilt from the explicit residual after each half-update.
  // The solve byproducts give it cheaper, but that form subtracts two nearly
  // equal energies and loses monotonicity to rounding once the fit reaches the
  // ridge floor.
  auto objective = [&]() {
    return (y_a - u * lambda.asDiagonal() * v).squaredNorm() +
           cfg.beta_u * u.squaredNorm() + cfg.beta_v * v.squaredNorm();
  };

  double prev_iter_objective = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // V half-update: columns share the normal matrix of A = U Lambda.
    {
      const ComplexMatrix a = u * lambda.asDiagonal();
      const ComplexMatrix gram =
          a.adjoint() * a + cfg.beta_v * ComplexMatrix::Identity(k_u, k_u);
      const ComplexMatrix rhs = a.adjoint() * y_a;
      v = solve_hpd(gram, rhs);
      est.objective_trace.push_back(objective());
    }
    // U half-update: rows share the normal matrix of B = Lambda V.
    {
      const ComplexMatrix b = lambda.asDiagonal() * v;
      const ComplexMatrix gram =
          b * b.adjoint() + cfg.beta_u * ComplexMatrix::Identity(k_u, k_u);
      const ComplexMatrix rhs = b * y_a.adjoint();
      u = ComplexMatrix(solve_hpd(gram, rhs)).adjoint();
      est.objective_trace.push_back(objective());
    }
    est.iterations = iter + 1;
    const double now = est.objective_trace.back();
    if (iter > 0) {
      const double denom = std::max(prev_iter_objective, 1e-300);
      if (std::abs(prev_iter_objective - now) / denom < cfg.rel_tol) {
        est.converged = true;
        prev_iter_objective = now;
        break;
      }
    }
    prev_iter_objective = now;
  }

  const ComplexMatrix gamma =
      v.leftCols(tau_p) * pilots.x_p / (pilots.p_p * static_cast<double>(tau_p));
  const SvdResult gamma_svd = svd(gamma);
  const double smin = gamma_svd.s(gamma_svd.s.size() - 1);
  const double cond = smin > 0.0 ? gamma_svd.s(0) / smin
                                 : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) {
    throw NumericalError("estimate_rals_sb: ambiguity resolution failed, "
                         "Gamma condition number too large",
                         cond);
  }

  est.h_hat = u * lambda.asDiagonal() * gamma;
  Eigen::PartialPivLU<ComplexMatrix> lu(gamma);
  const ComplexMatrix x_d_hat =
      lu.solve(ComplexMatrix(v.rightCols(tau_c - tau_p))).adjoint();
  est.elapsed_seconds = seconds_since(start);
  return {std::move(est), x_d_hat};
}

ChannelEstimate estimate_wd_sb(const ReceivedFrame& frame_p,
                               const ReceivedFrame& frame_d,
                               const PilotBlock& pilots,
                               const RfCombiner& combiner, const WdSbConfig& cfg,
                               const ComplexMatrix* true_h) {
  const auto start = Clock::now();
  require_stacked_square(combiner, "estimate_wd_sb");
  const Eigen::Index n_bs = combiner.w_rf.rows();
  const Eigen::Index k_u = pilots.x_p.cols();
  if (frame_p.y.rows() != n_bs || frame_d.y.rows() != n_bs) {
    throw ContractError("estimate_wd_sb: frame rows do not match the combiner");
  }
  if (frame_p.y.cols() != pilots.x_p.rows()) {
    throw ContractError("estimate_wd_sb: pilot frame columns do not match tau_p");
  }
  if (cfg.sigma2 < 0.0) throw ContractError("estimate_wd_sb: negative sigma2");
  if (!(cfg.p_d > 0.0)) throw ContractError("estimate_wd_sb: p_d must be positive");

  ChannelEstimate est;
  est.method = EstimatorKind::WdSb;
  est.iterations = 0;
  est.converged = true;

  ComplexMatrix w_hat;  // n_bs x k_u
  if (cfg.whitening == WhiteningMode::Perfect) {
    if (true_h == nullptr) {
      throw ContractError("estimate_wd_sb: perfect whitening needs true_h");
    }
    const SvdResult dec = svd(*true_h);
    w_hat = dec.u * dec.s.asDiagonal();
  } else {
    if (cfg.n_data < 1) throw ContractError("estimate_wd_sb: n_data must be >= 1");
    if (frame_d.y.cols() != cfg.n_data) {
      throw ContractError("estimate_wd_sb: data frame columns do not match n_data");
    }
    const double n = static_cast<double>(cfg.n_data);
    const ComplexMatrix recombined = combiner.w_rf * frame_d.y;
    const ComplexMatrix r_y = recombined * recombined.adjoint();
    const ComplexMatrix m =
        (r_y - n * cfg.sigma2 * ComplexMatrix::Identity(n_bs, n_bs)) / (n * cfg.p_d);
    const EigResult eig = hermitian_eig(m);
    // Positivity is judged against the numerical-rank floor: eigenvalues at
    // the rounding scale of the covariance subtraction carry no whitening
    // information and are zero-padded.
    const double eig_floor = 1e-12 * std::max(1.0, std::abs(eig.values(0)));
    int positive = 0;
    RealVector sigma_hat = RealVector::Zero(k_u);
    for (Eigen::Index i = 0; i < k_u; ++i) {
      if (eig.values(i) > eig_floor) {
        sigma_hat(i) = std::sqrt(eig.values(i));
        ++positive;
      }
    }
    if (positive < k_u) {
      est.warnings.push_back(
          "whitening rank deficient: " + std::to_string(positive) + " of " +
          std::to_string(k_u) + " positive eigenvalues, zero-padded");
    }
    w_hat = eig.vectors.leftCols(k_u) * sigma_hat.asDiagonal();
  }

  const ComplexMatrix cross =
      w_hat.adjoint() * (combiner.w_rf * frame_p.y) * pilots.x_p;  // k_u x k_u
  const SvdResult procrustes = svd(cross);
  const ComplexMatrix t_hat = procrustes.vh.adjoint() * procrustes.u.adjoint();
  est.h_hat = w_hat * t_hat.adjoint();
  est.elapsed_seconds = seconds_since(start);
  return est;
}

}  // namespace thzsb
