#include "thzsb/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "thzsb/channel.hpp"
#include "thzsb/numerics.hpp"

namespace thzsb {

namespace {

// 2 * sum log2 |L_ii| of the Cholesky factor, i.e. log2 det of the matrix.
double log2_det_hpd(const ComplexMatrix& a, const char* who) {
  Eigen::LLT<ComplexMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(who) + ": matrix is not positive definite "
                         "(rank-deficient combiner)", 0.0);
  }
  const auto l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    acc += std::log2(l(i, i).real());
  }
  return 2.0 * acc;
}

}  // namespace

void SblConfig::validate() const {
  std::string problems;
  auto complain = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (s != 0 && s < 2) complain("s must be 0 (auto) or >= 2");
  if (!(sigma_a2 > 0.0)) complain("sigma_a2 must be > 0");
  if (max_em_iters < 1) complain("max_em_iters must be >= 1");
  if (!(rel_tol > 0.0)) complain("rel_tol must be > 0");
  if (!(gamma_floor > 0.0)) complain("gamma_floor must be > 0");
  if (!problems.empty()) throw ConfigError("sbl config: " + problems);
}

ComplexMatrix mmse_digital(const ComplexMatrix& h_hat, int k_u, double sigma_v2) {
  if (h_hat.cols() != k_u) {
    throw ContractError("mmse_digital: h_hat must have k_u columns");
  }
  if (sigma_v2 < 0.0) throw ContractError("mmse_digital: negative sigma_v2");
  if (!h_hat.allFinite()) throw ContractError("mmse_digital: h_hat must be finite");
  const ComplexMatrix gram =
      h_hat.adjoint() * h_hat +
      static_cast<double>(k_u) * sigma_v2 * ComplexMatrix::Identity(k_u, k_u);
  return solve_hpd(gram, ComplexMatrix(h_hat.adjoint())).adjoint();
}

AngularDictionary build_dictionary(int n_bs, int s) {
  if (n_bs < 1) throw ContractError("build_dictionary: n_bs must be >= 1");
  if (s < 2) throw ContractError("build_dictionary: s must be >= 2");
  AngularDictionary dict;
  dict.g_r.resize(n_bs, s);
  dict.angles.resize(s);
  for (int i = 0; i < s; ++i) {
    const double cos_phi = 2.0 * i / static_cast<double>(s) - 1.0;
    dict.angles(i) = std::acos(cos_phi);
    dict.g_r.col(i) = array_response(dict.angles(i), n_bs, 0.5);
  }
  return dict;
}

CombinerPair sbl_hybrid_combiner(const ComplexMatrix& w_mmse,
                                 const AngularDictionary& dict, int n_rf,
                                 const SblConfig& cfg) {
  cfg.validate();
  const Eigen::Index n_bs = dict.g_r.rows();
  const Eigen::Index s = dict.g_r.cols();
  const Eigen::Index k_u = w_mmse.cols();
  if (w_mmse.rows() != n_bs) {
    throw ContractError("sbl_hybrid_combiner: w_mmse rows must match the dictionary");
  }
  if (n_rf < 1 || n_rf > s) {
    throw ContractError("sbl_hybrid_combiner: need 1 <= n_rf <= dictionary size");
  }
  if (k_u < 1) throw ContractError("sbl_hybrid_combiner: w_mmse must be nonempty");

  const ComplexMatrix gram_g = dict.g_r.adjoint() * dict.g_r;
  const double inv_sa2 = 1.0 / cfg.sigma_a2;

  RealVector gamma = RealVector::Ones(s);
  ComplexMatrix posterior_mean;  // S x K_U
  CombinerPair out;
  out.gamma_trace.reserve(cfg.max_em_iters);

  for (int iter = 0; iter < cfg.max_em_iters; ++iter) {
    ComplexMatrix precision = inv_sa2 * gram_g;
    precision.diagonal() += gamma.cwiseInverse().cast<Complex>();
    const ComplexMatrix pi =
        solve_hpd(precision, ComplexMatrix::Identity(s, s));
    posterior_mean = inv_sa2 * pi * (dict.g_r.adjoint() * w_mmse);

    RealVector next(s);
    for (Eigen::Index i = 0; i < s; ++i) {
      next(i) = posterior_mean.row(i).squaredNorm() / static_cast<double>(k_u) +
                pi(i, i).real();
    }
    if (next.maxCoeff() < cfg.gamma_floor) {
      throw NumericalError("sbl_hybrid_combiner: all hyperparameters collapsed",
                           next.maxCoeff());
    }
    double rel_change = 0.0;
    for (Eigen::Index i = 0; i < s; ++i) {
      rel_change = std::max(rel_change, std::abs(next(i) - gamma(i)) /
                                            std::max(gamma(i), cfg.gamma_floor));
    }
    gamma = next;
    out.gamma_trace.push_back(gamma);
    if (rel_change < cfg.rel_tol) break;
  }

  std::vector<int> order(s);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&gamma](int a, int b) {
    if (gamma(a) != gamma(b)) return gamma(a) > gamma(b);
    return a < b;
  });
  out.selected_indices.assign(order.begin(), order.begin() + n_rf);
  std::sort(out.selected_indices.begin(), out.selected_indices.end());

  out.w_rf.resize(n_bs, n_rf);
  for (int c = 0; c < n_rf; ++c) {
    out.w_rf.col(c) = dict.g_r.col(out.selected_indices[c]);
  }
  // Selection alone does not minimize the fit on the chosen support; one
  // least-squares refit does.
  out.w_bb = out.w_rf.colPivHouseholderQr().solve(w_mmse);
  return out;
}

double spectral_efficiency(const ComplexMatrix& h, const ComplexMatrix& w_rf,
                           const ComplexMatrix& w_bb, double sigma_v2, int k_u) {
  if (h.cols() != k_u) {
    throw ContractError("spectral_efficiency: h must have k_u columns");
  }
  if (w_rf.cols() != w_bb.rows() || w_rf.rows() != h.rows()) {
    throw ContractError("spectral_efficiency: combiner shapes do not chain");
  }
  if (!(sigma_v2 > 0.0)) {
    throw ContractError("spectral_efficiency: sigma_v2 must be > 0");
  }
  const ComplexMatrix j = w_rf * w_bb;  // n_bs x k_u
  const ComplexMatrix r_n = j.adjoint() * j;
  const ComplexMatrix jh = j.adjoint() * h;
  const ComplexMatrix shifted =
      r_n + (1.0 / (sigma_v2 * static_cast<double>(k_u))) * (jh * jh.adjoint());
  // log2 det(I + R^-1 A) = log2 det(R + A) - log2 det(R)
  const double log_rn = log2_det_hpd(r_n, "spectral_efficiency");
  const double log_shifted = log2_det_hpd(shifted, "spectral_efficiency");
  return log_shifted - log_rn;
}

}  // namespace thzsb
