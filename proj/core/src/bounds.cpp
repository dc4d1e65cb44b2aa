#include "thzsb/bounds.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "thzsb/numerics.hpp"

namespace thzsb {

void CrlbInputs::validate() const {
  std::string problems;
  auto complain = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  const Eigen::Index k = s.cols();
  if (s.rows() < 1 || k < 1) complain("s must be a nonempty N_BS x K_U matrix");
  if (s.rows() < k) complain("s must have at least as many rows as columns");
  if (sigma_sv.size() != k) complain("sigma_sv length must match the columns of s");
  if (t.rows() != k || t.cols() != k) complain("t must be square K_U x K_U");
  if (s.rows() >= k && k >= 1) {
    const double defect =
        (s.adjoint() * s - ComplexMatrix::Identity(k, k)).norm();
    if (!(defect < 1e-8 * static_cast<double>(k))) {
      complain("s columns must be orthonormal");
    }
  }
  if (t.rows() == k && t.cols() == k && k >= 1) {
    const double defect =
        (t.adjoint() * t - ComplexMatrix::Identity(k, k)).norm();
    if (!(defect < 1e-10 * static_cast<double>(k))) {
      complain("t must be unitary within 1e-10");
    }
  }
  for (Eigen::Index i = 0; i + 1 < sigma_sv.size(); ++i) {
    if (sigma_sv(i) < sigma_sv(i + 1)) {
      complain("sigma_sv must be descending");
      break;
    }
  }
  if (sigma_sv.size() > 0 && sigma_sv(sigma_sv.size() - 1) < 0.0) {
    complain("sigma_sv must be nonnegative");
  }
  if (!(p_p > 0.0)) complain("p_p must be > 0");
  if (tau_p < 1) complain("tau_p must be >= 1");
  if (sigma2 < 0.0) complain("sigma2 must be >= 0");
  if (!problems.empty()) throw ContractError("crlb inputs: " + problems);
}

ComplexMatrix constraint_jacobian(const ComplexMatrix& t) {
  if (t.rows() != t.cols() || t.rows() < 1) {
    throw ContractError("constraint_jacobian: t must be square and nonempty");
  }
  const Eigen::Index k = t.rows();
  const Eigen::Index kk = k * k;
  ComplexMatrix j = ComplexMatrix::Zero(kk, 2 * kk);
  for (Eigen::Index p = 0; p < k; ++p) {
    for (Eigen::Index q = 0; q < k; ++q) {
      const Eigen::Index row = p * k + q;
      j.block(row, q * k, 1, k) = t.col(p).adjoint();
      j.block(row, kk + p * k, 1, k) = t.col(q).transpose();
    }
  }
  return j;
}

ComplexMatrix null_space_basis(const ComplexMatrix& j) {
  if (j.rows() < 1 || j.cols() != 2 * j.rows()) {
    throw ContractError("null_space_basis: j must be K_U^2 x 2 K_U^2");
  }
  RealVector values;
  ComplexMatrix v;
  if (j.rows() <= 32) {
    Eigen::JacobiSVD<ComplexMatrix> dec(j, Eigen::ComputeFullV);
    values = dec.singularValues();
    v = dec.matrixV();
  } else {
    Eigen::BDCSVD<ComplexMatrix> dec(j, Eigen::ComputeFullV);
    values = dec.singularValues();
    v = dec.matrixV();
  }
  const double smin = values(values.size() - 1);
  const double smax = values(0);
  if (!(smin > 1e-10 * smax) || smax == 0.0) {
    throw NumericalError("null_space_basis: constraints are degenerate",
                         smax > 0.0 ? smin / smax : 0.0);
  }
  return v.rightCols(j.rows());
}

ComplexMatrix closed_form_null_basis(const ComplexMatrix& t) {
  if (t.rows() != t.cols() || t.rows() < 1) {
    throw ContractError("closed_form_null_basis: t must be square and nonempty");
  }
  const Eigen::Index k = t.rows();
  const Eigen::Index kk = k * k;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ComplexMatrix b = ComplexMatrix::Zero(2 * kk, kk);
  for (Eigen::Index p = 0; p < k; ++p) {
    for (Eigen::Index q = 0; q < k; ++q) {
      const Eigen::Index col = p * k + q;
      b.block(q * k, col, k, 1) = inv_sqrt2 * t.col(p);
      b.block(kk + p * k, col, k, 1) = -inv_sqrt2 * t.col(q).conjugate();
    }
  }
  return b;
}

CrlbResult ccrlb(const CrlbInputs& inputs) {
  inputs.validate();
  const Eigen::Index n_bs = inputs.s.rows();
  const Eigen::Index k = inputs.s.cols();
  const Eigen::Index kk = k * k;
  if (!(inputs.sigma_sv(k - 1) > 0.0)) {
    throw ContractError(
        "ccrlb: zero singular value makes the weight singular, "
        "rank-deficient channels are unsupported");
  }

  CrlbResult out;
  if (inputs.sigma2 == 0.0) {
    out.c_h = ComplexMatrix::Zero(n_bs * k, n_bs * k);
    out.per_element = RealMatrix::Zero(n_bs, k);
    out.total_mse_bound = 0.0;
    return out;
  }

  // Fisher information of the stacked parameter: column block j of vec(t)
  // carries sigma_j^2, repeated for the conjugate half.
  const double fim_scale =
      static_cast<double>(inputs.tau_p) * inputs.p_p / inputs.sigma2;
  ComplexVector c_xi(2 * kk);
  for (Eigen::Index half = 0; half < 2; ++half) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double w = fim_scale * inputs.sigma_sv(j) * inputs.sigma_sv(j);
      c_xi.segment(half * kk + j * k, k).setConstant(Complex(w, 0.0));
    }
  }

  const ComplexMatrix b = null_space_basis(constraint_jacobian(inputs.t));
  const ComplexMatrix gram = b.adjoint() * c_xi.asDiagonal() * b;
  const ComplexMatrix inv = solve_hpd(gram, ComplexMatrix::Identity(kk, kk));
  const ComplexMatrix b_top = b.topRows(kk);
  // Upper-left block of B (B^H C_xi B)^-1 B^H; the channel map acts on the
  // conjugate half, whose block is its elementwise conjugate.
  const ComplexMatrix c_t11 = b_top * inv * b_top.adjoint();

  ComplexMatrix upsilon = ComplexMatrix::Zero(n_bs * k, kk);
  for (Eigen::Index m = 0; m < n_bs; ++m) {
    for (Eigen::Index nu = 0; nu < k; ++nu) {
      const Complex val = inputs.s(m, nu) * inputs.sigma_sv(nu);
      for (Eigen::Index l = 0; l < k; ++l) {
        upsilon(m * k + l, nu * k + l) = val;
      }
    }
  }
  out.c_h = upsilon * c_t11.conjugate() * upsilon.adjoint();

  RealMatrix weights(k, k);
  for (Eigen::Index nu = 0; nu < k; ++nu) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double s_nu = inputs.sigma_sv(nu) * inputs.sigma_sv(nu);
      const double s_j = inputs.sigma_sv(j) * inputs.sigma_sv(j);
      weights(nu, j) = s_nu / (s_j + s_nu);
    }
  }
  out.per_element =
      (inputs.sigma2 / (static_cast<double>(inputs.tau_p) * inputs.p_p)) *
      (inputs.s.cwiseAbs2() * weights * inputs.t.cwiseAbs2().transpose());
  out.total_mse_bound = out.per_element.sum();
  return out;
}

double ml_mse(double sigma2, int k_u, int n_bs, double p_p, int tau_p) {
  if (k_u < 1 || n_bs < 1 || tau_p < 1 || !(p_p > 0.0) || sigma2 < 0.0) {
    throw ContractError("ml_mse: needs k_u, n_bs, tau_p >= 1, p_p > 0, sigma2 >= 0");
  }
  return sigma2 * k_u * n_bs / (p_p * tau_p);
}

double wd_sb_gain_db(int n_bs, int k_u) {
  if (n_bs < 1 || k_u < 1) {
    throw ContractError("wd_sb_gain_db: n_bs and k_u must be >= 1");
  }
  return 10.0 * std::log10(2.0 * n_bs / static_cast<double>(k_u));
}

}  // namespace thzsb
