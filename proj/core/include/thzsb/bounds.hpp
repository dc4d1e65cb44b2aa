#pragma once

#include "thzsb/types.hpp"

namespace thzsb {

// Inputs to the constrained bound. The channel factors as
// h = s * diag(sigma_sv) * t^H with orthonormal s columns, nonnegative
// descending singular values and unitary t.
struct CrlbInputs {
  ComplexMatrix s;
  RealVector sigma_sv;
  ComplexMatrix t;
  double p_p = 1.0;
  int tau_p = 1;
  double sigma2 = 1.0;

  void validate() const;
};

struct CrlbResult {
  // Bound matrix over the antenna-major channel vector: index m * k_u + l
  // corresponds to channel entry (m, l).
  ComplexMatrix c_h;
  RealMatrix per_element;
  double total_mse_bound = 0.0;
};

// Jacobian of the k_u^2 unitarity constraints t_p^H t_q = delta_pq with
// respect to [vec(t); conj(vec(t))]. Row (p, q), enumerated row-major,
// carries t_p^H in column block q of the first half and t_q^T in column
// block p of the second half.
ComplexMatrix constraint_jacobian(const ComplexMatrix& t);

// Orthonormal basis of the null space of the constraint Jacobian, taken from
// its trailing right singular vectors. Throws NumericalError when the
// numerical rank of j falls short of its row count.
ComplexMatrix null_space_basis(const ComplexMatrix& j);

// Explicit null-space basis with columns (1/sqrt(2)) [e_q kron t_p;
// -e_p kron conj(t_q)], used as an independent cross-check of the numeric
// basis. Valid for any unitary t.
ComplexMatrix closed_form_null_basis(const ComplexMatrix& t);

CrlbResult ccrlb(const CrlbInputs& inputs);

// sigma2 * k_u * n_bs / (p_p * tau_p).
double ml_mse(double sigma2, int k_u, int n_bs, double p_p, int tau_p);

// 10 log10(2 n_bs / k_u).
double wd_sb_gain_db(int n_bs, int k_u);

}  // namespace thzsb
