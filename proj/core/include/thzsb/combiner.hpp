#pragma once

#include <vector>

#include "thzsb/types.hpp"

namespace thzsb {

// Angular grid of candidate analog beams; column s is the unit-norm array
// response at cos(phi_s) = 2 s / S - 1 for s = 0..S-1 (half-wavelength
// spacing).
struct AngularDictionary {
  ComplexMatrix g_r;
  RealVector angles;
};

struct CombinerPair {
  ComplexMatrix w_rf;                 // n_bs x n_rf, columns from the dictionary
  ComplexMatrix w_bb;                 // n_rf x k_u
  std::vector<int> selected_indices;  // distinct, ascending
  std::vector<RealVector> gamma_trace;
};

struct SblConfig {
  int s = 0;  // dictionary size; 0 means 2 * n_bs
  double sigma_a2 = 1.0;
  int max_em_iters = 200;
  double rel_tol = 1e-4;
  double gamma_floor = 1e-12;

  void validate() const;
};

// W = h_hat (h_hat^H h_hat + k_u sigma_v2 I)^-1, the regularized inverse
// combiner for k_u streams.
ComplexMatrix mmse_digital(const ComplexMatrix& h_hat, int k_u, double sigma_v2);

AngularDictionary build_dictionary(int n_bs, int s);

// Sparse Bayesian EM over the dictionary: selects n_rf atoms by largest
// hyperparameter and refits the baseband combiner by least squares so that
// w_rf * w_bb approximates w_mmse.
CombinerPair sbl_hybrid_combiner(const ComplexMatrix& w_mmse,
                                 const AngularDictionary& dict, int n_rf,
                                 const SblConfig& cfg);

// log2 det(I + (1 / (sigma_v2 k_u)) R_n^-1 J^H h h^H J) with J = w_rf w_bb
// and R_n = J^H J, evaluated through Cholesky log-determinants.
double spectral_efficiency(const ComplexMatrix& h, const ComplexMatrix& w_rf,
                           const ComplexMatrix& w_bb, double sigma_v2, int k_u);

}  // namespace thzsb
