#pragma once

#include <cstdint>

#include "thzsb/types.hpp"

namespace thzsb {

struct SvdResult {
  ComplexMatrix u;   // m x r, orthonormal columns
  RealVector s;      // r nonnegative singular values, descending
  ComplexMatrix vh;  // r x n
};

// Thin SVD with a fixed phase convention: each left singular vector is scaled
// so that its largest-magnitude entry (first such entry on ties) is real and
// nonnegative, and the matching row of vh is counter-rotated so u * S * vh is
// unchanged. Makes repeated factorizations of the same matrix bit-comparable.
SvdResult svd(const ComplexMatrix& a);

struct EigResult {
  RealVector values;     // descending
  ComplexMatrix vectors; // orthonormal columns aligned with `values`
};

// Eigendecomposition of a Hermitian matrix. The input is symmetrized as
// (a + a^H)/2 before factoring; asymmetry beyond 1e-8 relative to the matrix
// scale is a contract violation, not something to silently average away.
// Eigenvectors carry the same phase convention as svd().
EigResult hermitian_eig(const ComplexMatrix& a);

// Moore-Penrose pseudo-inverse via the SVD. Singular values at or below
// rcond * s_max count as zero; the zero matrix maps to a zero matrix.
ComplexMatrix pinv(const ComplexMatrix& a, double rcond = 1e-12);

// Solves a * x = b for Hermitian positive definite a by Cholesky. An
// indefinite or singular a raises NumericalError whose detail() is the
// 1-based index of the first non-positive-definite leading minor.
ComplexMatrix solve_hpd(const ComplexMatrix& a, const ComplexMatrix& b);

// Deterministic random stream: xoshiro256++ seeded from (seed, stream) via
// splitmix64. A given (seed, stream) pair yields the same sequence on every
// run and regardless of how work is split across threads, so Monte Carlo
// trials can each own a stream keyed by their indices. Gaussian variates use
// Box-Muller on the raw uniforms rather than <random> distributions, whose
// output differs between standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int n);                // {0, ..., n-1}, n >= 1
  double gaussian();                     // N(0, 1)
  Complex complex_gaussian(double variance);  // CN(0, variance)

 private:
  std::uint64_t s_[4];
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

// rows x cols matrix of i.i.d. CN(0, variance) entries, circularly symmetric
// with the variance split equally between real and imaginary parts. Entries
// are drawn in row-major order so the layout is part of the stream contract.
ComplexMatrix complex_gaussian(SeededRng& rng, Eigen::Index rows,
                               Eigen::Index cols, double variance);

}  // namespace thzsb
