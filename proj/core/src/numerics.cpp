#include "thzsb/numerics.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace thzsb {

namespace {

// Rotates each column of `u` so its largest-magnitude entry is real
// nonnegative. `counter` (rows matched to u's columns) absorbs the inverse
// rotation; pass nullptr when there is nothing to preserve.
void apply_phase_convention(ComplexMatrix& u, ComplexMatrix* counter) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const double mag = std::abs(u(i, j));
      if (mag > best) {
        best = mag;
        imax = i;
      }
    }
    if (best <= 0.0) continue;
    const Complex pivot = u(imax, j);
    const Complex rot = std::conj(pivot) / std::abs(pivot);
    u.col(j) *= rot;
    u(imax, j) = Complex(std::abs(pivot), 0.0);  // kill residual imag round-off
    if (counter != nullptr) counter->row(j) *= std::conj(rot);
  }
}

double hermitian_defect(const ComplexMatrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Solver>
SvdResult finish_svd(const ComplexMatrix& a, const Solver& dec) {
  if (dec.info() != Eigen::Success) {
    const ComplexMatrix approx = dec.matrixU() *
                                 dec.singularValues().asDiagonal() *
                                 dec.matrixV().adjoint();
    const double residual = (a - approx).norm() / std::max(1.0, a.norm());
    throw NumericalError("svd: decomposition did not converge", residual);
  }
  SvdResult r;
  r.u = dec.matrixU();
  r.s = dec.singularValues();
  r.vh = dec.matrixV().adjoint();
  apply_phase_convention(r.u, &r.vh);
  return r;
}

}  // namespace

SvdResult svd(const ComplexMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw ContractError("svd: empty matrix");
  // Jacobi is the more accurate kernel but cubic with a large constant; BDC
  // takes over once the small dimension stops being small.
  if (std::min(a.rows(), a.cols()) <= 32) {
    Eigen::JacobiSVD<ComplexMatrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return finish_svd(a, dec);
  }
  Eigen::BDCSVD<ComplexMatrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return finish_svd(a, dec);
}

EigResult hermitian_eig(const ComplexMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw ContractError("hermitian_eig: empty matrix");
  if (a.rows() != a.cols()) throw ContractError("hermitian_eig: matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (hermitian_defect(a) > 1e-8 * scale) {
    throw ContractError("hermitian_eig: matrix is not Hermitian within 1e-8");
  }
  const ComplexMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> dec(sym);
  if (dec.info() != Eigen::Success) {
    throw NumericalError("hermitian_eig: iteration did not converge");
  }
  const Eigen::Index n = a.rows();
  EigResult r;
  r.values = dec.eigenvalues().reverse();  // ascending -> descending
  r.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) r.vectors.col(j) = dec.eigenvectors().col(n - 1 - j);
  apply_phase_convention(r.vectors, nullptr);
  return r;
}

ComplexMatrix pinv(const ComplexMatrix& a, double rcond) {
  if (rcond < 0.0) throw ContractError("pinv: rcond must be nonnegative");
  const SvdResult dec = svd(a);
  const double cutoff = rcond * dec.s(0);
  ComplexMatrix result = ComplexMatrix::Zero(a.cols(), a.rows());
  for (Eigen::Index k = 0; k < dec.s.size(); ++k) {
    if (dec.s(k) > cutoff && dec.s(k) > 0.0) {
      result += (1.0 / dec.s(k)) * dec.vh.row(k).adjoint() * dec.u.col(k).adjoint();
    }
  }
  return result;
}

ComplexMatrix solve_hpd(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != a.cols()) throw ContractError("solve_hpd: matrix is not square");
  if (a.rows() != b.rows()) throw ContractError("solve_hpd: rhs row count mismatch");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (hermitian_defect(a) > 1e-8 * scale) {
    throw ContractError("solve_hpd: matrix is not Hermitian within 1e-8");
  }
  const ComplexMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::LLT<ComplexMatrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    // Error path only: bisecting would obscure the index, so scan leading
    // minors until the first one that fails to factor.
    Eigen::Index minor = a.rows();
    for (Eigen::Index k = 1; k <= a.rows(); ++k) {
      Eigen::LLT<ComplexMatrix> probe(ComplexMatrix(sym.topLeftCorner(k, k)));
      if (probe.info() != Eigen::Success) {
        minor = k;
        break;
      }
    }
    throw NumericalError("solve_hpd: leading minor " + std::to_string(minor) +
                             " is not positive definite",
                         static_cast<double>(minor));
  }
  return llt.solve(b);
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream) {
  // Fold the stream id through splitmix64 before mixing so that streams
  // 0,1,2,... land far apart in the seeding space.
  std::uint64_t key = stream;
  const std::uint64_t stream_key = splitmix64(key);
  std::uint64_t chain = seed ^ stream_key;
  for (auto& word : s_) word = splitmix64(chain);
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is absorbing
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("SeededRng::uniform: lo > hi");
  return lo + (hi - lo) * uniform();
}

int SeededRng::uniform_int(int n) {
  if (n < 1) throw ContractError("SeededRng::uniform_int: n must be >= 1");
  const int k = static_cast<int>(uniform() * static_cast<double>(n));
  return k >= n ? n - 1 : k;
}

double SeededRng::gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));  // 1-u1 in (0,1], never log(0)
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_gaussian_ = r * std::sin(angle);
  has_cached_gaussian_ = true;
  return r * std::cos(angle);
}

Complex SeededRng::complex_gaussian(double variance) {
  if (variance < 0.0) throw ContractError("complex_gaussian: negative variance");
  const double s = std::sqrt(0.5 * variance);
  const double re = gaussian();
  const double im = gaussian();
  return Complex(s * re, s * im);
}

ComplexMatrix complex_gaussian(SeededRng& rng, Eigen::Index rows,
                               Eigen::Index cols, double variance) {
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.complex_gaussian(variance);
  }
  return m;
}

}  // namespace thzsb
