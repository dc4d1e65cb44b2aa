#include "thzsb/numerics.hpp"

#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include <doctest.h>

using namespace thzsb;

namespace {

ComplexMatrix random_matrix(SeededRng& rng, Eigen::Index m, Eigen::Index n) {
  return complex_gaussian(rng, m, n, 1.0);
}

// tau x k block of a tau-point DFT, scaled so columns have squared norm
// power * tau. Mirrors the pilot construction without depending on it.
ComplexMatrix dft_block(Eigen::Index tau, Eigen::Index k, double power) {
  ComplexMatrix x(tau, k);
  const double amp = std::sqrt(power);
  for (Eigen::Index m = 0; m < tau; ++m) {
    for (Eigen::Index n = 0; n < k; ++n) {
      const double arg = -2.0 * std::numbers::pi * static_cast<double>(m * n) /
                         static_cast<double>(tau);
      x(m, n) = amp * Complex(std::cos(arg), std::sin(arg));
    }
  }
  return x;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("svd of the identity is the identity") {
  const ComplexMatrix eye = ComplexMatrix::Identity(3, 3);
  const SvdResult r = svd(eye);
  CHECK((r.u - eye).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((r.vh - eye).norm() == doctest::Approx(0.0).epsilon(1e-14));
  for (int i = 0; i < 3; ++i) CHECK(r.s(i) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd orders singular values of a diagonal matrix descending") {
  ComplexMatrix a = ComplexMatrix::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 3.0;
  a(2, 2) = 2.0;
  const SvdResult r = svd(a);
  CHECK(r.s(0) == doctest::Approx(3.0));
  CHECK(r.s(1) == doctest::Approx(2.0));
  CHECK(r.s(2) == doctest::Approx(1.0));
}

TEST_CASE("svd reconstructs a random 8x4 matrix") {
  SeededRng rng(7, 0);
  const ComplexMatrix a = random_matrix(rng, 8, 4);
  const SvdResult r = svd(a);
  const ComplexMatrix back = r.u * r.s.asDiagonal() * r.vh;
  CHECK((back - a).norm() / a.norm() < 1e-12);
}

TEST_CASE("svd phase convention pins the largest entry of each left vector") {
  SeededRng rng(11, 0);
  const ComplexMatrix a = random_matrix(rng, 6, 6);
  const SvdResult r = svd(a);
  for (Eigen::Index j = 0; j < r.u.cols(); ++j) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < r.u.rows(); ++i) {
      if (std::abs(r.u(i, j)) > best) {
        best = std::abs(r.u(i, j));
        imax = i;
      }
    }
    CHECK(r.u(imax, j).imag() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.u(imax, j).real() >= 0.0);
  }
  // Same input, same factors, bit for bit.
  const SvdResult again = svd(a);
  CHECK((r.u - again.u).norm() == 0.0);
  CHECK((r.vh - again.vh).norm() == 0.0);
}

TEST_CASE("svd rejects an empty matrix") {
  CHECK_THROWS_AS(svd(ComplexMatrix(0, 3)), ContractError);
}

TEST_CASE("hermitian_eig of a real diagonal returns it sorted") {
  ComplexMatrix a = ComplexMatrix::Zero(2, 2);
  a(0, 0) = -1.0;
  a(1, 1) = 5.0;
  const EigResult r = hermitian_eig(a);
  CHECK(r.values(0) == doctest::Approx(5.0));
  CHECK(r.values(1) == doctest::Approx(-1.0));
  CHECK(std::abs(r.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(r.vectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("hermitian_eig of a rank-deficient Gram matrix pads with zeros") {
  SeededRng rng(3, 0);
  const ComplexMatrix w = random_matrix(rng, 6, 2);
  const ComplexMatrix gram = w * w.adjoint();  // rank 2 in a 6x6 frame
  const EigResult r = hermitian_eig(gram);
  CHECK(r.values(0) > 0.0);
  CHECK(r.values(1) > 0.0);
  for (int i = 2; i < 6; ++i) CHECK(std::abs(r.values(i)) < 1e-10 * r.values(0));
  const ComplexMatrix back =
      r.vectors * r.values.asDiagonal() * r.vectors.adjoint();
  CHECK((back - gram).norm() / gram.norm() < 1e-12);
}

TEST_CASE("hermitian_eig rejects a visibly non-Hermitian matrix") {
  ComplexMatrix a = ComplexMatrix::Zero(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_eig(a), ContractError);
}

TEST_CASE("pinv of the scaled DFT pilot block matches the closed form") {
  const double power = 2.0;
  const Eigen::Index tau = 8, k = 3;
  const ComplexMatrix x = dft_block(tau, k, power);
  // x^H x = power * tau * I, so pinv(x^H) = x / (power * tau).
  const ComplexMatrix p = pinv(x.adjoint());
  CHECK((p - x / (power * static_cast<double>(tau))).norm() < 1e-12);
}

TEST_CASE("pinv of the identity is the identity, of zero is zero") {
  CHECK((pinv(ComplexMatrix::Identity(4, 4)) - ComplexMatrix::Identity(4, 4)).norm() < 1e-13);
  const ComplexMatrix z = pinv(ComplexMatrix::Zero(3, 5));
  CHECK(z.rows() == 5);
  CHECK(z.cols() == 3);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("solve_hpd with a = 2I halves the right-hand side") {
  const ComplexMatrix a = 2.0 * ComplexMatrix::Identity(4, 4);
  SeededRng rng(5, 0);
  const ComplexMatrix b = random_matrix(rng, 4, 2);
  const ComplexMatrix x = solve_hpd(a, b);
  CHECK((x - 0.5 * b).norm() < 1e-13);
}

TEST_CASE("solve_hpd reports the failing leading minor of an indefinite matrix") {
  ComplexMatrix a = ComplexMatrix::Identity(3, 3);
  a(1, 1) = -1.0;
  const ComplexMatrix b = ComplexMatrix::Ones(3, 1);
  try {
    solve_hpd(a, b);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.detail() == doctest::Approx(2.0));
  }
}

TEST_CASE("solve_hpd rejects a non-Hermitian matrix") {
  ComplexMatrix a = ComplexMatrix::Identity(2, 2);
  a(0, 1) = Complex(0.0, 1.0);  // missing the conjugate partner
  CHECK_THROWS_AS(solve_hpd(a, ComplexMatrix::Ones(2, 1)), ContractError);
}

TEST_CASE("identical seed and stream reproduce the sequence exactly") {
  SeededRng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng c(42, 4);
  int same = 0;
  SeededRng a2(42, 3);
  for (int i = 0; i < 1000; ++i) same += (a2.next_u64() == c.next_u64());
  CHECK(same < 5);
}

TEST_CASE("streams drawn on worker threads match the serial draws") {
  const std::uint64_t seed = 99;
  const int streams = 8, draws = 256;
  std::vector<std::vector<double>> serial(streams);
  for (int s = 0; s < streams; ++s) {
    SeededRng rng(seed, static_cast<std::uint64_t>(s));
    for (int i = 0; i < draws; ++i) serial[s].push_back(rng.gaussian());
  }
  std::vector<std::vector<double>> threaded(streams);
  std::vector<std::thread> pool;
  for (int s = 0; s < streams; ++s) {
    pool.emplace_back([&, s] {
      SeededRng rng(seed, static_cast<std::uint64_t>(s));
      for (int i = 0; i < draws; ++i) threaded[s].push_back(rng.gaussian());
    });
  }
  for (auto& t : pool) t.join();
  for (int s = 0; s < streams; ++s) CHECK(serial[s] == threaded[s]);
}

TEST_CASE("complex_gaussian is circularly symmetric with the requested variance") {
  SeededRng rng(2024, 0);
  const double variance = 4.0;
  const int n = 200000;
  double sum_re = 0, sum_im = 0, sum_sq = 0;
  Complex sum_pseudo = 0;  // E[z^2] should vanish for circular symmetry
  for (int i = 0; i < n; ++i) {
    const Complex z = rng.complex_gaussian(variance);
    sum_re += z.real();
    sum_im += z.imag();
    sum_sq += std::norm(z);
    sum_pseudo += z * z;
  }
  CHECK(std::abs(sum_re / n) < 0.02);
  CHECK(std::abs(sum_im / n) < 0.02);
  CHECK(sum_sq / n == doctest::Approx(variance).epsilon(0.02));
  CHECK(std::abs(sum_pseudo) / n < 0.05);
  CHECK(rng.complex_gaussian(0.0) == Complex(0.0, 0.0));
  CHECK_THROWS_AS(rng.complex_gaussian(-1.0), ContractError);
}

TEST_CASE("uniform_int covers its range without escaping it") {
  SeededRng rng(17, 0);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const int k = rng.uniform_int(5);
    REQUIRE(k >= 0);
    REQUIRE(k < 5);
    ++counts[k];
  }
  for (int k = 0; k < 5; ++k) CHECK(counts[k] > 8000);
}

TEST_CASE("property: svd reconstruction and orthonormality on random sizes") {
  SeededRng rng(314, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index m = 1 + rng.uniform_int(48);
    const Eigen::Index n = 1 + rng.uniform_int(48);
    const ComplexMatrix a = random_matrix(rng, m, n);
    const SvdResult r = svd(a);
    const Eigen::Index k = std::min(m, n);
    REQUIRE(r.u.cols() == k);
    REQUIRE(r.vh.rows() == k);
    CHECK((r.u * r.s.asDiagonal() * r.vh - a).norm() <= 1e-11 * std::max(1.0, a.norm()));
    CHECK((r.u.adjoint() * r.u - ComplexMatrix::Identity(k, k)).norm() < 1e-11);
    CHECK((r.vh * r.vh.adjoint() - ComplexMatrix::Identity(k, k)).norm() < 1e-11);
    for (Eigen::Index i = 0; i + 1 < k; ++i) CHECK(r.s(i) >= r.s(i + 1));
    CHECK(r.s(k - 1) >= 0.0);
  }
}

TEST_CASE("svd handles a 256-column matrix through the divide-and-conquer path") {
  SeededRng rng(555, 0);
  const ComplexMatrix a = random_matrix(rng, 256, 64);
  const SvdResult r = svd(a);
  CHECK((r.u * r.s.asDiagonal() * r.vh - a).norm() / a.norm() < 1e-11);
}

TEST_CASE("property: Penrose identities hold including rank-deficient input") {
  SeededRng rng(2718, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index m = 2 + rng.uniform_int(10);
    const Eigen::Index n = 2 + rng.uniform_int(10);
    const Eigen::Index r = 1 + rng.uniform_int(static_cast<int>(std::min(m, n)));
    const ComplexMatrix a = random_matrix(rng, m, r) * random_matrix(rng, r, n);
    const ComplexMatrix p = pinv(a);
    CHECK((a * p * a - a).norm() < 1e-9 * std::max(1.0, a.norm()));
    CHECK((p * a * p - p).norm() < 1e-9 * std::max(1.0, p.norm()));
    CHECK(((a * p).adjoint() - a * p).norm() < 1e-9);
    CHECK(((p * a).adjoint() - p * a).norm() < 1e-9);
  }
}

TEST_CASE("property: solve_hpd residuals stay tiny on random HPD systems") {
  SeededRng rng(161, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + rng.uniform_int(24);
    const ComplexMatrix m = random_matrix(rng, n, n);
    const ComplexMatrix a = m.adjoint() * m + ComplexMatrix::Identity(n, n);
    const ComplexMatrix b = random_matrix(rng, n, 3);
    const ComplexMatrix x = solve_hpd(a, b);
    CHECK((a * x - b).norm() <= 1e-10 * std::max(1.0, b.norm()));
  }
}

}  // TEST_SUITE
