#include "thzsb/bounds.hpp"

#include <cmath>
#include <complex>

#include <doctest.h>

#include "thzsb/channel.hpp"
#include "thzsb/estimators.hpp"
#include "thzsb/numerics.hpp"
#include "thzsb/signal.hpp"

using namespace thzsb;

namespace {

// Pinned 4x2 instance: S from two DFT columns, T an explicit U(2).
CrlbInputs pinned_inputs() {
  CrlbInputs in;
  in.s.resize(4, 2);
  for (int m = 0; m < 4; ++m) {
    for (int k = 0; k < 2; ++k) {
      in.s(m, k) = std::exp(Complex(0.0, -2.0 * M_PI * m * (k + 1) / 4.0)) / 2.0;
    }
  }
  const double th = 0.7, ph = 0.3, al = 0.25, be = -0.4;
  in.t.resize(2, 2);
  in.t(0, 0) = std::cos(th) * std::exp(Complex(0.0, al));
  in.t(0, 1) = std::sin(th) * std::exp(Complex(0.0, ph + be));
  in.t(1, 0) = -std::sin(th) * std::exp(Complex(0.0, al - ph));
  in.t(1, 1) = std::cos(th) * std::exp(Complex(0.0, be));
  in.sigma_sv.resize(2);
  in.sigma_sv << 1.5, 0.7;
  in.p_p = 1.3;
  in.tau_p = 5;
  in.sigma2 = 0.8;
  return in;
}

ComplexMatrix random_unitary(int k, SeededRng& rng) {
  return svd(complex_gaussian(rng, k, k, 1.0)).u;
}

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("pinned instance reproduces the frozen bound values") {
  const CrlbInputs in = pinned_inputs();
  const CrlbResult r = ccrlb(in);
  CHECK(r.total_mse_bound == doctest::Approx(2.4615384615384614e-01).epsilon(1e-12));
  CHECK(r.per_element(0, 0) == doctest::Approx(2.9089600384590547e-02).epsilon(1e-10));
  CHECK(r.per_element(3, 1) == doctest::Approx(3.2448861153870988e-02).epsilon(1e-10));
  CHECK(r.c_h.trace().real() == doctest::Approx(2.4615384615384614e-01).epsilon(1e-10));
  CHECK(std::abs(r.c_h.trace().imag()) < 1e-14);
  const EigResult eig = hermitian_eig(r.c_h);
  CHECK(eig.values(0) == doctest::Approx(1.0106681639528356e-01).epsilon(1e-9));
  CHECK(eig.values(eig.values.size() - 1) > -1e-9 * r.c_h.norm());

  // Two independent paths: the matrix-form diagonal and the weight formula.
  for (int m = 0; m < 4; ++m) {
    for (int l = 0; l < 2; ++l) {
      CHECK(r.c_h(m * 2 + l, m * 2 + l).real() ==
            doctest::Approx(r.per_element(m, l)).epsilon(1e-11));
    }
  }
  CHECK((r.c_h - r.c_h.adjoint()).norm() < 1e-12 * r.c_h.norm());
  CHECK(r.per_element.minCoeff() >= 0.0);
}

TEST_CASE("scalar constraint jacobian is [1, 1]") {
  ComplexMatrix t(1, 1);
  t(0, 0) = 1.0;
  const ComplexMatrix j = constraint_jacobian(t);
  REQUIRE(j.rows() == 1);
  REQUIRE(j.cols() == 2);
  CHECK(std::abs(j(0, 0) - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(j(0, 1) - Complex(1, 0)) < 1e-15);
}

TEST_CASE("property: jacobian and null basis satisfy their definitions") {
  for (int k = 1; k <= 4; ++k) {
    for (int trial = 0; trial < 25; ++trial) {
      SeededRng rng(200 + k, static_cast<std::uint64_t>(trial));
      const ComplexMatrix t = random_unitary(k, rng);
      const ComplexMatrix j = constraint_jacobian(t);
      REQUIRE(j.rows() == k * k);
      REQUIRE(j.cols() == 2 * k * k);

      const ComplexMatrix b = null_space_basis(j);
      REQUIRE(b.rows() == 2 * k * k);
      REQUIRE(b.cols() == k * k);
      CHECK((j * b).norm() < 1e-9);
      CHECK((b.adjoint() * b - ComplexMatrix::Identity(k * k, k * k)).norm() < 1e-10);

      const ComplexMatrix bc = closed_form_null_basis(t);
      CHECK((j * bc).norm() < 1e-12);
      CHECK((bc.adjoint() * bc - ComplexMatrix::Identity(k * k, k * k)).norm() < 1e-12);

      // Full row rank: the smallest singular value stays away from zero.
      const SvdResult dec = svd(j);
      CHECK(dec.s(dec.s.size() - 1) > 1e-6 * dec.s(0));
    }
  }
}

TEST_CASE("numeric and closed-form bases give the same constrained covariance") {
  for (int k = 1; k <= 3; ++k) {
    SeededRng rng(210, static_cast<std::uint64_t>(k));
    const ComplexMatrix t = random_unitary(k, rng);
    const ComplexMatrix j = constraint_jacobian(t);
    const ComplexMatrix b_num = null_space_basis(j);
    const ComplexMatrix b_closed = closed_form_null_basis(t);

    ComplexVector c_xi(2 * k * k);
    for (int half = 0; half < 2; ++half) {
      for (int col = 0; col < k; ++col) {
        c_xi.segment(half * k * k + col * k, k)
            .setConstant(Complex(1.0 + 0.5 * col, 0.0));
      }
    }
    auto covariance = [&](const ComplexMatrix& basis) {
      const ComplexMatrix gram = basis.adjoint() * c_xi.asDiagonal() * basis;
      return ComplexMatrix(basis * solve_hpd(gram, ComplexMatrix::Identity(k * k, k * k)) *
                           basis.adjoint());
    };
    CHECK((covariance(b_num) - covariance(b_closed)).norm() < 1e-8);
  }
}

TEST_CASE("closed-form basis diagonalizes the information with the paired pattern") {
  const CrlbInputs in = pinned_inputs();
  const ComplexMatrix bc = closed_form_null_basis(in.t);
  const double fim_scale = in.tau_p * in.p_p / in.sigma2;
  ComplexVector c_xi(8);
  for (int half = 0; half < 2; ++half) {
    for (int j = 0; j < 2; ++j) {
      c_xi.segment(half * 4 + j * 2, 2)
          .setConstant(Complex(fim_scale * in.sigma_sv(j) * in.sigma_sv(j), 0.0));
    }
  }
  const ComplexMatrix gram = bc.adjoint() * c_xi.asDiagonal() * bc;
  ComplexMatrix off = gram;
  off.diagonal().setZero();
  CHECK(off.norm() < 1e-12 * gram.norm());
  // diag = (tau_p p_p / (2 sigma2)) [2 s1^2, s1^2 + s2^2, s2^2 + s1^2, 2 s2^2]
  CHECK(gram(0, 0).real() == doctest::Approx(18.28125).epsilon(1e-12));
  CHECK(gram(1, 1).real() == doctest::Approx(11.13125).epsilon(1e-12));
  CHECK(gram(2, 2).real() == doctest::Approx(11.13125).epsilon(1e-12));
  CHECK(gram(3, 3).real() == doctest::Approx(3.98125).epsilon(1e-12));
}

TEST_CASE("total bound collapses to the closed form for any spectrum") {
  for (int trial = 0; trial < 20; ++trial) {
    SeededRng rng(220, static_cast<std::uint64_t>(trial));
    const int k = 1 + static_cast<int>(rng.uniform_int(4));
    const int n = k + static_cast<int>(rng.uniform_int(8));
    CrlbInputs in;
    in.s = svd(complex_gaussian(rng, n, k, 1.0)).u;
    in.t = random_unitary(k, rng);
    in.sigma_sv.resize(k);
    for (int i = 0; i < k; ++i) in.sigma_sv(i) = 0.2 + rng.uniform(0.0, 2.0);
    std::sort(in.sigma_sv.data(), in.sigma_sv.data() + k, std::greater<double>());
    in.p_p = 0.5 + rng.uniform(0.0, 2.0);
    in.tau_p = k + static_cast<int>(rng.uniform_int(6));
    in.sigma2 = 0.1 + rng.uniform(0.0, 1.5);
    const CrlbResult r = ccrlb(in);
    const double closed = in.sigma2 * k * k / (2.0 * in.tau_p * in.p_p);
    CHECK(r.total_mse_bound == doctest::Approx(closed).epsilon(1e-10));
    // never worse than the unconstrained estimate of the full channel
    CHECK(r.total_mse_bound <= ml_mse(in.sigma2, k, n, in.p_p, in.tau_p) + 1e-12);
  }
}

TEST_CASE("per-element bound ignores per-column phases of t") {
  SeededRng rng(230, 0);
  CrlbInputs in = pinned_inputs();
  const CrlbResult base = ccrlb(in);
  ComplexVector phases(2);
  phases << std::exp(Complex(0.0, 1.1)), std::exp(Complex(0.0, -2.3));
  in.t = in.t * phases.asDiagonal();
  const CrlbResult rotated = ccrlb(in);
  CHECK((base.per_element - rotated.per_element).norm() < 1e-12);
}

TEST_CASE("c_h is hermitian psd on a larger random instance") {
  SeededRng rng(240, 0);
  CrlbInputs in;
  in.s = svd(complex_gaussian(rng, 12, 3, 1.0)).u;
  in.t = random_unitary(3, rng);
  in.sigma_sv.resize(3);
  in.sigma_sv << 2.0, 1.0, 0.4;
  in.p_p = 1.0;
  in.tau_p = 6;
  in.sigma2 = 0.7;
  const CrlbResult r = ccrlb(in);
  CHECK((r.c_h - r.c_h.adjoint()).norm() < 1e-10 * r.c_h.norm());
  const EigResult eig = hermitian_eig(r.c_h);
  CHECK(eig.values(eig.values.size() - 1) >= -1e-9 * r.c_h.norm());
  for (int m = 0; m < 12; ++m) {
    for (int l = 0; l < 3; ++l) {
      CHECK(r.c_h(m * 3 + l, m * 3 + l).real() ==
            doctest::Approx(r.per_element(m, l)).epsilon(1e-9));
    }
  }
}

TEST_CASE("ml mse closed form and scaling") {
  CHECK(ml_mse(1.0, 4, 16, 1.0, 8) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(ml_mse(1.0, 4, 16, 1.0, 16) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(ml_mse(0.0, 4, 16, 1.0, 8) == 0.0);
  CHECK_THROWS_AS(ml_mse(1.0, 0, 16, 1.0, 8), ContractError);
  CHECK_THROWS_AS(ml_mse(1.0, 4, 16, 0.0, 8), ContractError);
}

TEST_CASE("gain figures match the quoted decibel values") {
  CHECK(wd_sb_gain_db(64, 12) == doctest::Approx(10.280287).epsilon(1e-6));
  CHECK(wd_sb_gain_db(32, 12) == doctest::Approx(7.269987).epsilon(1e-6));
  CHECK(wd_sb_gain_db(12, 12) == doctest::Approx(3.010300).epsilon(1e-6));
  CHECK_THROWS_AS(wd_sb_gain_db(0, 12), ContractError);
}

TEST_CASE("degenerate or invalid inputs are rejected") {
  CrlbInputs in = pinned_inputs();
  in.sigma_sv(1) = 0.0;
  CHECK_THROWS_AS(ccrlb(in), ContractError);

  CrlbInputs skew = pinned_inputs();
  skew.t(0, 0) *= 1.01;
  CHECK_THROWS_AS(ccrlb(skew), ContractError);

  CrlbInputs unordered = pinned_inputs();
  unordered.sigma_sv << 0.7, 1.5;
  CHECK_THROWS_AS(ccrlb(unordered), ContractError);

  CHECK_THROWS_AS(null_space_basis(ComplexMatrix::Zero(4, 8)), NumericalError);
  CHECK_THROWS_AS(null_space_basis(ComplexMatrix::Zero(4, 6)), ContractError);
}

TEST_CASE("zero noise gives an identically zero bound") {
  CrlbInputs in = pinned_inputs();
  in.sigma2 = 0.0;
  const CrlbResult r = ccrlb(in);
  CHECK(r.total_mse_bound == 0.0);
  CHECK(r.c_h.norm() == 0.0);
  CHECK(r.per_element.norm() == 0.0);
}

TEST_CASE("monte carlo wd-sb error respects and approaches the bound") {
  // One fixed channel; only the noise varies across trials.
  SeededRng ch_rng(250, 0);
  ChannelParams params;
  params.n_bs = 16;
  params.k_u = 4;
  const AbsorptionTable no_absorption;
  const ComplexMatrix h =
      normalized_unit_column_power(generate_channel(params, no_absorption, ch_rng).h);
  const SvdResult dec = svd(h);
  const PilotBlock pilots = make_pilots(8, 4, 1.0);
  const DataBlock data = make_data(8, 4, 1.0, ch_rng);
  const RfCombiner combiner =
      make_rf_combiner(16, 4, 4, CombinerMode::UnitaryValidation, ch_rng);

  int snr_index = 0;
  for (const double sigma2 : {1.0, 0.1, 0.01}) {
    CrlbInputs in;
    in.s = dec.u;
    in.sigma_sv = dec.s;
    in.t = dec.vh.adjoint();
    in.p_p = 1.0;
    in.tau_p = 8;
    in.sigma2 = sigma2;
    const double bound = ccrlb(in).total_mse_bound;

    double total = 0.0;
    const int trials = 2000;
    for (int trial = 0; trial < trials; ++trial) {
      SeededRng rng(777, static_cast<std::uint64_t>(snr_index) * 1000000 + trial);
      const ReceivedFrame frame_p = receive_pilots(h, pilots, combiner, sigma2, rng);
      const ReceivedFrame frame_d = receive_data(h, data, combiner, sigma2, rng);
      WdSbConfig cfg;
      cfg.n_data = 8;
      cfg.sigma2 = sigma2;
      cfg.whitening = WhiteningMode::Perfect;
      const ChannelEstimate est =
          estimate_wd_sb(frame_p, frame_d, pilots, combiner, cfg, &h);
      total += (est.h_hat - h).squaredNorm();
    }
    const double empirical = total / trials;
    CHECK(empirical >= 0.98 * bound);
    if (sigma2 <= 0.01) CHECK(empirical <= 1.15 * bound);
    ++snr_index;
  }
}

}  // TEST_SUITE
