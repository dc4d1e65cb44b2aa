#include "thzsb/signal.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace thzsb {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int integer_log2(int n) {
  int b = 0;
  while ((1 << b) < n) ++b;
  return b;
}

}  // namespace

PilotBlock make_pilots(int tau_p, int k_u, double p_p) {
  if (k_u < 1) throw ConfigError("make_pilots: k_u must be >= 1");
  if (tau_p < k_u) {
    throw ConfigError("make_pilots: tau_p (" + std::to_string(tau_p) +
                      ") must be >= k_u (" + std::to_string(k_u) +
                      ") to keep the pilots orthogonal");
  }
  if (p_p <= 0.0) throw ConfigError("make_pilots: p_p must be positive");
  PilotBlock out;
  out.p_p = p_p;
  out.x_p.resize(tau_p, k_u);
  const double amp = std::sqrt(p_p);
  for (int m = 0; m < tau_p; ++m) {
    for (int n = 0; n < k_u; ++n) {
      const double arg = -2.0 * kPi * static_cast<double>(m) *
                         static_cast<double>(n) / static_cast<double>(tau_p);
      out.x_p(m, n) = amp * std::polar(1.0, arg);
    }
  }
  return out;
}

DataBlock make_data(int n, int k_u, double p_d, SeededRng& rng) {
  if (n < 1 || k_u < 1) throw ConfigError("make_data: n and k_u must be >= 1");
  if (p_d <= 0.0) throw ConfigError("make_data: p_d must be positive");
  DataBlock out;
  out.p_d = p_d;
  out.x_d.resize(n, k_u);
  const double s = std::sqrt(p_d / 2.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k_u; ++j) {
      const int sym = rng.uniform_int(4);
      out.x_d(i, j) = Complex((sym & 1) ? -s : s, (sym & 2) ? -s : s);
    }
  }
  return out;
}

RfCombiner make_rf_combiner(int n_bs, int n_rf, int n_q, CombinerMode mode,
                            SeededRng& rng) {
  if (n_bs < 1 || n_rf < 1) throw ConfigError("make_rf_combiner: sizes must be >= 1");
  if (n_rf > n_bs) throw ConfigError("make_rf_combiner: n_rf must be <= n_bs");
  if (n_bs % n_rf != 0) {
    throw ConfigError("make_rf_combiner: n_bs (" + std::to_string(n_bs) +
                      ") is not a multiple of n_rf (" + std::to_string(n_rf) + ")");
  }
  if (n_q < 1 || n_q > 16) throw ConfigError("make_rf_combiner: n_q must be in [1, 16]");

  RfCombiner out;
  out.block_cols = n_rf;
  out.mode = mode;
  out.w_rf.resize(n_bs, n_bs);
  const double amp = 1.0 / std::sqrt(static_cast<double>(n_bs));

  if (mode == CombinerMode::UnitaryValidation) {
    for (int m = 0; m < n_bs; ++m) {
      for (int n = 0; n < n_bs; ++n) {
        const double arg = -2.0 * kPi * static_cast<double>(m) *
                           static_cast<double>(n) / static_cast<double>(n_bs);
        out.w_rf(m, n) = amp * std::polar(1.0, arg);
      }
    }
    // DFT phases are multiples of 2 pi / n_bs; widen the recorded resolution
    // so they stay inside the quantized set on power-of-two arrays.
    out.n_q = is_power_of_two(n_bs) ? std::max(n_q, integer_log2(n_bs)) : n_q;
    return out;
  }

  out.n_q = n_q;
  const int levels = 1 << n_q;
  const int blocks = n_bs / n_rf;
  for (int b = 0; b < blocks; ++b) {
    for (int i = 0; i < n_bs; ++i) {
      for (int j = 0; j < n_rf; ++j) {
        const double psi = 2.0 * kPi * static_cast<double>(rng.uniform_int(levels)) /
                           static_cast<double>(levels);
        out.w_rf(i, b * n_rf + j) = amp * std::polar(1.0, psi);
      }
    }
  }
  return out;
}

namespace {

ReceivedFrame receive(FrameKind kind, const ComplexMatrix& h,
                      const ComplexMatrix& x, const RfCombiner& combiner,
                      double sigma_v2, SeededRng& rng) {
  if (combiner.block_cols < 1 || combiner.w_rf.cols() % combiner.block_cols != 0) {
    throw ContractError("receive: combiner block layout is inconsistent");
  }
  if (h.rows() != combiner.w_rf.rows()) {
    throw ContractError("receive: channel rows do not match the combiner");
  }
  if (h.cols() != x.cols()) {
    throw ContractError("receive: channel and symbol block disagree on k_u");
  }
  if (sigma_v2 < 0.0) throw ContractError("receive: negative noise variance");

  const Eigen::Index n_bs = h.rows();
  const Eigen::Index symbols = x.rows();
  const ComplexMatrix clean = h * x.adjoint();  // n_bs x symbols

  ReceivedFrame out;
  out.kind = kind;
  out.sigma_v2 = sigma_v2;
  out.y.resize(combiner.w_rf.cols(), symbols);
  const int blocks = combiner.blocks();
  for (int b = 0; b < blocks; ++b) {
    const auto w_b = combiner.w_rf.middleCols(
        static_cast<Eigen::Index>(b) * combiner.block_cols, combiner.block_cols);
    ComplexMatrix observed = clean;
    if (sigma_v2 > 0.0) observed += complex_gaussian(rng, n_bs, symbols, sigma_v2);
    out.y.middleRows(static_cast<Eigen::Index>(b) * combiner.block_cols,
                     combiner.block_cols) = w_b.adjoint() * observed;
  }
  return out;
}

}  // namespace

ReceivedFrame receive_pilots(const ComplexMatrix& h, const PilotBlock& pilots,
                             const RfCombiner& combiner, double sigma_v2,
                             SeededRng& rng) {
  return receive(FrameKind::Pilot, h, pilots.x_p, combiner, sigma_v2, rng);
}

ReceivedFrame receive_data(const ComplexMatrix& h, const DataBlock& data,
                           const RfCombiner& combiner, double sigma_v2,
                           SeededRng& rng) {
  return receive(FrameKind::Data, h, data.x_d, combiner, sigma_v2, rng);
}

ComplexMatrix adc_quantize(const ComplexMatrix& y, int bits, double clip_scale) {
  if (bits == kAdcInfiniteBits) return y;
  if (bits < 1 || bits > 16) {
    throw ConfigError("adc_quantize: bits must be in [1, 16] or kAdcInfiniteBits");
  }
  if (clip_scale <= 0.0) throw ConfigError("adc_quantize: clip_scale must be positive");

  const Eigen::Index n = y.size();
  if (n == 0) return y;

  auto part_std = [n](const auto& part) {
    const double mean = part.sum() / static_cast<double>(n);
    return std::sqrt((part - mean).square().sum() / static_cast<double>(n));
  };
  const auto re = y.real().array();
  const auto im = y.imag().array();
  const double r_re = clip_scale * part_std(re);
  const double r_im = clip_scale * part_std(im);

  const int levels = 1 << bits;
  const int half = levels / 2;
  auto quantize_part = [&](double x, double r) {
    if (r <= 0.0) return x;  // degenerate spread: nothing to resolve
    const double delta = 2.0 * r / static_cast<double>(levels);
    double k = std::floor(x / delta);
    if (k < -half) k = -half;
    if (k > half - 1) k = half - 1;
    return (k + 0.5) * delta;
  };

  ComplexMatrix out(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      out(i, j) = Complex(quantize_part(y(i, j).real(), r_re),
                          quantize_part(y(i, j).imag(), r_im));
    }
  }
  return out;
}

}  // namespace thzsb
