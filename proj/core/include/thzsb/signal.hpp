#pragma once

#include <limits>

#include "thzsb/numerics.hpp"
#include "thzsb/types.hpp"

namespace thzsb {

// Sentinel for an unquantized front end ("infinite resolution").
inline constexpr int kAdcInfiniteBits = std::numeric_limits<int>::max();

struct PilotBlock {
  ComplexMatrix x_p;  // tau_p x k_u, columns of a scaled DFT
  double p_p = 1.0;   // per-symbol pilot power
};

struct DataBlock {
  ComplexMatrix x_d;  // n x k_u, QPSK symbols
  double p_d = 1.0;
};

enum class CombinerMode { Random, UnitaryValidation };

// Stacked analog combining stage: B = n_bs / n_rf blocks of n_bs x n_rf
// constant-modulus columns side by side, so w_rf is n_bs x n_bs. Every entry
// is exp(j psi)/sqrt(n_bs) with psi from the 2^n_q-point quantized phase set
// (the unitary validation mode uses DFT phases, multiples of 2 pi / n_bs).
struct RfCombiner {
  ComplexMatrix w_rf;
  int block_cols = 0;  // n_rf, columns combined per pilot/data repetition
  int n_q = 0;         // recorded phase resolution in bits
  CombinerMode mode = CombinerMode::Random;

  int blocks() const { return static_cast<int>(w_rf.cols()) / block_cols; }
};

enum class FrameKind { Pilot, Data };

// One combined observation block, pilot or data. `y` has one row per stacked
// combiner column and one column per symbol. adc_bits records what the front
// end did to it (kAdcInfiniteBits when nothing).
struct ReceivedFrame {
  FrameKind kind = FrameKind::Pilot;
  ComplexMatrix y;
  double sigma_v2 = 0.0;
  int adc_bits = kAdcInfiniteBits;
  double adc_clip_scale = 3.0;
};

// tau_p x k_u block of the tau_p-point DFT scaled by sqrt(p_p), so that
// x_p^H x_p = p_p tau_p I. Requires tau_p >= k_u.
PilotBlock make_pilots(int tau_p, int k_u, double p_p);

// n x k_u i.i.d. QPSK entries, each +-sqrt(p_d/2) +- j sqrt(p_d/2), drawn in
// row-major order.
DataBlock make_data(int n, int k_u, double p_d, SeededRng& rng);

// Builds the stacked combiner. Random mode draws each block's entries
// row-major from the quantized phase set; the validation mode returns the
// n_bs-point DFT (unitary, so combined noise stays white). n_bs must be a
// multiple of n_rf.
RfCombiner make_rf_combiner(int n_bs, int n_rf, int n_q, CombinerMode mode,
                            SeededRng& rng);

// Y_p = W_RF^H H X_p^H + (block-wise combined noise). Each of the B stacked
// blocks applies its own w_rf block to a fresh i.i.d. CN(0, sigma_v2) noise
// draw, matching a pilot block re-transmitted once per analog configuration.
ReceivedFrame receive_pilots(const ComplexMatrix& h, const PilotBlock& pilots,
                             const RfCombiner& combiner, double sigma_v2,
                             SeededRng& rng);

// Same reception model for the payload: Y_d = W_RF^H H X_d^H + noise.
ReceivedFrame receive_data(const ComplexMatrix& h, const DataBlock& data,
                           const RfCombiner& combiner, double sigma_v2,
                           SeededRng& rng);

// Uniform mid-rise quantizer applied independently to real and imaginary
// parts, 2^bits levels spanning [-R, R] with R = clip_scale times that part's
// sample standard deviation; inputs beyond R saturate to the outermost level.
// bits = kAdcInfiniteBits passes the input through; bits outside [1, 16] is a
// config error. A part with zero spread (all-zero input) is left untouched.
ComplexMatrix adc_quantize(const ComplexMatrix& y, int bits,
                           double clip_scale = 3.0);

}  // namespace thzsb
