#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "thzsb/channel.hpp"
#include "thzsb/numerics.hpp"
#include "thzsb/signal.hpp"
#include "thzsb/types.hpp"

namespace thzsb {

enum class EstimatorChoice { Ml, RalsSb, WdSbPerfect, WdSbEstimated };

const char* estimator_name(EstimatorChoice choice);

enum class SweepAxis { SnrDb, TauP, NBs, NData };

const char* sweep_axis_name(SweepAxis axis);

// Hardware and frame-structure knobs shared by every sweep point. snr_db is
// the operating point used whenever the sweep axis is not snr_db; SNR is
// defined as 10 log10(1/sigma_v^2) with unit pilot and data power.
struct SystemConfig {
  int n_bs = 64;
  int k_u = 12;
  int n_rf = 4;
  int tau_p = 16;
  int n_data = 200;
  int n_q = 4;
  int adc_bits = kAdcInfiniteBits;
  CombinerMode combiner_mode = CombinerMode::Random;
  double snr_db = 10.0;
};

// One Monte Carlo experiment: a sweep over exactly one axis, a trial count,
// and the estimator set to compare. `outputs` may be empty to skip CSV
// emission (the rows are still returned).
struct ScenarioConfig {
  ChannelParams channel;  // n_bs / k_u are overwritten from `system` per trial
  SystemConfig system;
  SweepAxis sweep_axis = SweepAxis::SnrDb;
  std::vector<double> sweep_values;
  int trials = 100;
  std::uint64_t seed = 1;
  std::vector<EstimatorChoice> estimators;
  std::string outputs;
  bool normalize_h = true;
  std::string absorption_csv;

  void validate() const;  // throws ConfigError listing every violation
};

// Parses the documented JSON schema. Collects every structural problem
// (missing keys, wrong types, unknown keys) into one ConfigError; semantic
// invariants are checked by ScenarioConfig::validate.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

struct MetricRow {
  double sweep_value = 0.0;
  std::string method;
  std::string metric;  // nmse_db | ber | se_bps_hz
  double mean = 0.0;
  double std_error = 0.0;
  int trials = 0;  // trials that produced a finite metric at this cell
};

struct EcdfRow {
  double threshold = 0.0;
  std::string method;
  double fraction = 0.0;
};

struct RunResult {
  std::vector<MetricRow> nmse;  // mean/std_error reported in dB
  std::vector<MetricRow> ber;
  std::vector<MetricRow> se;
  std::vector<EcdfRow> ecdf;  // per-trial linear NMSE pooled over the run
};

// Streaming mean/variance accumulator (Welford). Matches the batch two-pass
// formulas to rounding; sample_variance is 0 for fewer than two samples.
class RunningStat {
 public:
  void push(double x);
  long count() const { return n_; }
  double mean() const { return n_ > 0 ? mean_ : 0.0; }
  double sample_variance() const;
  double stderr_of_mean() const;

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// ||h_hat - h||_F^2 / ||h||_F^2. A zero reference channel leaves the metric
// undefined and is rejected.
double nmse(const ComplexMatrix& h_hat, const ComplexMatrix& h);

// Fraction of wrong bits under per-entry Gray-mapped QPSK hard decisions
// (real part -> first bit, imaginary part -> second bit, 2 bits per symbol).
// x_hat_soft must match x_true.x_d in shape.
double ber_qpsk(const ComplexMatrix& x_hat_soft, const DataBlock& x_true);

// Empirical CDF of `errors` evaluated at each threshold in order:
// F(t) = #{e <= t} / #errors. Errors must be non-empty.
std::vector<std::pair<double, double>> ecdf(const std::vector<double>& errors,
                                            const std::vector<double>& thresholds);

// Runs the full sweep x trial grid. Each trial draws from an independent
// stream keyed by (seed, sweep index, trial index), so results are identical
// for any worker count. Writes one CSV per metric into cfg.outputs unless it
// is empty. Trials where an estimator fails numerically are dropped from that
// estimator's aggregates; the `trials` column reports the surviving count.
RunResult run_experiment(const ScenarioConfig& cfg, int n_threads = 1);

// Writes nmse.csv, ber.csv, se.csv, ecdf.csv under out_dir (created if
// needed) with fixed headers and %.17g number formatting.
void write_csvs(const RunResult& result, const std::string& out_dir);

}  // namespace thzsb
