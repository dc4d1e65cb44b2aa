#include "thzsb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "thzsb/combiner.hpp"
#include "thzsb/estimators.hpp"

namespace thzsb {

namespace {

using nlohmann::json;

constexpr double kLn10 = 2.302585092994045684;

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* estimator_name(EstimatorChoice choice) {
  switch (choice) {
    case EstimatorChoice::Ml: return "ml";
    case EstimatorChoice::RalsSb: return "rals_sb";
    case EstimatorChoice::WdSbPerfect: return "wd_sb_perfect";
    case EstimatorChoice::WdSbEstimated: return "wd_sb_estimated";
  }
  return "unknown";
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::SnrDb: return "snr_db";
    case SweepAxis::TauP: return "tau_p";
    case SweepAxis::NBs: return "n_bs";
    case SweepAxis::NData: return "n_data";
  }
  return "unknown";
}

void RunningStat::push(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStat::sample_variance() const {
  if (n_ < 2) return 0.0;
  return m2_ / static_cast<double>(n_ - 1);
}

double RunningStat::stderr_of_mean() const {
  if (n_ < 1) return 0.0;
  return std::sqrt(sample_variance() / static_cast<double>(n_));
}

double nmse(const ComplexMatrix& h_hat, const ComplexMatrix& h) {
  if (h_hat.rows() != h.rows() || h_hat.cols() != h.cols()) {
    throw ContractError("nmse: shape mismatch");
  }
  const double denom = h.squaredNorm();
  if (!(denom > 0.0)) {
    throw ContractError("nmse: reference channel is zero, metric undefined");
  }
  return (h_hat - h).squaredNorm() / denom;
}

double ber_qpsk(const ComplexMatrix& x_hat_soft, const DataBlock& x_true) {
  const ComplexMatrix& x = x_true.x_d;
  if (x_hat_soft.rows() != x.rows() || x_hat_soft.cols() != x.cols()) {
    throw ContractError("ber_qpsk: shape mismatch");
  }
  if (x.size() == 0) {
    throw ContractError("ber_qpsk: empty data block");
  }
  long wrong = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Complex soft = x_hat_soft(r, c);
      const Complex ref = x(r, c);
      wrong += (soft.real() >= 0.0) != (ref.real() >= 0.0);
      wrong += (soft.imag() >= 0.0) != (ref.imag() >= 0.0);
    }
  }
  return static_cast<double>(wrong) / (2.0 * static_cast<double>(x.size()));
}

std::vector<std::pair<double, double>> ecdf(const std::vector<double>& errors,
                                            const std::vector<double>& thresholds) {
  if (errors.empty()) {
    throw ContractError("ecdf: errors must be non-empty");
  }
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(thresholds.size());
  for (const double t : thresholds) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    const double count = static_cast<double>(it - sorted.begin());
    out.emplace_back(t, count / static_cast<double>(sorted.size()));
  }
  return out;
}

void ScenarioConfig::validate() const {
  std::string problems;
  auto complain = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };

  if (trials < 1) complain("trials must be >= 1");
  if (estimators.empty()) complain("estimators must list at least one method");

  const SystemConfig& sys = system;
  if (sys.k_u < 1) complain("system.k_u must be >= 1");
  if (sys.n_rf < sys.k_u) complain("system.n_rf must be >= k_u");
  if (sys.n_bs < sys.n_rf) complain("system.n_bs must be >= n_rf");
  if (sys.n_rf >= 1 && sys.n_bs % sys.n_rf != 0) {
    complain("system.n_bs must be a multiple of n_rf");
  }
  if (sys.tau_p < sys.k_u) complain("system.tau_p must be >= k_u");
  if (sys.n_data < 1) complain("system.n_data must be >= 1");
  if (sys.n_q < 1 || sys.n_q > 16) complain("system.n_q must be in [1, 16]");
  if (sys.adc_bits != kAdcInfiniteBits && (sys.adc_bits < 1 || sys.adc_bits > 16)) {
    complain("system.adc_bits must be in [1, 16] or \"inf\"");
  }
  if (!std::isfinite(sys.snr_db)) complain("system.snr_db must be finite");

  if (sweep_values.empty()) complain("sweep must list at least one value");
  for (std::size_t i = 0; i < sweep_values.size(); ++i) {
    const double v = sweep_values[i];
    const std::string where = std::string("sweep.") + sweep_axis_name(sweep_axis) +
                              "[" + std::to_string(i) + "]";
    switch (sweep_axis) {
      case SweepAxis::SnrDb:
        if (!std::isfinite(v)) complain(where + " must be finite");
        break;
      case SweepAxis::TauP:
        if (v != std::floor(v) || v < sys.k_u) {
          complain(where + " must be an integer >= k_u");
        }
        break;
      case SweepAxis::NBs:
        if (v != std::floor(v) || v < sys.n_rf) {
          complain(where + " must be an integer >= n_rf");
        } else if (sys.n_rf >= 1 && static_cast<long>(v) % sys.n_rf != 0) {
          complain(where + " must be a multiple of n_rf");
        }
        break;
      case SweepAxis::NData:
        if (v != std::floor(v) || v < 1) {
          complain(where + " must be an integer >= 1");
        }
        break;
    }
  }

  ChannelParams ch = channel;
  ch.n_bs = std::max(sys.n_bs, 1);
  ch.k_u = std::max(sys.k_u, 1);
  try {
    ch.validate();
  } catch (const ConfigError& e) {
    complain(e.what());
  }
  if (!absorption_csv.empty() && !std::filesystem::exists(absorption_csv)) {
    complain("channel.absorption_csv: file not found: " + absorption_csv);
  }

  if (!problems.empty()) throw ConfigError("scenario: " + problems);
}

namespace {

const std::vector<std::pair<std::string, EstimatorChoice>>& estimator_table() {
  static const std::vector<std::pair<std::string, EstimatorChoice>> table = {
      {"ml", EstimatorChoice::Ml},
      {"rals_sb", EstimatorChoice::RalsSb},
      {"wd_sb_perfect", EstimatorChoice::WdSbPerfect},
      {"wd_sb_estimated", EstimatorChoice::WdSbEstimated},
  };
  return table;
}

class ProblemList {
 public:
  void add(const std::string& msg) {
    if (!text_.empty()) text_ += "; ";
    text_ += msg;
  }
  bool empty() const { return text_.empty(); }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

void flag_unknown_keys(const json& obj, const char* scope,
                       const std::set<std::string>& allowed, ProblemList& problems) {
  for (const auto& item : obj.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      problems.add(std::string("unknown key '") + item.key() + "' in " + scope);
    }
  }
}

bool fetch_int(const json& obj, const char* scope, const char* key, bool required,
               ProblemList& problems, int* out) {
  if (!obj.contains(key)) {
    if (required) problems.add(std::string(scope) + "." + key + ": required");
    return false;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    problems.add(std::string(scope) + "." + key + ": must be an integer");
    return false;
  }
  const long long raw = v.get<long long>();
  if (raw < std::numeric_limits<int>::min() || raw > std::numeric_limits<int>::max()) {
    problems.add(std::string(scope) + "." + key + ": out of range");
    return false;
  }
  *out = static_cast<int>(raw);
  return true;
}

bool fetch_double(const json& obj, const char* scope, const char* key, bool required,
                  ProblemList& problems, double* out) {
  if (!obj.contains(key)) {
    if (required) problems.add(std::string(scope) + "." + key + ": required");
    return false;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) {
    problems.add(std::string(scope) + "." + key + ": must be a number");
    return false;
  }
  *out = v.get<double>();
  return true;
}

void parse_system(const json& obj, SystemConfig* sys, ProblemList& problems) {
  flag_unknown_keys(obj, "system",
                    {"n_bs", "k_u", "n_rf", "tau_p", "n_data", "n_q", "adc_bits",
                     "combiner_mode", "snr_db"},
                    problems);
  fetch_int(obj, "system", "n_bs", true, problems, &sys->n_bs);
  fetch_int(obj, "system", "k_u", true, problems, &sys->k_u);
  fetch_int(obj, "system", "n_rf", true, problems, &sys->n_rf);
  fetch_int(obj, "system", "tau_p", true, problems, &sys->tau_p);
  fetch_int(obj, "system", "n_data", true, problems, &sys->n_data);
  fetch_int(obj, "system", "n_q", false, problems, &sys->n_q);
  fetch_double(obj, "system", "snr_db", false, problems, &sys->snr_db);
  if (obj.contains("adc_bits")) {
    const json& v = obj.at("adc_bits");
    if (v.is_number_integer()) {
      sys->adc_bits = v.get<int>();
    } else if (v.is_string() && v.get<std::string>() == "inf") {
      sys->adc_bits = kAdcInfiniteBits;
    } else {
      problems.add("system.adc_bits: must be an integer or \"inf\"");
    }
  }
  if (obj.contains("combiner_mode")) {
    const json& v = obj.at("combiner_mode");
    const std::string mode = v.is_string() ? v.get<std::string>() : "";
    if (mode == "random") {
      sys->combiner_mode = CombinerMode::Random;
    } else if (mode == "unitary") {
      sys->combiner_mode = CombinerMode::UnitaryValidation;
    } else {
      problems.add("system.combiner_mode: must be \"random\" or \"unitary\"");
    }
  }
}

void parse_channel(const json& obj, ScenarioConfig* cfg, ProblemList& problems) {
  flag_unknown_keys(obj, "channel",
                    {"frequency_hz", "distance_m", "n_nlos", "n_ray", "b_r_dbi",
                     "d_r_over_lambda", "diffuse_spread_rad", "absorption_csv"},
                    problems);
  ChannelParams* ch = &cfg->channel;
  fetch_double(obj, "channel", "frequency_hz", false, problems, &ch->frequency_hz);
  fetch_double(obj, "channel", "distance_m", false, problems, &ch->distance_m);
  fetch_int(obj, "channel", "n_nlos", false, problems, &ch->n_nlos);
  fetch_int(obj, "channel", "n_ray", false, problems, &ch->n_ray);
  fetch_double(obj, "channel", "b_r_dbi", false, problems, &ch->b_r_dbi);
  fetch_double(obj, "channel", "d_r_over_lambda", false, problems, &ch->d_r_over_lambda);
  fetch_double(obj, "channel", "diffuse_spread_rad", false, problems,
               &ch->diffuse_spread_rad);
  if (obj.contains("absorption_csv")) {
    const json& v = obj.at("absorption_csv");
    if (v.is_string()) {
      cfg->absorption_csv = v.get<std::string>();
    } else {
      problems.add("channel.absorption_csv: must be a string path");
    }
  }
}

void parse_sweep(const json& obj, ScenarioConfig* cfg, ProblemList& problems) {
  flag_unknown_keys(obj, "sweep", {"snr_db", "tau_p", "n_bs", "n_data"}, problems);
  int axes = 0;
  for (const SweepAxis axis : {SweepAxis::SnrDb, SweepAxis::TauP, SweepAxis::NBs,
                               SweepAxis::NData}) {
    const char* name = sweep_axis_name(axis);
    if (!obj.contains(name)) continue;
    ++axes;
    cfg->sweep_axis = axis;
    const json& v = obj.at(name);
    if (!v.is_array()) {
      problems.add(std::string("sweep.") + name + ": must be an array of numbers");
      continue;
    }
    cfg->sweep_values.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        problems.add(std::string("sweep.") + name + "[" + std::to_string(i) +
                     "]: must be a number");
      } else {
        cfg->sweep_values.push_back(v[i].get<double>());
      }
    }
  }
  if (axes != 1) {
    problems.add("sweep: must contain exactly one of snr_db, tau_p, n_bs, n_data");
  }
}

void parse_estimators(const json& arr, ScenarioConfig* cfg, ProblemList& problems) {
  if (!arr.is_array()) {
    problems.add("estimators: must be an array of method names");
    return;
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      problems.add("estimators[" + std::to_string(i) + "]: must be a string");
      continue;
    }
    const std::string name = arr[i].get<std::string>();
    if (!seen.insert(name).second) {
      problems.add("estimators: duplicate method '" + name + "'");
      continue;
    }
    bool known = false;
    for (const auto& entry : estimator_table()) {
      if (entry.first == name) {
        cfg->estimators.push_back(entry.second);
        known = true;
        break;
      }
    }
    if (!known) {
      problems.add("estimators: unknown method '" + name +
                   "' (expected ml, rals_sb, wd_sb_perfect, wd_sb_estimated)");
    }
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario: invalid json: ") + e.what());
  }
  if (!root.is_object()) {
    throw ConfigError("scenario: top level must be an object");
  }

  ProblemList problems;
  ScenarioConfig cfg;
  flag_unknown_keys(root, "scenario",
                    {"channel", "system", "sweep", "trials", "seed", "estimators",
                     "outputs", "normalize_h"},
                    problems);

  if (root.contains("system") && root.at("system").is_object()) {
    parse_system(root.at("system"), &cfg.system, problems);
  } else {
    problems.add("system: required object");
  }

  if (root.contains("channel")) {
    if (root.at("channel").is_object()) {
      parse_channel(root.at("channel"), &cfg, problems);
    } else {
      problems.add("channel: must be an object");
    }
  }

  if (root.contains("sweep") && root.at("sweep").is_object()) {
    parse_sweep(root.at("sweep"), &cfg, problems);
  } else {
    problems.add("sweep: required object");
  }

  fetch_int(root, "scenario", "trials", true, problems, &cfg.trials);

  if (root.contains("seed")) {
    const json& v = root.at("seed");
    if (v.is_number_unsigned()) {
      cfg.seed = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<long long>() >= 0) {
      cfg.seed = static_cast<std::uint64_t>(v.get<long long>());
    } else {
      problems.add("seed: must be a non-negative integer");
    }
  } else {
    problems.add("seed: required");
  }

  if (root.contains("estimators")) {
    parse_estimators(root.at("estimators"), &cfg, problems);
  } else {
    problems.add("estimators: required");
  }

  if (root.contains("outputs")) {
    const json& v = root.at("outputs");
    if (v.is_string()) {
      cfg.outputs = v.get<std::string>();
    } else {
      problems.add("outputs: must be a string path");
    }
  }

  if (root.contains("normalize_h")) {
    const json& v = root.at("normalize_h");
    if (v.is_boolean()) {
      cfg.normalize_h = v.get<bool>();
    } else {
      problems.add("normalize_h: must be a boolean");
    }
  }

  if (!problems.empty()) {
    throw ConfigError("scenario: " + problems.str());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("scenario: cannot read " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

namespace {

struct PointSetup {
  double sweep_value = 0.0;
  int n_bs = 0;
  int tau_p = 0;
  int n_data = 0;
  double sigma_v2 = 0.0;
};

std::vector<PointSetup> resolve_points(const ScenarioConfig& cfg) {
  std::vector<PointSetup> points;
  points.reserve(cfg.sweep_values.size());
  for (const double v : cfg.sweep_values) {
    PointSetup p;
    p.sweep_value = v;
    p.n_bs = cfg.system.n_bs;
    p.tau_p = cfg.system.tau_p;
    p.n_data = cfg.system.n_data;
    double snr_db = cfg.system.snr_db;
    switch (cfg.sweep_axis) {
      case SweepAxis::SnrDb: snr_db = v; break;
      case SweepAxis::TauP: p.tau_p = static_cast<int>(v); break;
      case SweepAxis::NBs: p.n_bs = static_cast<int>(v); break;
      case SweepAxis::NData: p.n_data = static_cast<int>(v); break;
    }
    p.sigma_v2 = std::pow(10.0, -snr_db / 10.0);
    points.push_back(p);
  }
  return points;
}

struct CellMetrics {
  double nmse_lin = 0.0;
  double ber = 0.0;
  double se = 0.0;
  bool ok = false;
};

// One full Monte Carlo trial: channel, frames, every selected estimator, and
// its metrics. All randomness comes from the per-trial stream, in a fixed
// draw order, so trials are reproducible independently of scheduling.
void run_trial(const ScenarioConfig& cfg, const AbsorptionTable& table,
               const PointSetup& pt, int p_idx, int t_idx, CellMetrics* out) {
  const SystemConfig& sys = cfg.system;
  const int k = sys.k_u;
  SeededRng rng(cfg.seed, (static_cast<std::uint64_t>(p_idx) << 32) |
                              static_cast<std::uint64_t>(t_idx));

  ChannelParams ch = cfg.channel;
  ch.n_bs = pt.n_bs;
  ch.k_u = k;
  const ChannelRealization realization = generate_channel(ch, table, rng);
  const ComplexMatrix h =
      cfg.normalize_h ? normalized_unit_column_power(realization.h) : realization.h;

  const PilotBlock pilots = make_pilots(pt.tau_p, k, 1.0);
  const RfCombiner combiner =
      make_rf_combiner(pt.n_bs, sys.n_rf, sys.n_q, sys.combiner_mode, rng);
  const DataBlock data = make_data(pt.n_data, k, 1.0, rng);
  ReceivedFrame frame_p = receive_pilots(h, pilots, combiner, pt.sigma_v2, rng);
  ReceivedFrame frame_d = receive_data(h, data, combiner, pt.sigma_v2, rng);
  // Detection sees a later transmission of the payload through the designed
  // digital combiner: same symbols, fresh noise, antenna-domain samples.
  ComplexMatrix y_det =
      h * data.x_d.transpose() + complex_gaussian(rng, pt.n_bs, pt.n_data, pt.sigma_v2);
  if (sys.adc_bits != kAdcInfiniteBits) {
    frame_p.y = adc_quantize(frame_p.y, sys.adc_bits);
    frame_p.adc_bits = sys.adc_bits;
    frame_d.y = adc_quantize(frame_d.y, sys.adc_bits);
    frame_d.adc_bits = sys.adc_bits;
    y_det = adc_quantize(y_det, sys.adc_bits);
  }

  bool need_joint = false;
  for (const EstimatorChoice choice : cfg.estimators) {
    need_joint |= (choice == EstimatorChoice::RalsSb);
  }
  ReceivedFrame joint;
  if (need_joint) {
    joint.kind = FrameKind::Data;
    joint.sigma_v2 = pt.sigma_v2;
    joint.adc_bits = frame_p.adc_bits;
    joint.y.resize(frame_p.y.rows(), frame_p.y.cols() + frame_d.y.cols());
    joint.y << frame_p.y, frame_d.y;
  }

  for (std::size_t m = 0; m < cfg.estimators.size(); ++m) {
    CellMetrics cell;
    try {
      ComplexMatrix h_hat;
      switch (cfg.estimators[m]) {
        case EstimatorChoice::Ml: {
          h_hat = estimate_ml(frame_p, pilots, combiner).h_hat;
          break;
        }
        case EstimatorChoice::RalsSb: {
          RalsConfig rals;
          rals.beta_u = pt.sigma_v2;
          rals.beta_v = pt.sigma_v2;
          h_hat = estimate_rals_sb(joint, pilots, combiner, rals, rng)
                      .first.h_hat;
          break;
        }
        case EstimatorChoice::WdSbPerfect:
        case EstimatorChoice::WdSbEstimated: {
          WdSbConfig wd;
          wd.n_data = pt.n_data;
          wd.sigma2 = pt.sigma_v2;
          wd.p_d = 1.0;
          const bool perfect = cfg.estimators[m] == EstimatorChoice::WdSbPerfect;
          wd.whitening = perfect ? WhiteningMode::Perfect : WhiteningMode::Estimated;
          h_hat = estimate_wd_sb(frame_p, frame_d, pilots, combiner, wd,
                                 perfect ? &h : nullptr)
                      .h_hat;
          break;
        }
      }
      // Every method feeds the same detector, so BER differences reflect
      // channel-estimate quality alone.
      const ComplexMatrix w = mmse_digital(h_hat, k, pt.sigma_v2);
      const ComplexMatrix x_soft = (w.adjoint() * y_det).transpose();
      cell.nmse_lin = nmse(h_hat, h);
      cell.ber = ber_qpsk(x_soft, data);
      cell.se = spectral_efficiency(h, w, ComplexMatrix::Identity(k, k),
                                    pt.sigma_v2, k);
      cell.ok = true;
    } catch (const NumericalError&) {
      cell = CellMetrics{};
    }
    out[m] = cell;
  }
}

void append_metric_rows(const ScenarioConfig& cfg,
                        const std::vector<PointSetup>& points,
                        const std::vector<CellMetrics>& cells, RunResult* result) {
  const std::size_t n_methods = cfg.estimators.size();
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      RunningStat st_nmse;
      RunningStat st_ber;
      RunningStat st_se;
      for (int t = 0; t < cfg.trials; ++t) {
        const CellMetrics& cell =
            cells[(p * static_cast<std::size_t>(cfg.trials) + t) * n_methods + m];
        if (!cell.ok) continue;
        st_nmse.push(cell.nmse_lin);
        st_ber.push(cell.ber);
        st_se.push(cell.se);
      }
      const std::string method = estimator_name(cfg.estimators[m]);
      const int used = static_cast<int>(st_nmse.count());

      MetricRow row;
      row.sweep_value = points[p].sweep_value;
      row.method = method;
      row.trials = used;

      row.metric = "nmse_db";
      if (used > 0 && st_nmse.mean() > 0.0) {
        row.mean = 10.0 * std::log10(st_nmse.mean());
        row.std_error = (10.0 / kLn10) * st_nmse.stderr_of_mean() / st_nmse.mean();
      } else {
        row.mean = std::numeric_limits<double>::quiet_NaN();
        row.std_error = 0.0;
      }
      result->nmse.push_back(row);

      row.metric = "ber";
      row.mean = used > 0 ? st_ber.mean() : std::numeric_limits<double>::quiet_NaN();
      row.std_error = st_ber.stderr_of_mean();
      result->ber.push_back(row);

      row.metric = "se_bps_hz";
      row.mean = used > 0 ? st_se.mean() : std::numeric_limits<double>::quiet_NaN();
      row.std_error = st_se.stderr_of_mean();
      result->se.push_back(row);
    }
  }
}

void append_ecdf_rows(const ScenarioConfig& cfg,
                      const std::vector<CellMetrics>& cells, RunResult* result) {
  const std::size_t n_methods = cfg.estimators.size();
  const std::size_t n_items = cells.size() / std::max<std::size_t>(n_methods, 1);
  std::vector<std::vector<double>> errors_by_method(n_methods);
  std::vector<double> pooled;
  for (std::size_t m = 0; m < n_methods; ++m) {
    for (std::size_t item = 0; item < n_items; ++item) {
      const CellMetrics& cell = cells[item * n_methods + m];
      if (!cell.ok) continue;
      errors_by_method[m].push_back(cell.nmse_lin);
      pooled.push_back(cell.nmse_lin);
    }
  }
  if (pooled.empty()) return;
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> thresholds;
  thresholds.reserve(101);
  for (int p = 0; p <= 100; ++p) {
    thresholds.push_back(pooled[(p * (pooled.size() - 1)) / 100]);
  }
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  for (std::size_t m = 0; m < n_methods; ++m) {
    if (errors_by_method[m].empty()) continue;
    const auto curve = ecdf(errors_by_method[m], thresholds);
    for (const auto& [threshold, fraction] : curve) {
      EcdfRow row;
      row.threshold = threshold;
      row.method = estimator_name(cfg.estimators[m]);
      row.fraction = fraction;
      result->ecdf.push_back(row);
    }
  }
}

}  // namespace

RunResult run_experiment(const ScenarioConfig& cfg, int n_threads) {
  cfg.validate();
  const AbsorptionTable table = cfg.absorption_csv.empty()
                                    ? AbsorptionTable()
                                    : AbsorptionTable::from_csv(cfg.absorption_csv);
  const std::vector<PointSetup> points = resolve_points(cfg);
  const std::size_t n_methods = cfg.estimators.size();
  const long items = static_cast<long>(points.size()) * cfg.trials;
  std::vector<CellMetrics> cells(static_cast<std::size_t>(items) * n_methods);

  auto work = [&](long item) {
    const int p_idx = static_cast<int>(item / cfg.trials);
    const int t_idx = static_cast<int>(item % cfg.trials);
    run_trial(cfg, table, points[p_idx], p_idx, t_idx,
              &cells[static_cast<std::size_t>(item) * n_methods]);
  };

  const int workers =
      static_cast<int>(std::min<long>(std::max(n_threads, 1), items));
  if (workers <= 1) {
    for (long item = 0; item < items; ++item) work(item);
  } else {
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (long item; (item = next.fetch_add(1)) < items;) {
          if (failed.load()) return;
          try {
            work(item);
          } catch (...) {
            const std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true);
            return;
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  RunResult result;
  append_metric_rows(cfg, points, cells, &result);
  append_ecdf_rows(cfg, cells, &result);
  if (!cfg.outputs.empty()) {
    write_csvs(result, cfg.outputs);
  }
  return result;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings on every platform
  if (!out) {
    throw std::runtime_error("harness: cannot write " + path.string());
  }
  return out;
}

void write_metric_csv(const std::filesystem::path& path, const char* header,
                      const std::vector<MetricRow>& rows) {
  std::ofstream out = open_csv(path);
  out << header << '\n';
  for (const MetricRow& row : rows) {
    out << fmt_g(row.sweep_value) << ',' << row.method << ',' << fmt_g(row.mean)
        << ',' << fmt_g(row.std_error) << ',' << row.trials << '\n';
  }
}

}  // namespace

void write_csvs(const RunResult& result, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_metric_csv(dir / "nmse.csv", "sweep_value,method,mean_db,stderr_db,trials",
                   result.nmse);
  write_metric_csv(dir / "ber.csv", "sweep_value,method,mean,stderr,trials",
                   result.ber);
  write_metric_csv(dir / "se.csv", "sweep_value,method,mean,stderr,trials",
                   result.se);
  std::ofstream out = open_csv(dir / "ecdf.csv");
  out << "threshold,method,fraction\n";
  for (const EcdfRow& row : result.ecdf) {
    out << fmt_g(row.threshold) << ',' << row.method << ',' << fmt_g(row.fraction)
        << '\n';
  }
}

}  // namespace thzsb
