#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thzsb/bounds.hpp"
#include "thzsb/estimators.hpp"
#include "thzsb/harness.hpp"
#include "thzsb/numerics.hpp"
#include "thzsb/signal.hpp"
#include "thzsb/types.hpp"

namespace {

using namespace thzsb;

struct Overrides {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  bool trials_set = false;
  std::string out_dir;
  bool out_dir_set = false;
};

int resolve_threads(int flag_value, bool flag_set) {
  if (flag_set) {
    if (flag_value < 1) throw ConfigError("--threads must be >= 1");
    return flag_value;
  }
  if (const char* env = std::getenv("THZSB_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || parsed < 1) {
      throw ConfigError(std::string("THZSB_THREADS must be a positive integer, got '") +
                        env + "'");
    }
    return static_cast<int>(parsed);
  }
  return 1;
}

ScenarioConfig load_with_overrides(const std::string& path, const Overrides& over) {
  ScenarioConfig cfg = load_scenario(path);
  if (over.seed_set) cfg.seed = over.seed;
  if (over.trials_set) cfg.trials = over.trials;
  if (over.out_dir_set) cfg.outputs = over.out_dir;
  return cfg;
}

int cmd_validate(const std::string& path, const Overrides& over) {
  const ScenarioConfig cfg = load_with_overrides(path, over);
  cfg.validate();
  std::printf("ok: %s\n", path.c_str());
  return 0;
}

int cmd_run(const std::string& path, const Overrides& over, int threads) {
  ScenarioConfig cfg = load_with_overrides(path, over);
  if (cfg.outputs.empty()) {
    throw ConfigError("run: an output directory is required (config `outputs` or --out-dir)");
  }
  cfg.validate();
  const RunResult result = run_experiment(cfg, threads);
  for (const MetricRow& row : result.nmse) {
    std::printf("%s=%g  %-16s nmse %8.3f dB (+-%.3f, %d trials)\n",
                sweep_axis_name(cfg.sweep_axis), row.sweep_value,
                row.method.c_str(), row.mean, row.std_error, row.trials);
  }
  std::printf("wrote nmse.csv ber.csv se.csv ecdf.csv to %s\n", cfg.outputs.c_str());
  return 0;
}

// Analytic curves only: the pilot-ML error floor, the constrained bound total
// sigma^2 K^2 / (2 tau_p p_p), and their gap 10 log10(2 n_bs / k_u).
int cmd_bound(const std::string& path, const Overrides& over) {
  ScenarioConfig cfg = load_with_overrides(path, over);
  cfg.validate();
  const std::string dir = cfg.outputs.empty() ? "." : cfg.outputs;
  std::filesystem::create_directories(dir);
  const std::filesystem::path csv_path = std::filesystem::path(dir) / "bound.csv";
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("bound: cannot write " + csv_path.string());
  }
  out << "sweep_value,sigma_v2,ml_mse_db,ccrlb_total_db,gain_db\n";
  for (const double value : cfg.sweep_values) {
    int n_bs = cfg.system.n_bs;
    int tau_p = cfg.system.tau_p;
    double snr_db = cfg.system.snr_db;
    switch (cfg.sweep_axis) {
      case SweepAxis::SnrDb: snr_db = value; break;
      case SweepAxis::TauP: tau_p = static_cast<int>(value); break;
      case SweepAxis::NBs: n_bs = static_cast<int>(value); break;
      case SweepAxis::NData: break;
    }
    const double sigma2 = std::pow(10.0, -snr_db / 10.0);
    const int k = cfg.system.k_u;
    const double ml = ml_mse(sigma2, k, n_bs, 1.0, tau_p);
    const double bound_total = sigma2 * k * k / (2.0 * tau_p);
    const double gain = wd_sb_gain_db(n_bs, k);
    char line[160];
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", value,
                  sigma2, 10.0 * std::log10(ml), 10.0 * std::log10(bound_total),
                  gain);
    out << line;
  }
  std::printf("wd_sb gain at n_bs=%d k_u=%d: %.2f dB\n", cfg.system.n_bs,
              cfg.system.k_u, wd_sb_gain_db(cfg.system.n_bs, cfg.system.k_u));
  std::printf("wrote %s\n", csv_path.string().c_str());
  return 0;
}

ScenarioConfig default_bench_scenario() {
  ScenarioConfig cfg;
  cfg.system.n_bs = 64;
  cfg.system.k_u = 12;
  cfg.system.n_rf = 16;
  cfg.system.tau_p = 16;
  cfg.system.n_data = 200;
  cfg.sweep_values = {10.0};
  cfg.trials = 15;
  cfg.seed = 1;
  cfg.estimators = {EstimatorChoice::Ml, EstimatorChoice::RalsSb,
                    EstimatorChoice::WdSbPerfect, EstimatorChoice::WdSbEstimated};
  return cfg;
}

int cmd_bench(const std::string& path, const Overrides& over) {
  ScenarioConfig cfg =
      path.empty() ? default_bench_scenario() : load_with_overrides(path, over);
  if (path.empty() && over.trials_set) cfg.trials = over.trials;
  if (path.empty() && over.seed_set) cfg.seed = over.seed;
  if (path.empty() && over.out_dir_set) cfg.outputs = over.out_dir;
  cfg.validate();
  const int reps = cfg.trials;

  // one fixed setup, timed per estimator call
  SeededRng rng(cfg.seed, 0);
  ChannelParams ch = cfg.channel;
  ch.n_bs = cfg.system.n_bs;
  ch.k_u = cfg.system.k_u;
  const AbsorptionTable table;
  const ComplexMatrix h =
      normalized_unit_column_power(generate_channel(ch, table, rng).h);
  const double sigma2 = std::pow(10.0, -cfg.system.snr_db / 10.0);
  const PilotBlock pilots = make_pilots(cfg.system.tau_p, cfg.system.k_u, 1.0);
  const RfCombiner combiner =
      make_rf_combiner(cfg.system.n_bs, cfg.system.n_rf, cfg.system.n_q,
                       cfg.system.combiner_mode, rng);
  const DataBlock data = make_data(cfg.system.n_data, cfg.system.k_u, 1.0, rng);
  const ReceivedFrame frame_p = receive_pilots(h, pilots, combiner, sigma2, rng);
  const ReceivedFrame frame_d = receive_data(h, data, combiner, sigma2, rng);
  ReceivedFrame joint;
  joint.kind = FrameKind::Data;
  joint.sigma_v2 = sigma2;
  joint.y.resize(frame_p.y.rows(), frame_p.y.cols() + frame_d.y.cols());
  joint.y << frame_p.y, frame_d.y;

  const std::string dir = cfg.outputs.empty() ? "." : cfg.outputs;
  std::filesystem::create_directories(dir);
  const std::filesystem::path csv_path = std::filesystem::path(dir) / "bench.csv";
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("bench: cannot write " + csv_path.string());
  }
  out << "method,n_bs,k_u,mean_ms,p95_ms\n";

  for (const EstimatorChoice choice : cfg.estimators) {
    std::vector<double> samples_ms;
    samples_ms.reserve(reps);
    for (int rep = 0; rep < reps; ++rep) {
      SeededRng rep_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(rep));
      const auto start = std::chrono::steady_clock::now();
      switch (choice) {
        case EstimatorChoice::Ml: {
          (void)estimate_ml(frame_p, pilots, combiner);
          break;
        }
        case EstimatorChoice::RalsSb: {
          RalsConfig rals;
          rals.beta_u = sigma2;
          rals.beta_v = sigma2;
          (void)estimate_rals_sb(joint, pilots, combiner, rals, rep_rng);
          break;
        }
        case EstimatorChoice::WdSbPerfect:
        case EstimatorChoice::WdSbEstimated: {
          WdSbConfig wd;
          wd.n_data = cfg.system.n_data;
          wd.sigma2 = sigma2;
          const bool perfect = choice == EstimatorChoice::WdSbPerfect;
          wd.whitening = perfect ? WhiteningMode::Perfect : WhiteningMode::Estimated;
          (void)estimate_wd_sb(frame_p, frame_d, pilots, combiner, wd,
                               perfect ? &h : nullptr);
          break;
        }
      }
      const auto stop = std::chrono::steady_clock::now();
      samples_ms.push_back(
          std::chrono::duration<double, std::milli>(stop - start).count());
    }
    std::sort(samples_ms.begin(), samples_ms.end());
    double sum = 0.0;
    for (const double s : samples_ms) sum += s;
    const double mean_ms = sum / samples_ms.size();
    const std::size_t p95_idx = std::min(
        samples_ms.size() - 1,
        static_cast<std::size_t>(std::ceil(0.95 * samples_ms.size())) - 1);
    const double p95_ms = samples_ms[p95_idx];
    char line[160];
    std::snprintf(line, sizeof line, "%s,%d,%d,%.6f,%.6f\n",
                  estimator_name(choice), cfg.system.n_bs, cfg.system.k_u,
                  mean_ms, p95_ms);
    out << line;
    std::printf("%-16s n_bs=%-3d k_u=%-3d mean %9.3f ms  p95 %9.3f ms (%d reps)\n",
                estimator_name(choice), cfg.system.n_bs, cfg.system.k_u, mean_ms,
                p95_ms, reps);
  }
  std::printf("wrote %s\n", csv_path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"THz massive-MIMO uplink channel estimation toolkit"};
  app.require_subcommand(1);

  Overrides over;
  int threads = 0;
  std::uint64_t seed_flag = 0;
  int trials_flag = 0;
  std::string out_dir_flag;
  auto* opt_seed =
      app.add_option("--seed", seed_flag, "Override the scenario seed");
  auto* opt_threads = app.add_option(
      "--threads", threads, "Worker threads (falls back to THZSB_THREADS, then 1)");
  auto* opt_out =
      app.add_option("--out-dir", out_dir_flag, "Override the output directory");
  auto* opt_trials =
      app.add_option("--trials", trials_flag, "Override the trial count");

  app.fallthrough();
  std::string run_config, validate_config, bound_config, bench_config;
  CLI::App* run_cmd = app.add_subcommand("run", "Execute a Monte Carlo experiment");
  run_cmd->add_option("config", run_config, "Scenario JSON file")->required();
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Check a scenario file and exit");
  validate_cmd->add_option("config", validate_config, "Scenario JSON file")
      ->required();
  CLI::App* bound_cmd = app.add_subcommand(
      "bound", "Emit analytic error bounds for a scenario, no Monte Carlo");
  bound_cmd->add_option("config", bound_config, "Scenario JSON file")->required();
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Wall-clock estimator timings (optional scenario file)");
  bench_cmd->add_option("config", bench_config, "Scenario JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    over.seed = seed_flag;
    over.seed_set = opt_seed->count() > 0;
    over.trials = trials_flag;
    over.trials_set = opt_trials->count() > 0;
    over.out_dir = out_dir_flag;
    over.out_dir_set = opt_out->count() > 0;
    const int n_threads = resolve_threads(threads, opt_threads->count() > 0);

    if (run_cmd->parsed()) return cmd_run(run_config, over, n_threads);
    if (validate_cmd->parsed()) return cmd_validate(validate_config, over);
    if (bound_cmd->parsed()) return cmd_bound(bound_config, over);
    if (bench_cmd->parsed()) return cmd_bench(bench_config, over);
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
