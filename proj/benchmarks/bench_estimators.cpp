#include <benchmark/benchmark.h>

#include "thzsb/channel.hpp"
#include "thzsb/estimators.hpp"
#include "thzsb/numerics.hpp"
#include "thzsb/signal.hpp"

namespace {

using namespace thzsb;

constexpr double kSigma2 = 0.1;  // 10 dB operating point
constexpr int kNRf = 4;
constexpr int kTauP = 16;
constexpr int kNData = 200;

struct Setup {
  ComplexMatrix h;
  PilotBlock pilots;
  RfCombiner combiner;
  ReceivedFrame frame_p;
  ReceivedFrame frame_d;
  ReceivedFrame joint;
  int n_data = kNData;
};

Setup make_setup(int n_bs, int k_u) {
  SeededRng rng(1, static_cast<std::uint64_t>(n_bs) * 1000 + k_u);
  ChannelParams params;
  params.n_bs = n_bs;
  params.k_u = k_u;
  const AbsorptionTable table;
  Setup s;
  s.h = normalized_unit_column_power(generate_channel(params, table, rng).h);
  s.pilots = make_pilots(kTauP, k_u, 1.0);
  s.combiner = make_rf_combiner(n_bs, kNRf, 4, CombinerMode::Random, rng);
  const DataBlock data = make_data(kNData, k_u, 1.0, rng);
  s.frame_p = receive_pilots(s.h, s.pilots, s.combiner, kSigma2, rng);
  s.frame_d = receive_data(s.h, data, s.combiner, kSigma2, rng);
  s.joint.kind = FrameKind::Data;
  s.joint.sigma_v2 = kSigma2;
  s.joint.y.resize(s.frame_p.y.rows(), s.frame_p.y.cols() + s.frame_d.y.cols());
  s.joint.y << s.frame_p.y, s.frame_d.y;
  return s;
}

void BM_Ml(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)),
                             static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_ml(s.frame_p, s.pilots, s.combiner));
  }
}

void BM_RalsSb(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)),
                             static_cast<int>(state.range(1)));
  RalsConfig cfg;
  cfg.beta_u = kSigma2;
  cfg.beta_v = kSigma2;
  std::uint64_t rep = 0;
  for (auto _ : state) {
    SeededRng rng(2, rep++);
    benchmark::DoNotOptimize(
        estimate_rals_sb(s.joint, s.pilots, s.combiner, cfg, rng));
  }
}

void BM_WdSbEstimated(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)),
                             static_cast<int>(state.range(1)));
  WdSbConfig cfg;
  cfg.n_data = s.n_data;
  cfg.sigma2 = kSigma2;
  cfg.whitening = WhiteningMode::Estimated;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_wd_sb(s.frame_p, s.frame_d, s.pilots, s.combiner, cfg));
  }
}

void BM_WdSbPerfect(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)),
                             static_cast<int>(state.range(1)));
  WdSbConfig cfg;
  cfg.n_data = s.n_data;
  cfg.sigma2 = kSigma2;
  cfg.whitening = WhiteningMode::Perfect;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_wd_sb(s.frame_p, s.frame_d, s.pilots, s.combiner, cfg, &s.h));
  }
}

}  // namespace

BENCHMARK(BM_Ml)->Args({32, 8})->Args({64, 12})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RalsSb)->Args({32, 8})->Args({64, 12})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WdSbEstimated)
    ->Args({32, 8})
    ->Args({64, 12})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WdSbPerfect)
    ->Args({32, 8})
    ->Args({64, 12})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
