#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"
#include "crn/harness.hpp"

// Per-frame costs at the deployment scale (N = 16, M = 4): the shipped
// parameter lookup, the packet build it starts from, and the full inner
// solve it replaces. The frame-level dual solve is included for scale.

namespace {

const crn::TrainedPolicy& trained_policy() {
  static const crn::TrainedPolicy policy = [] {
    crn::SystemConfig cfg = crn::default_ergodic_config();
    cfg.r_min = 1.7 * cfg.n_subchannels * cfg.bandwidth;
    crn::TrainingOptions opts;
    opts.sample_count = 400;
    opts.max_iter = 1200;
    return crn::train_offline(cfg, crn::Strategy::TwoSensing, 2024, opts);
  }();
  return policy;
}

struct BenchData {
  crn::EvalFrames frames;
  std::vector<crn::ParameterPacket> packets;
};

const BenchData& bench_data() {
  static const BenchData data = [] {
    const crn::TrainedPolicy& policy = trained_policy();
    BenchData d;
    d.frames = crn::draw_eval_frames(policy.config, policy.channel, 7, 64);
    for (const crn::Nsi& nsi : d.frames.nsi)
      d.packets.push_back(crn::build_packet(policy, nsi));
    return d;
  }();
  return data;
}

void BM_OnlineUpdate(benchmark::State& state) {
  const crn::TrainedPolicy& policy = trained_policy();
  const BenchData& d = bench_data();
  std::size_t i = 0;
  for (auto _ : state) {
    const std::size_t f = i++ % d.frames.nsi.size();
    benchmark::DoNotOptimize(crn::online_update(
        d.packets[f], d.frames.nsi[f].x, d.frames.nsi[f].y, policy.config));
  }
}
BENCHMARK(BM_OnlineUpdate)->Unit(benchmark::kMicrosecond);

void BM_BuildPacket(benchmark::State& state) {
  const crn::TrainedPolicy& policy = trained_policy();
  const BenchData& d = bench_data();
  std::size_t i = 0;
  for (auto _ : state) {
    const std::size_t f = i++ % d.frames.nsi.size();
    benchmark::DoNotOptimize(crn::build_packet(policy, d.frames.nsi[f]));
  }
}
BENCHMARK(BM_BuildPacket)->Unit(benchmark::kMicrosecond);

void BM_InnerSolve(benchmark::State& state) {
  const crn::TrainedPolicy& policy = trained_policy();
  const BenchData& d = bench_data();
  std::size_t i = 0;
  for (auto _ : state) {
    const std::size_t f = i++ % d.frames.nsi.size();
    benchmark::DoNotOptimize(crn::inner_solution_resensed(
        policy.duals, d.frames.nsi[f], policy.config));
  }
}
BENCHMARK(BM_InnerSolve)->Unit(benchmark::kMicrosecond);

void BM_FrameSolve(benchmark::State& state) {
  crn::SystemConfig cfg = crn::default_frame_config();
  cfg.r_min = 0.3 * cfg.n_subchannels * cfg.bandwidth;
  const crn::Nsi nsi = crn::default_frame_nsi();
  for (auto _ : state)
    benchmark::DoNotOptimize(crn::solve_frame(nsi, cfg));
}
BENCHMARK(BM_FrameSolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
