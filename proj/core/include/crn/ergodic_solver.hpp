#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crn/frame_solver.hpp"
#include "crn/netmodel.hpp"

namespace crn {

// Long-run operating modes. TwoSensing adapts phase 2 to the re-sensed
// state; Phase1Only reuses the frame-start sensing for both phases;
// SensingFree ignores sensing; RelayFree is TwoSensing with the relay links
// zeroed.
enum class Strategy { TwoSensing, Phase1Only, SensingFree, RelayFree };
const char* to_string(Strategy s);

struct TrainingOptions {
  int sample_count = 2000;   // NSI draws held fixed across iterations
  int max_iter = 3000;
  double step0 = -1.0;       // < 0 picks 1/(1 + r_min/W) automatically
  bool polyak = true;
  int warmup = 200;
  int stall_iters = 600;
  double tol = 1e-10;
  double gap_tol = 1e-8;
  double dual_floor = 1e-12;
  double nu_bound = 1e6;
  int infeasible_streak = 400;
  double feas_tol = 1e-6;
  ChannelModel channel;
  std::function<void(const IterationInfo&)> on_iteration;
};

// Off-line training result: the converged multipliers plus enough context to
// reproduce the run and to stand up the per-frame policy.
struct TrainedPolicy {
  Strategy strategy = Strategy::TwoSensing;
  DualVars duals;
  SystemConfig config;
  ChannelModel channel;
  std::uint64_t seed = 0;
  int sample_count = 0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double final_subgradient_norm = 0.0;
  double theta_scale = 1.0;      // SensingFree recovery factor, else 1
  double expected_objective = 0.0;  // training-sample mean, per unit t_f
  double expected_r1 = 0.0;
  double expected_r2 = 0.0;
  double expected_source_power = 0.0;
  double expected_relay_power = 0.0;
};

// Aligned fraction for the re-sensed phase 2 (window [(alpha+delta)*t_f,
// t_f], conditioned at the phase boundary).
double theta_phase2_resensed(const DualVars& nu,
                             const std::vector<PowerRatios>& ratios,
                             const Nsi& nsi, int sensed, int band,
                             const SystemConfig& cfg);

// Inner minimizer with phase 2 keyed by the re-sensed state. Requires
// nsi.y; otherwise identical in structure to inner_solution.
Allocation inner_solution_resensed(const DualVars& nu, const Nsi& nsi,
                                   const SystemConfig& cfg);

// Sample-average training: K fixed NSI draws (gains + sensing pairs, common
// across iterations and strategies), projected subgradient on the expected
// constraints, best-feasible-iterate selection. Deterministic given
// (cfg, strategy, seed, options).
TrainedPolicy train_offline(const SystemConfig& cfg, Strategy strategy,
                            std::uint64_t seed,
                            const TrainingOptions& opts = {});

// Per-frame decision table shipped to the transmitting nodes: one ratio
// triple per sub-channel plus, per band, the two phase-1 fraction candidates
// (indexed by the frame-start outcome) and the two phase-2 candidates
// (indexed by the re-sensed outcome). Counted as 3N + 2M parameters, each
// two-candidate fraction field counting once.
struct ParameterPacket {
  std::int32_t n_subchannels = 0;
  std::int32_t n_bands = 0;
  std::vector<double> ratio_p1;
  std::vector<double> ratio_p2;
  std::vector<double> ratio_q;
  std::vector<std::array<double, 2>> theta1;  // [band][sensed]
  std::vector<std::array<double, 2>> theta2;  // [band][re-sensed]

  int parameter_count() const { return 3 * n_subchannels + 2 * n_bands; }

  // Little-endian record: magic "CRNP", u32 version (=1), u32 N, u32 M,
  // then float64 fields in declaration order (theta candidate pairs flat).
  std::vector<std::uint8_t> serialize() const;
  static ParameterPacket deserialize(const std::vector<std::uint8_t>& bytes);
};

// Precomputes the packet for one frame's gains under a trained TwoSensing /
// RelayFree policy. The candidates come from the same code paths as
// inner_solution_resensed, so the online lookup reproduces it bit for bit.
ParameterPacket build_packet(const TrainedPolicy& policy, const Nsi& gains);

// O(N + M) per-frame update: candidate selection by the realized sensing
// pair, powers as ratio*theta, greedy placement. Bit-identical to
// inner_solution_resensed at the policy's multipliers.
Allocation online_update(const ParameterPacket& packet,
                         const std::vector<int>& x, const std::vector<int>& y,
                         const SystemConfig& cfg);

// Per-frame allocation under any trained policy (dispatches on strategy;
// SensingFree applies its recovery scale, RelayFree zeroes the relay gains).
Allocation policy_allocation(const TrainedPolicy& policy, const Nsi& nsi);

// The policy's own predicted collision time for the frame (absolute units),
// i.e. the quantity its training objective averages.
double policy_model_collision(const TrainedPolicy& policy, const Nsi& nsi,
                              const Allocation& a);

}  // namespace crn
