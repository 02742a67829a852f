#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"
#include "crn/netmodel.hpp"

namespace crn {

// The four reported experiments. FrameSweep solves one frame at fixed
// sensing outcomes over a rate-target grid; ErgodicSweep trains the four
// strategies and replays them over fresh evaluation frames; VarsigmaSweep
// rescales the traffic switching intensity at a fixed rate target;
// SensingErrorSweep replays a trained policy under independently flipped
// sensing outcomes at the source and the relay.
enum class ExperimentKind {
  FrameSweep,
  ErgodicSweep,
  VarsigmaSweep,
  SensingErrorSweep
};
const char* to_string(ExperimentKind k);

// Two-band single-frame deployment with one idle-sensed and one
// active-sensed band and fixed gains; the workbench for the frame solver.
SystemConfig default_frame_config();
Nsi default_frame_nsi();

// Sixteen sub-channels in four bands, long-run constraints, unit traffic
// rates; the workbench for training.
SystemConfig default_ergodic_config();

// One output row per (sweep value, strategy). `collision` is the analytic
// conditional expectation of the collision time for the realized sensing
// outcomes and `collision_realized` is the Monte Carlo mean over sampled
// traffic paths; both are normalized by t_f. Rates are reported per
// sub-channel bandwidth, i.e. divided by N*W. std_err is the standard
// error of the realized mean, std_err_model that of the analytic mean
// over frames, and std_err_paired that of the per-frame
// (realized - analytic) differences.
struct ResultRow {
  double sweep_value = 0.0;
  std::string strategy;
  std::string status;
  bool feasible = false;
  double collision = 0.0;
  double collision_realized = 0.0;
  double std_err = 0.0;
  double std_err_model = 0.0;
  double std_err_paired = 0.0;
  double objective = 0.0;  // solver / training objective, per unit t_f
  double r1 = 0.0;
  double r2 = 0.0;
  double source_power = 0.0;
  double relay_power = 0.0;
  std::vector<double> theta1;  // per band (frame values or evaluation means)
  std::vector<double> theta2;
};

// Rate grid values and rate_target are per-sub-channel spectral
// efficiencies; sweeps multiply them by N*W to obtain the config's r_min.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::FrameSweep;
  SystemConfig config;       // n_subchannels == 0 -> the kind's default
  ChannelModel channel;
  std::vector<double> grid;  // empty -> the kind's default grid
  int frames = 500;          // evaluation frames per row
  std::uint64_t master_seed = 2024;
  double rate_target = 1.7;  // normalized rate for the fixed-rate sweeps
  TrainingOptions training;  // channel is overwritten from `channel`
  SolveOptions frame_options;
};

// Per-frame evaluation draws shared by the trained-policy sweeps: fresh
// gains and sensing outcomes plus the traffic sample path of every band.
// Paths are consistent with the sensing outcomes (x is the state at 0 and
// y the state at alpha*t_f). Deterministic in (config, channel, seed).
struct EvalFrames {
  std::vector<Nsi> nsi;                        // [frame]
  std::vector<std::vector<SamplePath>> paths;  // [frame][band]
};
EvalFrames draw_eval_frames(const SystemConfig& cfg, const ChannelModel& ch,
                            std::uint64_t master_seed, int frames);

std::vector<ResultRow> run_frame_sweep(const ExperimentSpec& spec);
std::vector<ResultRow> run_ergodic_sweep(const ExperimentSpec& spec);
std::vector<ResultRow> run_varsigma_sweep(const ExperimentSpec& spec);
std::vector<ResultRow> run_sensing_error_sweep(const ExperimentSpec& spec);
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::string rows_to_json(const std::vector<ResultRow>& rows);
void write_rows(const std::vector<ResultRow>& rows, const std::string& path,
                const std::string& format);

// Fast self-checks for a deployment (solver round trip, packet round trip,
// online/offline agreement). Returns human-readable failures; empty means
// everything passed.
std::vector<std::string> validate_deployment(std::uint64_t seed);

}  // namespace crn
