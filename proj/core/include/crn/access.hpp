#pragma once

#include <vector>

#include "crn/interval.hpp"
#include "crn/netmodel.hpp"
#include "crn/traffic.hpp"

namespace crn {

// Greedy window placement. The rule that minimizes expected collision time
// for a monotone on->off/off->on hazard is: start as early as the phase
// allows when IDLE was sensed, finish as late as the phase allows when
// ACTIVE was sensed. Each function returns a single interval of measure
// theta*t_f (empty when theta == 0) and throws std::domain_error when theta
// exceeds the phase window.

// Phase 1, window [delta*t_f, alpha*t_f], keyed by the frame-start sensing.
IntervalSet place_phase1(double theta_hat, int sensed, const FrameTiming& tm);

// Phase 2 without re-sensing, window [alpha*t_f, t_f], keyed by the
// frame-start sensing.
IntervalSet place_phase2(double theta_hat, int sensed, const FrameTiming& tm);

// Phase 2 with re-sensing, window [(alpha+delta)*t_f, t_f], keyed by the
// phase-boundary sensing.
IntervalSet place_phase2_resensed(double theta_hat, int sensed,
                                  const FrameTiming& tm);

// Largest per-sub-channel fraction within each band; bands transmit with one
// aligned window, so the band fraction is the max over its sub-channels.
std::vector<double> align_band(const std::vector<double>& theta_per_subchannel,
                               const std::vector<std::vector<int>>& band_map);

// Total expected collision time (absolute units) across bands for aligned
// fractions under greedy placement, conditioned on the frame-start sensing
// only.
double frame_interference(const std::vector<double>& theta1_hat,
                          const std::vector<double>& theta2_hat,
                          const std::vector<int>& x, const SystemConfig& cfg);

// Same, with phase 2 conditioned on the re-sensed state.
double frame_interference_resensed(const std::vector<double>& theta1_hat,
                                   const std::vector<double>& theta2_hat,
                                   const std::vector<int>& x,
                                   const std::vector<int>& y,
                                   const SystemConfig& cfg);

}  // namespace crn
