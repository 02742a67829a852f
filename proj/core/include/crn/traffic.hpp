#pragma once

#include <optional>
#include <vector>

#include "crn/interval.hpp"
#include "crn/rng.hpp"

namespace crn {

// Two-state on/off traffic: exponential holding times, `lambda` leaves IDLE
// (state 0), `mu` leaves ACTIVE (state 1).
struct TrafficParams {
  double lambda = 1.0;
  double mu = 1.0;

  double rate_sum() const { return lambda + mu; }
  double stationary_active() const { return lambda / (lambda + mu); }
  void validate() const;  // throws std::domain_error on non-positive rates
};

// Frame layout. Phase 1 (source) occupies (0, alpha*t_f], phase 2 (source +
// relay) occupies (alpha*t_f, t_f]. `delta` is the control-delay fraction at
// the head of a phase before any transmission may start.
struct FrameTiming {
  double t_f = 1.0;
  double alpha = 0.5;
  double delta = 0.0;
  void validate() const;
};

// Pr{X(t) = to | X(0) = from}; throws std::domain_error on t < 0 or a state
// outside {0, 1}.
double transition_prob(const TrafficParams& tp, double t, int from, int to);

double stationary_active_prob(const TrafficParams& tp);

// Expected ACTIVE time overlapped by the transmission window when the window
// is placed greedily for the sensed state (earliest start if IDLE was
// sensed, latest finish if ACTIVE was sensed). `theta` is the fraction of
// t_f spent transmitting; results are absolute times in [0, theta*t_f].
//
// Phase 1 windows live in [delta*t_f, alpha*t_f], conditioning on X(0).
double expected_collision_phase1(double theta, int sensed,
                                 const TrafficParams& tp,
                                 const FrameTiming& tm);

// Phase 2 windows live in [alpha*t_f, t_f], still conditioned on X(0) (no
// second sensing).
double expected_collision_phase2(double theta, int sensed,
                                 const TrafficParams& tp,
                                 const FrameTiming& tm);

// Phase 2 windows live in [(alpha+delta)*t_f, t_f], conditioned on the
// re-sensed state X(alpha*t_f).
double expected_collision_phase2_resensed(double theta, int sensed,
                                          const TrafficParams& tp,
                                          const FrameTiming& tm);

// d/dtheta of the three functions above (absolute time units). The slopes
// are positive and increasing, which is what makes the per-band collision
// cost strictly convex in theta.
double collision_slope_phase1(double theta, int sensed,
                              const TrafficParams& tp, const FrameTiming& tm);
double collision_slope_phase2(double theta, int sensed,
                              const TrafficParams& tp, const FrameTiming& tm);
double collision_slope_phase2_resensed(double theta, int sensed,
                                       const TrafficParams& tp,
                                       const FrameTiming& tm);

// Expected ACTIVE time over an arbitrary interval set, conditioned on the
// chain being in `from` at time `t0`. Pieces must not start before t0.
double expected_active_time(const IntervalSet& spans, int from,
                            const TrafficParams& tp, double t0 = 0.0);

// One realized trajectory over [0, duration]. The state at time t is
// `initial_state` flipped once per transition at or before t.
struct SamplePath {
  int initial_state = 0;
  double duration = 0.0;
  std::vector<double> transitions;  // strictly increasing, in (0, duration]

  int state_at(double t) const;
};

// Draws a trajectory; `x0` empty means the initial state is drawn from the
// stationary distribution. The caller supplies a dedicated substream so
// paths can be reproduced independently of each other.
SamplePath sample_path(const TrafficParams& tp, std::optional<int> x0,
                       double duration, Rng& rng);

// Time the path spends ACTIVE inside `spans`. Throws std::domain_error if a
// piece leaves [0, duration].
double collision_time(const SamplePath& path, const IntervalSet& spans);

}  // namespace crn
