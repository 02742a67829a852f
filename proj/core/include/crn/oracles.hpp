#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "crn/interval.hpp"
#include "crn/netmodel.hpp"
#include "crn/traffic.hpp"

// Slow reference implementations used to cross-check the closed forms and
// the solver. Each one recomputes its quantity from first principles through
// a route disjoint from the production code it checks.

namespace crn::oracle {

// Adaptive Simpson quadrature with an absolute tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10);

// Bisection on a bracketing interval; f(lo) and f(hi) must differ in sign.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol = 1e-13);

// Expected ACTIVE overlap of a window set by direct quadrature of the
// occupancy probability, conditioned on the state at t0.
double collision_by_quadrature(const IntervalSet& spans, int state0, double t0,
                               const TrafficParams& tp, double tol = 1e-10);

// Exhaustive placement search for a window of measure theta*t_f inside
// [win_lo, win_hi]: best single window over a start grid, plus the best
// equal-measure two-window split as a refinement probe.
struct PlacementSearch {
  double best_cost = 0.0;
  double best_start = 0.0;
  double best_split_cost = 0.0;
};
PlacementSearch search_placement(double theta, double t_f, double win_lo,
                                 double win_hi, int state0, double t0,
                                 const TrafficParams& tp, int grid = 200);

// Monte Carlo estimate of the expected ACTIVE overlap; simulates the chain
// inline (no shared path machinery). Empty state0 starts stationary.
struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
};
McEstimate mc_collision(const IntervalSet& spans, std::optional<int> state0,
                        double duration, const TrafficParams& tp,
                        std::uint64_t seed, int reps);

// Augmented-Lagrangian projected-gradient solver over the raw variables
// (per-band fractions, per-sub-channel powers). Slow and generic; exists to
// confirm the closed-form solver on small instances.
struct ReferenceSolution {
  std::vector<double> theta1, theta2;   // per band
  std::vector<double> p_s1, p_s2, p_r;  // per sub-channel
  double objective = 0.0;               // per unit t_f
  double r1 = 0.0;
  double r2 = 0.0;
  double source_power = 0.0;
  double relay_power = 0.0;
  bool feasible = false;
};
ReferenceSolution reference_solve(const Nsi& nsi, const SystemConfig& cfg,
                                  bool resensed_phase2, int outer_iters = 60,
                                  int inner_iters = 4000);

}  // namespace crn::oracle
