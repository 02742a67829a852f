#pragma once

// Internals shared by the frame solver and the off-line trainer. Not part of
// the installed interface.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "crn/access.hpp"
#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"

namespace crn::detail {

// Which sensing outcome keys the phase-2 fraction and placement.
enum class Phase2Mode { FrameSensing, Resensed };

struct InnerEval {
  Allocation alloc;
  double r1 = 0.0;
  double r2 = 0.0;
  double ps = 0.0;
  double pr = 0.0;
  double model_objective = 0.0;  // per unit t_f
};

// Rates, powers and model objective only; no interval construction. Used by
// the sample-mean trainer where the allocation itself is never needed.
struct LeanEval {
  double r1 = 0.0;
  double r2 = 0.0;
  double ps = 0.0;
  double pr = 0.0;
  double model_objective = 0.0;
};

// Reusable buffers so the training loop does not allocate per sample.
struct LeanScratch {
  std::vector<PowerRatios> ratios;
  std::vector<double> theta1;
  std::vector<double> theta2;
};

std::vector<PowerRatios> compute_ratios(const DualVars& nu, const Nsi& nsi,
                                        const SystemConfig& cfg);

// Sum over a band of the marginal Lagrangian gain per unit time fraction,
// with the power charge folded in through the ratio stationarity.
double band_slope_phase1(const DualVars& nu,
                         const std::vector<PowerRatios>& ratios,
                         const Nsi& nsi, const std::vector<int>& band);
double band_slope_phase2(const DualVars& nu,
                         const std::vector<PowerRatios>& ratios,
                         const Nsi& nsi, const std::vector<int>& band);

// Closed-form minimizers of collision cost minus slope * theta over
// [0, bound], for windows anchored at an idle-sensed start offset or grown
// backwards from an active-sensed tail anchor.
double theta_idle_rule(double slope_sum, const TrafficParams& tp, double t_f,
                       double offset, double bound);
double theta_active_rule(double slope_sum, const TrafficParams& tp, double t_f,
                         double anchor, double bound);

// Inner minimizer with the collision-adaptive theta rule (the proposed
// scheme). Rates are accumulated from the ratios directly so no division by
// theta ever happens.
InnerEval inner_eval_adaptive(const DualVars& nu, const Nsi& nsi,
                              const SystemConfig& cfg,
                              const std::vector<int>& band_of,
                              Phase2Mode mode);

// Inner minimizer for the stationary (sensing-free) objective: threshold
// rule per band, canonical earliest placement, stationary model objective.
InnerEval inner_eval_stationary(const DualVars& nu, const Nsi& nsi,
                                const SystemConfig& cfg,
                                const std::vector<int>& band_of,
                                Phase2Mode mode);

// Same quantities as the two evaluators above, accumulated in the same
// order, without building intervals or touching the heap.
LeanEval inner_eval_lean(const DualVars& nu, const Nsi& nsi,
                         const SystemConfig& cfg,
                         const std::vector<int>& band_of, Phase2Mode mode,
                         bool stationary, LeanScratch& scratch);

std::array<double, 4> make_subgradient(double r1, double r2, double ps,
                                       double pr, const SystemConfig& cfg);

inline double dual_value(double model_objective, const DualVars& nu,
                         const std::array<double, 4>& h) {
  return model_objective + nu.zeta * h[0] + nu.sigma * h[1] +
         nu.epsilon * h[2] + nu.eta * h[3];
}

inline DualVars project_step(const DualVars& nu, const std::array<double, 4>& h,
                             double s, double floor) {
  DualVars out;
  out.zeta = std::max(0.0, nu.zeta + s * h[0]);
  out.sigma = std::max(0.0, nu.sigma + s * h[1]);
  out.epsilon = std::max(floor, nu.epsilon + s * h[2]);
  out.eta = std::max(floor, nu.eta + s * h[3]);
  return out;
}

inline double nu_distance(const DualVars& a, const DualVars& b) {
  const double d0 = a.zeta - b.zeta;
  const double d1 = a.sigma - b.sigma;
  const double d2 = a.epsilon - b.epsilon;
  const double d3 = a.eta - b.eta;
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3);
}

inline double nu_norm(const DualVars& a) {
  return std::sqrt(a.zeta * a.zeta + a.sigma * a.sigma +
                   a.epsilon * a.epsilon + a.eta * a.eta);
}

inline double h_norm2(const std::array<double, 4>& h) {
  return h[0] * h[0] + h[1] * h[1] + h[2] * h[2] + h[3] * h[3];
}

inline bool candidate_feasible(double r1, double r2, double ps, double pr,
                               const SystemConfig& cfg, double tol) {
  const double rate_floor = cfg.r_min * (1.0 - tol);
  const double ps_cap = cfg.p_s_max * (1.0 + tol) + 1e-12;
  const double pr_cap = cfg.p_r_max * (1.0 + tol) + 1e-12;
  return r1 >= rate_floor && r2 >= rate_floor && ps <= ps_cap && pr <= pr_cap;
}

// Max of scaled primal violations and complementary-slackness products.
double kkt_residual(const std::array<double, 4>& h, const DualVars& nu,
                    const SystemConfig& cfg);

struct PolishResult {
  DualVars nu;
  bool converged = false;
};

// Saddle-point refinement over binding-pattern candidates. When several
// constraints bind simultaneously the subgradient iterates oscillate around
// the binding surface at the step amplitude, so no raw iterate reaches the
// feasibility tolerance; driving the active residuals to zero directly
// recovers the exact saddle point. Each binding pattern pins its inactive
// multipliers at zero (rates) or at the floor (powers) and solves the active
// rows, first by damped log-space Newton, then by cyclic per-row bisection
// for patterns the local method cannot reach. The budget caps h_at calls;
// callers whose h_at averages over samples keep it small.
PolishResult polish_duals(const DualVars& start,
                          const std::function<std::array<double, 4>(
                              const DualVars&)>& h_at,
                          const SystemConfig& cfg, double floor,
                          int eval_budget = 6000);

}  // namespace crn::detail
