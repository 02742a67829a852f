#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <vector>

#include "crn/netmodel.hpp"

namespace crn {

// Multipliers of the dualized constraints, in order: both rate constraints
// (zeta for the first phase..relay rate R1, sigma for R2), then the source
// and relay power budgets (epsilon, eta).
struct DualVars {
  double zeta = 0.0;
  double sigma = 0.0;
  double epsilon = 0.0;
  double eta = 0.0;
};

// Power-to-time ratios P/theta for one sub-channel: p1 for the source in
// phase 1, p2 for the source in phase 2, q for the relay. The inner
// minimizer is separable in these ratios, which is what makes the
// closed-form updates possible.
struct PowerRatios {
  double p1 = 0.0;
  double p2 = 0.0;
  double q = 0.0;
};

enum class SolveStatus { Optimal, Infeasible, MaxIterations };
const char* to_string(SolveStatus s);

// Raised by the ratio updates when a zero budget multiplier meets a positive
// rate multiplier, i.e. the inner problem is unbounded. The outer loop
// avoids this by flooring epsilon and eta.
class UnboundedInnerError : public std::runtime_error {
 public:
  explicit UnboundedInnerError(const char* what) : std::runtime_error(what) {}
};

struct SolverReport {
  Allocation allocation;
  DualVars duals;          // multipliers at the best dual value seen
  int iterations = 0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  double objective = 0.0;  // model objective of `allocation`, per unit t_f
  double r1 = 0.0;
  double r2 = 0.0;
  double source_power = 0.0;
  double relay_power = 0.0;
  double dual_bound = 0.0;  // best dual value (lower bound on the optimum)
};

struct IterationInfo {
  int k = 0;
  DualVars nu;
  std::array<double, 4> h{};
  double dual_value = 0.0;
  double best_feasible_objective = 0.0;
  bool has_feasible = false;
};

struct SolveOptions {
  double step0 = 1.0;        // diminishing step scale, s_k = step0/sqrt(k)
  int max_iter = 60000;
  double tol = 1e-9;         // stop on ||nu_{k+1} - nu_k||
  double gap_tol = 1e-8;     // stop on (best primal - best dual), relative
  bool polyak = true;        // refine with Polyak steps once a bound exists
  int warmup = 400;          // iterations before Polyak may engage
  int stall_iters = 4000;    // stop when the incumbent stops improving
  double dual_floor = 1e-12; // lower bound kept on epsilon and eta
  double nu_bound = 1e6;     // safety stop on the multiplier norm
  int infeasible_streak = 10000;
  double feas_tol = 1e-6;    // relative feasibility slack for candidates
  std::function<void(const IterationInfo&)> on_iteration;
};

// Marginal rate gained per unit of transmission time at post-split SNR u,
// i.e. the u-parameterized derivative of t -> t*log2(1 + u). Strictly
// increasing from 0; its inverse drives every theta update.
double rate_slope(double u);

// Closed-form inner minimizers for one sub-channel at fixed multipliers.
// ratio_phase1 solves zeta*a/(1+a*x) + sigma*g/(1+g*x) = epsilon*ln2 for the
// positive root (0 when no positive root exists); a = max(g_sr, g_sd),
// g = g_sd. Throws UnboundedInnerError when epsilon == 0 yet the left side
// is positive at infinity.
double ratio_phase1(const DualVars& nu, double g_sr, double g_sd);

// Phase-2 pair (p2, q). Tries the relay-active stationarity branch first,
// then the relay-silent branch; falls back to a bisection on p2 with the
// relay ratio eliminated in closed form when rounding leaves both branches
// inconsistent.
PowerRatios ratios_phase2(const DualVars& nu, double g_sd, double g_rd);

// Aligned transmission fraction for one band, from the stationarity of the
// collision cost against the weighted sum of rate slopes over the band's
// sub-channels; clamped to the phase window.
double theta_phase1(const DualVars& nu, const std::vector<PowerRatios>& ratios,
                    const Nsi& nsi, int sensed, int band,
                    const SystemConfig& cfg);
double theta_phase2_frame(const DualVars& nu,
                          const std::vector<PowerRatios>& ratios,
                          const Nsi& nsi, int sensed, int band,
                          const SystemConfig& cfg);

// Full inner minimizer at fixed multipliers: ratios, aligned fractions,
// powers reconstructed as ratio*theta, greedy window placement keyed by the
// frame-start sensing.
Allocation inner_solution(const DualVars& nu, const Nsi& nsi,
                          const SystemConfig& cfg);

// Constraint slacks of an allocation, the ascent direction of the dual:
// ((r_min-R1)/W, (r_min-R2)/W, Ps-Ps_max, Pr-Pr_max).
std::array<double, 4> subgradient(const Allocation& a, const Nsi& nsi,
                                  const SystemConfig& cfg);

// Projected subgradient ascent on the dual with best-feasible-iterate primal
// recovery. Optimal requires a feasible incumbent and either a closed
// duality gap or a converged multiplier sequence; Infeasible is declared
// when the dual value passes the collision-time cap (weak duality), rate
// slacks stay positive for `infeasible_streak` iterations, or the
// multipliers pass `nu_bound`, all with no feasible iterate ever seen.
SolverReport solve_frame(const Nsi& nsi, const SystemConfig& cfg,
                         const SolveOptions& opts = {});

// Same solver run with the relay links removed (g_sr = g_rd = 0), so all
// rate must come from the direct link.
SolverReport solve_relay_free(const Nsi& nsi, const SystemConfig& cfg,
                              const SolveOptions& opts = {});

// Baseline that ignores sensing: the collision model collapses to the
// stationary activity share, the theta update becomes a threshold rule
// (full window or nothing), and a feasible solution is recovered by scaling
// the thresholded fractions down to min(R1, R2) = r_min. Its report carries
// the stationary objective; Optimal means a feasible recovery exists and
// no infeasibility certificate was found.
SolverReport solve_sensing_free(const Nsi& nsi, const SystemConfig& cfg,
                                const SolveOptions& opts = {});

}  // namespace crn
