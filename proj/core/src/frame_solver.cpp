#include "crn/frame_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "crn/access.hpp"
#include "solver_detail.hpp"

namespace crn {
namespace {

constexpr double kLn2 = std::numbers::ln2;

void require_nonneg_duals(const DualVars& nu) {
  if (!(nu.zeta >= 0.0) || !(nu.sigma >= 0.0) || !(nu.epsilon >= 0.0) ||
      !(nu.eta >= 0.0))
    throw std::domain_error("multipliers must be non-negative");
}

void require_gain(double g) {
  if (!(g >= 0.0) || !std::isfinite(g))
    throw std::domain_error("channel gains must be non-negative and finite");
}

// Residual of the phase-2 stationarity in p2 with the relay ratio
// eliminated; increasing in p2.
double phase2_residual(const DualVars& nu, double g_sd, double g_rd,
                       double p2) {
  double q = 0.0;
  if (g_rd > 0.0 && nu.eta > 0.0)
    q = std::max(0.0, nu.sigma / (nu.eta * kLn2) - (1.0 + g_sd * p2) / g_rd);
  return nu.epsilon - nu.zeta * g_sd / ((1.0 + g_sd * p2) * kLn2) -
         nu.sigma * g_sd / ((1.0 + g_sd * p2 + g_rd * q) * kLn2);
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

double rate_slope(double u) {
  if (!(u >= 0.0))
    throw std::domain_error("rate slope defined for non-negative snr only");
  return std::log2(1.0 + u) - u / ((1.0 + u) * kLn2);
}

double ratio_phase1(const DualVars& nu, double g_sr, double g_sd) {
  require_nonneg_duals(nu);
  require_gain(g_sr);
  require_gain(g_sd);
  const double a = std::max(g_sr, g_sd);
  const double g = g_sd;
  const double c = nu.epsilon * kLn2;
  const double lhs0 = nu.zeta * a + nu.sigma * g;
  if (lhs0 <= c) return 0.0;
  if (!(c > 0.0))
    throw UnboundedInnerError("phase-1 ratio unbounded at zero power price");
  if (g <= 0.0) return nu.zeta / c - 1.0 / a;  // single water-filling term
  const double qa = c * a * g;
  const double qb = c * (a + g) - a * g * (nu.zeta + nu.sigma);
  const double qc = c - lhs0;  // negative here, so one positive root
  const double disc = std::sqrt(std::max(qb * qb - 4.0 * qa * qc, 0.0));
  return qb >= 0.0 ? -2.0 * qc / (qb + disc) : (disc - qb) / (2.0 * qa);
}

PowerRatios ratios_phase2(const DualVars& nu, double g_sd, double g_rd) {
  require_nonneg_duals(nu);
  require_gain(g_sd);
  require_gain(g_rd);
  PowerRatios out;
  if (nu.zeta + nu.sigma <= 0.0) return out;

  if (g_sd <= 0.0) {
    // Only the relay link can carry phase 2.
    if (nu.sigma > 0.0 && g_rd > 0.0) {
      if (!(nu.eta > 0.0))
        throw UnboundedInnerError("relay ratio unbounded at zero power price");
      out.q = std::max(0.0, nu.sigma / (nu.eta * kLn2) - 1.0 / g_rd);
    }
    return out;
  }

  // Relay-active stationarity branch.
  if (nu.sigma > 0.0 && g_rd > 0.0 && nu.eta > 0.0) {
    const double denom = nu.epsilon - nu.eta * (g_sd / g_rd);
    if (denom > 0.0) {
      const double p2 = std::max(0.0, nu.zeta / (denom * kLn2) - 1.0 / g_sd);
      const double q =
          nu.sigma / (nu.eta * kLn2) - (1.0 + g_sd * p2) / g_rd;
      if (q > 0.0) {
        out.p2 = p2;
        out.q = q;
        return out;
      }
    }
  }

  // Relay-silent branch.
  if (!(nu.epsilon > 0.0))
    throw UnboundedInnerError("phase-2 ratio unbounded at zero power price");
  {
    const double p2 =
        std::max(0.0, (nu.zeta + nu.sigma) / (nu.epsilon * kLn2) - 1.0 / g_sd);
    const double relay_pull =
        g_rd > 0.0 ? nu.sigma * g_rd / ((1.0 + g_sd * p2) * kLn2) : 0.0;
    if (relay_pull <= nu.eta * (1.0 + 1e-12)) {
      out.p2 = p2;
      return out;
    }
  }

  // Both branches rejected by rounding: bisect the eliminated system.
  double lo = 0.0;
  if (phase2_residual(nu, g_sd, g_rd, lo) >= 0.0) {
    out.p2 = 0.0;
  } else {
    double hi = 1.0;
    while (phase2_residual(nu, g_sd, g_rd, hi) < 0.0) {
      hi *= 2.0;
      if (hi > 1e18)
        throw UnboundedInnerError("phase-2 stationarity has no finite root");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (phase2_residual(nu, g_sd, g_rd, mid) < 0.0 ? lo : hi) = mid;
    }
    out.p2 = 0.5 * (lo + hi);
  }
  if (g_rd > 0.0 && nu.eta > 0.0)
    out.q = std::max(0.0, nu.sigma / (nu.eta * kLn2) -
                              (1.0 + g_sd * out.p2) / g_rd);
  return out;
}

namespace {

void require_band_state(int sensed, int band, const SystemConfig& cfg) {
  if (sensed != 0 && sensed != 1)
    throw std::domain_error("sensing outcome must be 0 or 1");
  if (band < 0 || band >= cfg.n_bands)
    throw std::domain_error("band index out of range");
}

}  // namespace

double theta_phase1(const DualVars& nu, const std::vector<PowerRatios>& ratios,
                    const Nsi& nsi, int sensed, int band,
                    const SystemConfig& cfg) {
  require_band_state(sensed, band, cfg);
  const double s =
      detail::band_slope_phase1(nu, ratios, nsi, cfg.band_map[band]);
  const TrafficParams& tp = cfg.band_traffic(band);
  const double bound = cfg.timing.alpha - cfg.timing.delta;
  return sensed == 0
             ? detail::theta_idle_rule(s, tp, cfg.timing.t_f, cfg.timing.delta,
                                       bound)
             : detail::theta_active_rule(s, tp, cfg.timing.t_f,
                                         cfg.timing.alpha, bound);
}

double theta_phase2_frame(const DualVars& nu,
                          const std::vector<PowerRatios>& ratios,
                          const Nsi& nsi, int sensed, int band,
                          const SystemConfig& cfg) {
  require_band_state(sensed, band, cfg);
  const double s =
      detail::band_slope_phase2(nu, ratios, nsi, cfg.band_map[band]);
  const TrafficParams& tp = cfg.band_traffic(band);
  const double bound = 1.0 - cfg.timing.alpha;
  return sensed == 0
             ? detail::theta_idle_rule(s, tp, cfg.timing.t_f, cfg.timing.alpha,
                                       bound)
             : detail::theta_active_rule(s, tp, cfg.timing.t_f, 1.0, bound);
}

Allocation inner_solution(const DualVars& nu, const Nsi& nsi,
                          const SystemConfig& cfg) {
  cfg.validate();
  nsi.validate(cfg);
  require_nonneg_duals(nu);
  const auto band_of = cfg.subchannel_band();
  return detail::inner_eval_adaptive(nu, nsi, cfg, band_of,
                                     detail::Phase2Mode::FrameSensing)
      .alloc;
}

std::array<double, 4> subgradient(const Allocation& a, const Nsi& nsi,
                                  const SystemConfig& cfg) {
  return detail::make_subgradient(rate_r1(a, nsi, cfg), rate_r2(a, nsi, cfg),
                                  a.source_power(), a.relay_power(), cfg);
}

namespace {

using detail::InnerEval;

// Scales a thresholded stationary solution onto the rate target; rates and
// powers are linear in the fractions at fixed ratios, so everything scales
// by the same factor.
bool recover_stationary(const InnerEval& ev, const SystemConfig& cfg,
                        double feas_tol, detail::Phase2Mode mode,
                        InnerEval& out) {
  out = InnerEval{};
  out.alloc = Allocation::zero(cfg);
  if (cfg.r_min <= 0.0) return true;  // silence is optimal and feasible
  const double rate = std::min(ev.r1, ev.r2);
  if (!(rate > 0.0)) return false;
  const double c = cfg.r_min / rate;
  if (c > 1.0 + 1e-12) return false;
  out = ev;
  for (auto& t : out.alloc.theta1_hat) t *= c;
  for (auto& t : out.alloc.theta2_hat) t *= c;
  for (auto& p : out.alloc.p_s1) p *= c;
  for (auto& p : out.alloc.p_s2) p *= c;
  for (auto& p : out.alloc.p_r) p *= c;
  for (int m = 0; m < cfg.n_bands; ++m) {
    out.alloc.intervals1[m] =
        place_phase1(out.alloc.theta1_hat[m], 0, cfg.timing);
    out.alloc.intervals2[m] =
        mode == detail::Phase2Mode::FrameSensing
            ? place_phase2(out.alloc.theta2_hat[m], 0, cfg.timing)
            : place_phase2_resensed(out.alloc.theta2_hat[m], 0, cfg.timing);
  }
  out.r1 = c * ev.r1;
  out.r2 = c * ev.r2;
  out.ps = c * ev.ps;
  out.pr = c * ev.pr;
  out.model_objective = c * ev.model_objective;
  return detail::candidate_feasible(out.r1, out.r2, out.ps, out.pr, cfg,
                                    feas_tol);
}

// With the relay-path rate constraint slack-priced (its multiplier at zero)
// the inner rule parks the relay, yet leftover relay budget can lift R2 at
// zero collision cost: power never enters the objective. Water-fill the
// leftover budget over the live phase-2 subchannels and recompute R2.
bool top_up_relay(InnerEval& ev, const Nsi& nsi, const SystemConfig& cfg,
                  const std::vector<int>& band_of) {
  if (!(ev.r2 < cfg.r_min)) return false;
  const double b_rem = cfg.p_r_max - ev.pr;
  if (!(b_rem > 1e-15)) return false;
  struct Channel {
    int n;
    double t2, knee;
  };
  std::vector<Channel> live;
  double t_sum = 0.0;
  double level_lo = std::numeric_limits<double>::infinity();
  double level_hi = 0.0;
  for (int n = 0; n < cfg.n_subchannels; ++n) {
    const double t2 = ev.alloc.theta2_hat[band_of[n]];
    if (!(t2 > 0.0) || !(nsi.g_rd[n] > 0.0)) continue;
    const double snr0 = 1.0 + (ev.alloc.p_s2[n] / t2) * nsi.g_sd[n] +
                        (ev.alloc.p_r[n] / t2) * nsi.g_rd[n];
    const double knee = snr0 / nsi.g_rd[n];
    live.push_back({n, t2, knee});
    t_sum += t2;
    level_lo = std::min(level_lo, knee);
    level_hi = std::max(level_hi, knee);
  }
  if (live.empty()) return false;
  level_hi += b_rem / t_sum;
  const auto spend = [&](double level) {
    double s = 0.0;
    for (const Channel& c : live) s += c.t2 * std::max(0.0, level - c.knee);
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (level_lo + level_hi);
    (spend(mid) < b_rem ? level_lo : level_hi) = mid;
  }
  for (const Channel& c : live) {
    const double add = c.t2 * std::max(0.0, level_hi - c.knee);
    ev.alloc.p_r[c.n] += add;
    ev.pr += add;
  }
  double r2 = 0.0;
  for (int n = 0; n < cfg.n_subchannels; ++n) {
    const double t1 = ev.alloc.theta1_hat[band_of[n]];
    const double t2 = ev.alloc.theta2_hat[band_of[n]];
    if (t1 > 0.0)
      r2 += t1 * std::log2(1.0 + (ev.alloc.p_s1[n] / t1) * nsi.g_sd[n]);
    if (t2 > 0.0)
      r2 += t2 * std::log2(1.0 + (ev.alloc.p_s2[n] / t2) * nsi.g_sd[n] +
                           (ev.alloc.p_r[n] / t2) * nsi.g_rd[n]);
  }
  ev.r2 = r2 * cfg.bandwidth;
  return true;
}

SolverReport run_dual_loop(const Nsi& nsi, const SystemConfig& cfg,
                           const SolveOptions& opts, bool stationary,
                           detail::Phase2Mode mode) {
  cfg.validate();
  nsi.validate(cfg);
  if (mode == detail::Phase2Mode::Resensed && !nsi.has_resensing())
    throw std::domain_error("solver mode requires phase-boundary sensing");
  if (opts.max_iter <= 0 || !(opts.step0 > 0.0))
    throw std::domain_error("solver options need positive step and budget");
  const auto band_of = cfg.subchannel_band();
  const double rate_scale = std::max(1.0, cfg.r_min / cfg.bandwidth);
  // No feasible frame can collide for more than one full window per phase
  // and band, so a dual value above this cap certifies an empty feasible
  // set by weak duality.
  const double obj_cap = 2.0 * static_cast<double>(cfg.n_bands) + 1.0;

  DualVars nu{1.0, 1.0, std::max(1.0, opts.dual_floor),
              std::max(1.0, opts.dual_floor)};
  SolverReport report;
  report.allocation = Allocation::zero(cfg);

  bool has_best = false;
  InnerEval best;
  std::array<double, 4> best_h{};
  DualVars best_cand_nu = nu;
  double best_dual = -std::numeric_limits<double>::infinity();
  DualVars best_dual_nu = nu;
  bool certified = false;
  int streak = 0;
  int last_improve = 0;
  int iters = 0;

  for (int k = 1; k <= opts.max_iter; ++k) {
    iters = k;
    const InnerEval ev =
        stationary
            ? detail::inner_eval_stationary(nu, nsi, cfg, band_of, mode)
            : detail::inner_eval_adaptive(nu, nsi, cfg, band_of, mode);
    const auto h =
        detail::make_subgradient(ev.r1, ev.r2, ev.ps, ev.pr, cfg);
    const double d = detail::dual_value(ev.model_objective, nu, h);
    if (d > best_dual) {
      best_dual = d;
      best_dual_nu = nu;
    }

    bool improved = false;
    if (stationary) {
      InnerEval cand;
      if (recover_stationary(ev, cfg, opts.feas_tol, mode, cand) &&
          (!has_best || cand.model_objective < best.model_objective)) {
        improved = !has_best ||
                   best.model_objective - cand.model_objective >
                       1e-12 * std::max(1.0, std::abs(best.model_objective));
        best = cand;
        best_h = detail::make_subgradient(cand.r1, cand.r2, cand.ps, cand.pr,
                                          cfg);
        best_cand_nu = nu;
        has_best = true;
      }
    } else {
      const InnerEval* cand = &ev;
      const std::array<double, 4>* cand_h = &h;
      InnerEval topped;
      std::array<double, 4> topped_h;
      if (ev.r2 < cfg.r_min) {
        topped = ev;
        if (top_up_relay(topped, nsi, cfg, band_of)) {
          topped_h = detail::make_subgradient(topped.r1, topped.r2, topped.ps,
                                              topped.pr, cfg);
          cand = &topped;
          cand_h = &topped_h;
        }
      }
      if (detail::candidate_feasible(cand->r1, cand->r2, cand->ps, cand->pr,
                                     cfg, opts.feas_tol) &&
          (!has_best || cand->model_objective < best.model_objective)) {
        improved = !has_best ||
                   best.model_objective - cand->model_objective >
                       1e-12 * std::max(1.0, std::abs(best.model_objective));
        best = *cand;
        best_h = *cand_h;
        best_cand_nu = nu;
        has_best = true;
      }
    }
    if (improved) last_improve = k;

    if (opts.on_iteration)
      opts.on_iteration(
          {k, nu, h, d, has_best ? best.model_objective : 0.0, has_best});

    if (has_best) {
      // A candidate whose objective sits below the dual bound is only
      // tolerance-feasible and understates the optimum; never certify on it.
      const double gap = best.model_objective - best_dual;
      if (!stationary && gap >= -1e-9 &&
          gap <= opts.gap_tol * std::max(1.0, std::abs(best.model_objective))) {
        certified = true;
        break;
      }
      if (k - last_improve >= opts.stall_iters && k > opts.warmup) break;
    }

    const bool rate_bad = h[0] > opts.feas_tol * rate_scale ||
                          h[1] > opts.feas_tol * rate_scale;
    streak = rate_bad ? streak + 1 : 0;
    if (!has_best && (streak >= opts.infeasible_streak ||
                      best_dual > obj_cap ||
                      detail::nu_norm(nu) > opts.nu_bound)) {
      report.status = SolveStatus::Infeasible;
      report.iterations = k;
      report.duals = best_dual_nu;
      report.dual_bound = best_dual;
      report.objective = std::numeric_limits<double>::quiet_NaN();
      return report;
    }

    // Polyak steps need the level above the current dual value; the best
    // candidate can sit below it (it is only tolerance-feasible), which
    // would freeze the iteration, so fall back to the diminishing rule.
    double s = 0.0;
    bool polyak_step = false;
    if (opts.polyak && !stationary && has_best && k > opts.warmup) {
      const double hn = detail::h_norm2(h);
      const double level = best.model_objective - d;
      if (hn > 0.0 && level > 0.0) {
        s = level / hn;
        polyak_step = true;
      }
    }
    if (!polyak_step) {
      // Normalized diminishing step: one floored multiplier meeting a huge
      // slack must not catapult the others.
      s = opts.step0 /
          (std::sqrt(static_cast<double>(k)) *
           std::max(1.0, std::sqrt(detail::h_norm2(h))));
    }
    const DualVars next = detail::project_step(nu, h, s, opts.dual_floor);
    const double moved = detail::nu_distance(next, nu);
    nu = next;
    // A vanishing Polyak step only means the level closed on the current
    // dual value, not that the iterate is stationary.
    if (!polyak_step && moved <= opts.tol) break;
  }

  // When several constraints bind at once, subgradient iterates straddle the
  // binding surface at the step amplitude and may never pass the feasibility
  // tolerance. A Newton polish on the active multipliers lands on the saddle
  // point directly; its inner solution then enters the usual candidate path.
  if (!stationary && !certified) {
    const auto h_at = [&](const DualVars& v) {
      const InnerEval e =
          detail::inner_eval_adaptive(v, nsi, cfg, band_of, mode);
      return detail::make_subgradient(e.r1, e.r2, e.ps, e.pr, cfg);
    };
    const DualVars starts[2] = {best_dual_nu, best_cand_nu};
    const int n_starts = has_best ? 2 : 1;
    for (int s = 0; s < n_starts; ++s) {
      // The inner evaluation is closed-form here, so the refinement can
      // afford the bisection-sweep stage; sample-averaged callers cannot.
      const detail::PolishResult po =
          detail::polish_duals(starts[s], h_at, cfg, opts.dual_floor, 150000);
      if (!po.converged) continue;
      InnerEval ev =
          detail::inner_eval_adaptive(po.nu, nsi, cfg, band_of, mode);
      auto h = detail::make_subgradient(ev.r1, ev.r2, ev.ps, ev.pr, cfg);
      // The dual value must use the untouched inner minimizer; the relay
      // top-up only repairs the extracted candidate.
      const double d = detail::dual_value(ev.model_objective, po.nu, h);
      if (d > best_dual) {
        best_dual = d;
        best_dual_nu = po.nu;
      }
      if (ev.r2 < cfg.r_min && top_up_relay(ev, nsi, cfg, band_of))
        h = detail::make_subgradient(ev.r1, ev.r2, ev.ps, ev.pr, cfg);
      // An essentially exact candidate also displaces an incumbent whose
      // objective undercuts the polished dual value: that incumbent rode a
      // small constraint violation, not a genuinely better allocation.
      const bool exact =
          detail::candidate_feasible(ev.r1, ev.r2, ev.ps, ev.pr, cfg, 1e-9);
      const bool replace =
          exact ? (!has_best || best.model_objective < d - 1e-9 ||
                   ev.model_objective < best.model_objective)
                : (detail::candidate_feasible(ev.r1, ev.r2, ev.ps, ev.pr,
                                              cfg, opts.feas_tol) &&
                   (!has_best || ev.model_objective < best.model_objective));
      if (replace) {
        best = ev;
        best_h = h;
        has_best = true;
      }
      if (has_best) {
        const double gap = best.model_objective - best_dual;
        if (gap >= -1e-9 &&
            gap <= opts.gap_tol *
                       std::max(1.0, std::abs(best.model_objective)))
          break;
      }
    }
  }

  report.iterations = iters;
  report.duals = best_dual_nu;
  report.dual_bound = best_dual;
  if (!has_best) {
    report.status = SolveStatus::MaxIterations;
    report.objective = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.allocation = best.alloc;
  report.objective = best.model_objective;
  report.r1 = best.r1;
  report.r2 = best.r2;
  report.source_power = best.ps;
  report.relay_power = best.pr;
  report.kkt_residual = detail::kkt_residual(best_h, best_dual_nu, cfg);
  if (stationary) {
    report.status = SolveStatus::Optimal;
  } else {
    const double gap = best.model_objective - best_dual;
    report.status =
        certified ||
                (gap >= -1e-9 &&
                 gap <= 1e-4 * std::max(1.0, std::abs(best.model_objective)))
            ? SolveStatus::Optimal
            : SolveStatus::MaxIterations;
  }
  return report;
}

}  // namespace

SolverReport solve_frame(const Nsi& nsi, const SystemConfig& cfg,
                         const SolveOptions& opts) {
  return run_dual_loop(nsi, cfg, opts, false,
                       detail::Phase2Mode::FrameSensing);
}

SolverReport solve_relay_free(const Nsi& nsi, const SystemConfig& cfg,
                              const SolveOptions& opts) {
  Nsi cut = nsi;
  std::fill(cut.g_sr.begin(), cut.g_sr.end(), 0.0);
  std::fill(cut.g_rd.begin(), cut.g_rd.end(), 0.0);
  return run_dual_loop(cut, cfg, opts, false,
                       detail::Phase2Mode::FrameSensing);
}

SolverReport solve_sensing_free(const Nsi& nsi, const SystemConfig& cfg,
                                const SolveOptions& opts) {
  return run_dual_loop(nsi, cfg, opts, true,
                       detail::Phase2Mode::FrameSensing);
}

}  // namespace crn
