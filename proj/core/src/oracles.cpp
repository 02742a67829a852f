#include "crn/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "crn/access.hpp"
#include "crn/rng.hpp"

namespace crn::oracle {
namespace {

constexpr double kLn2 = std::numbers::ln2;

double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double b,
             double fa, double fm, double fb, double whole, double tol,
             int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Occupancy probability written through the spectral form of the two-state
// generator rather than the transition matrix.
double occupancy(const TrafficParams& tp, double t, double t0, int state0) {
  const double pia = tp.lambda / (tp.lambda + tp.mu);
  const double decay = std::exp(-(tp.lambda + tp.mu) * (t - t0));
  return pia + ((state0 == 1 ? 1.0 : 0.0) - pia) * decay;
}

double window_cost(double lo, double hi, int state0, double t0,
                   const TrafficParams& tp, double tol) {
  if (hi <= lo) return 0.0;
  return integrate([&](double t) { return occupancy(tp, t, t0, state0); }, lo,
                   hi, tol);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (!(b >= a)) throw std::domain_error("integration bounds inverted");
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return adapt(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48);
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0))
    throw std::domain_error("root not bracketed");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double collision_by_quadrature(const IntervalSet& spans, int state0, double t0,
                               const TrafficParams& tp, double tol) {
  tp.validate();
  if (state0 != 0 && state0 != 1)
    throw std::domain_error("state must be 0 or 1");
  double total = 0.0;
  for (const auto& piece : spans.pieces()) {
    if (piece.lo < t0 - 1e-9)
      throw std::domain_error("window precedes the conditioning time");
    total += window_cost(std::max(piece.lo, t0), piece.hi, state0, t0, tp, tol);
  }
  return total;
}

PlacementSearch search_placement(double theta, double t_f, double win_lo,
                                 double win_hi, int state0, double t0,
                                 const TrafficParams& tp, int grid) {
  if (grid < 2) throw std::domain_error("placement grid too small");
  const double len = theta * t_f;
  if (len > win_hi - win_lo + 1e-12)
    throw std::domain_error("window does not fit the phase");
  PlacementSearch out;
  if (theta <= 0.0) return out;
  const double span = std::max(0.0, (win_hi - win_lo) - len);
  out.best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double s = win_lo + span * i / grid;
    const double cost = window_cost(s, s + len, state0, t0, tp, 1e-10);
    if (cost < out.best_cost) {
      out.best_cost = cost;
      out.best_start = s;
    }
  }
  // Equal split into two windows; a coarser grid keeps the pair search
  // affordable and it only needs to show splits cannot beat the best single
  // window.
  const int pair_grid = std::min(grid, 60);
  const double half = 0.5 * len;
  const double pair_span = (win_hi - win_lo) - half;
  out.best_split_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= pair_grid; ++i) {
    const double s1 = win_lo + pair_span * i / pair_grid;
    if (s1 + half > win_hi + 1e-12) continue;
    const double c1 = window_cost(s1, s1 + half, state0, t0, tp, 1e-9);
    for (int j = 0; j <= pair_grid; ++j) {
      const double s2 = win_lo + pair_span * j / pair_grid;
      if (s2 < s1 + half) continue;
      if (s2 + half > win_hi + 1e-12) continue;
      const double c = c1 + window_cost(s2, s2 + half, state0, t0, tp, 1e-9);
      if (c < out.best_split_cost) out.best_split_cost = c;
    }
  }
  return out;
}

McEstimate mc_collision(const IntervalSet& spans, std::optional<int> state0,
                        double duration, const TrafficParams& tp,
                        std::uint64_t seed, int reps) {
  tp.validate();
  if (reps < 2) throw std::domain_error("need at least two replications");
  const double pia = tp.lambda / (tp.lambda + tp.mu);
  Rng rng(seed, derive_stream(seed, 0x6d635061ull));
  double acc = 0.0;
  double acc2 = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    int state = state0 ? *state0 : (rng.uniform01() < pia ? 1 : 0);
    double t = 0.0;
    double overlap = 0.0;
    while (t < duration) {
      const double dwell = rng.exponential(state == 1 ? tp.mu : tp.lambda);
      const double seg_end = std::min(t + dwell, duration);
      if (state == 1) overlap += spans.overlap(t, seg_end);
      t += dwell;
      state ^= 1;
    }
    acc += overlap;
    acc2 += overlap * overlap;
  }
  McEstimate out;
  out.mean = acc / reps;
  const double var =
      std::max(0.0, (acc2 - reps * out.mean * out.mean) / (reps - 1.0));
  out.std_err = std::sqrt(var / reps);
  return out;
}

namespace {

// Flat variable layout for the reference solver.
struct Vars {
  std::vector<double> th1, th2;      // per band
  std::vector<double> ps1, ps2, pr;  // per sub-channel
};

struct Workspace {
  const Nsi& nsi;
  const SystemConfig& cfg;
  bool resensed;
  double bound1;
  double bound2;
  std::vector<int> band_of;
  // Multipliers and penalty of the augmented Lagrangian.
  std::array<double, 4> v{};
  double rho = 10.0;
};

constexpr double kThetaFloor = 1e-9;

double rate_term_oracle(double theta, double snr_sum) {
  return theta * std::log2(1.0 + snr_sum);
}

// R1/W, R2/W, power sums.
void eval_rates(const Workspace& w, const Vars& z, double& r1w, double& r2w,
                double& ps, double& pr) {
  r1w = r2w = ps = pr = 0.0;
  const auto& nsi = w.nsi;
  for (int n = 0; n < w.cfg.n_subchannels; ++n) {
    const int b = w.band_of[n];
    const double t1 = z.th1[b];
    const double t2 = z.th2[b];
    const double a1 = std::max(nsi.g_sr[n], nsi.g_sd[n]);
    r1w += rate_term_oracle(t1, z.ps1[n] * a1 / t1) +
           rate_term_oracle(t2, z.ps2[n] * nsi.g_sd[n] / t2);
    r2w += rate_term_oracle(t1, z.ps1[n] * nsi.g_sd[n] / t1) +
           rate_term_oracle(t2, (z.ps2[n] * nsi.g_sd[n] +
                                 z.pr[n] * nsi.g_rd[n]) /
                                    t2);
    ps += z.ps1[n] + z.ps2[n];
    pr += z.pr[n];
  }
}

// Model objective per unit t_f via quadrature over the placed windows.
double eval_objective(const Workspace& w, const Vars& z, double tol) {
  const auto& cfg = w.cfg;
  double total = 0.0;
  for (int m = 0; m < cfg.n_bands; ++m) {
    const TrafficParams& tp = cfg.band_traffic(m);
    const auto w1 = place_phase1(z.th1[m], w.nsi.x[m], cfg.timing);
    total += collision_by_quadrature(w1, w.nsi.x[m], 0.0, tp, tol);
    if (w.resensed) {
      const auto w2 = place_phase2_resensed(z.th2[m], w.nsi.y[m], cfg.timing);
      total += collision_by_quadrature(w2, w.nsi.y[m],
                                       cfg.timing.alpha * cfg.timing.t_f, tp,
                                       tol);
    } else {
      const auto w2 = place_phase2(z.th2[m], w.nsi.x[m], cfg.timing);
      total += collision_by_quadrature(w2, w.nsi.x[m], 0.0, tp, tol);
    }
  }
  return total / cfg.timing.t_f;
}

std::array<double, 4> constraints(const Workspace& w, double r1w, double r2w,
                                  double ps, double pr) {
  const auto& cfg = w.cfg;
  return {cfg.r_min / cfg.bandwidth - r1w, cfg.r_min / cfg.bandwidth - r2w,
          ps - cfg.p_s_max, pr - cfg.p_r_max};
}

double augmented(const Workspace& w, const Vars& z, double tol) {
  double r1w, r2w, ps, pr;
  eval_rates(w, z, r1w, r2w, ps, pr);
  const auto c = constraints(w, r1w, r2w, ps, pr);
  double al = eval_objective(w, z, tol);
  for (int i = 0; i < 4; ++i) {
    const double shifted = std::max(0.0, w.v[i] / w.rho + c[i]);
    al += 0.5 * w.rho * (shifted * shifted - (w.v[i] / w.rho) * (w.v[i] / w.rho));
  }
  return al;
}

// d(objective)/d(theta) by the Leibniz rule: the window grows at its start
// or its end depending on the placement rule, so the slope is the occupancy
// at the moving edge.
double objective_theta_slope(const Workspace& w, int m, int phase,
                             const Vars& z) {
  const auto& cfg = w.cfg;
  const TrafficParams& tp = cfg.band_traffic(m);
  const double t_f = cfg.timing.t_f;
  if (phase == 1) {
    const int x = w.nsi.x[m];
    const double edge = x == 0 ? (cfg.timing.delta + z.th1[m]) * t_f
                               : (cfg.timing.alpha - z.th1[m]) * t_f;
    return occupancy(tp, edge, 0.0, x);
  }
  if (w.resensed) {
    const int y = w.nsi.y[m];
    const double t0 = cfg.timing.alpha * t_f;
    const double edge =
        y == 0 ? (cfg.timing.alpha + cfg.timing.delta + z.th2[m]) * t_f
               : (1.0 - z.th2[m]) * t_f;
    return occupancy(tp, edge, t0, y);
  }
  const int x = w.nsi.x[m];
  const double edge = x == 0 ? (cfg.timing.alpha + z.th2[m]) * t_f
                             : (1.0 - z.th2[m]) * t_f;
  return occupancy(tp, edge, 0.0, x);
}

void eval_gradient(const Workspace& w, const Vars& z, Vars& g) {
  const auto& cfg = w.cfg;
  const auto& nsi = w.nsi;
  double r1w, r2w, ps, pr;
  eval_rates(w, z, r1w, r2w, ps, pr);
  const auto c = constraints(w, r1w, r2w, ps, pr);
  std::array<double, 4> mult;
  for (int i = 0; i < 4; ++i) mult[i] = std::max(0.0, w.v[i] + w.rho * c[i]);

  std::fill(g.th1.begin(), g.th1.end(), 0.0);
  std::fill(g.th2.begin(), g.th2.end(), 0.0);
  for (int m = 0; m < cfg.n_bands; ++m) {
    g.th1[m] = objective_theta_slope(w, m, 1, z);
    g.th2[m] = objective_theta_slope(w, m, 2, z);
  }
  for (int n = 0; n < cfg.n_subchannels; ++n) {
    const int b = w.band_of[n];
    const double t1 = z.th1[b];
    const double t2 = z.th2[b];
    const double a1 = std::max(nsi.g_sr[n], nsi.g_sd[n]);
    const double u1a = z.ps1[n] * a1 / t1;
    const double u1g = z.ps1[n] * nsi.g_sd[n] / t1;
    const double u2g = z.ps2[n] * nsi.g_sd[n] / t2;
    const double u2c =
        (z.ps2[n] * nsi.g_sd[n] + z.pr[n] * nsi.g_rd[n]) / t2;
    // d(R1/W), d(R2/W) terms fold into the theta and power slots with the
    // active constraint multipliers (constraints carry a minus sign on the
    // rates).
    const double m1 = mult[0];
    const double m2 = mult[1];
    g.th1[b] -= m1 * (std::log2(1.0 + u1a) - u1a / ((1.0 + u1a) * kLn2)) +
                m2 * (std::log2(1.0 + u1g) - u1g / ((1.0 + u1g) * kLn2));
    g.th2[b] -= m1 * (std::log2(1.0 + u2g) - u2g / ((1.0 + u2g) * kLn2)) +
                m2 * (std::log2(1.0 + u2c) - u2c / ((1.0 + u2c) * kLn2));
    g.ps1[n] = -m1 * a1 / ((1.0 + u1a) * kLn2) -
               m2 * nsi.g_sd[n] / ((1.0 + u1g) * kLn2) + mult[2];
    g.ps2[n] = -m1 * nsi.g_sd[n] / ((1.0 + u2g) * kLn2) -
               m2 * nsi.g_sd[n] / ((1.0 + u2c) * kLn2) + mult[2];
    g.pr[n] = -m2 * nsi.g_rd[n] / ((1.0 + u2c) * kLn2) + mult[3];
  }
}

void project(const Workspace& w, Vars& z) {
  for (auto& t : z.th1) t = std::clamp(t, kThetaFloor, w.bound1);
  for (auto& t : z.th2) t = std::clamp(t, kThetaFloor, w.bound2);
  for (auto& p : z.ps1) p = std::max(0.0, p);
  for (auto& p : z.ps2) p = std::max(0.0, p);
  for (auto& p : z.pr) p = std::max(0.0, p);
}

double grad_norm2(const Vars& g) {
  double s = 0.0;
  for (double v : g.th1) s += v * v;
  for (double v : g.th2) s += v * v;
  for (double v : g.ps1) s += v * v;
  for (double v : g.ps2) s += v * v;
  for (double v : g.pr) s += v * v;
  return s;
}

}  // namespace

ReferenceSolution reference_solve(const Nsi& nsi, const SystemConfig& cfg,
                                  bool resensed_phase2, int outer_iters,
                                  int inner_iters) {
  cfg.validate();
  nsi.validate(cfg);
  if (resensed_phase2 && !nsi.has_resensing())
    throw std::domain_error("re-sensed reference solve requires nsi.y");

  Workspace w{nsi, cfg, resensed_phase2,
              cfg.timing.alpha - cfg.timing.delta,
              resensed_phase2
                  ? 1.0 - cfg.timing.alpha - cfg.timing.delta
                  : 1.0 - cfg.timing.alpha,
              cfg.subchannel_band()};

  Vars z;
  z.th1.assign(cfg.n_bands, 0.5 * w.bound1);
  z.th2.assign(cfg.n_bands, 0.5 * w.bound2);
  z.ps1.assign(cfg.n_subchannels, cfg.p_s_max / (2.0 * cfg.n_subchannels));
  z.ps2.assign(cfg.n_subchannels, cfg.p_s_max / (2.0 * cfg.n_subchannels));
  z.pr.assign(cfg.n_subchannels, cfg.p_r_max / cfg.n_subchannels);
  Vars g = z;

  const double quad_tol = 1e-9;
  double prev_violation = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < outer_iters; ++outer) {
    double step = 0.1;
    double al = augmented(w, z, quad_tol);
    for (int it = 0; it < inner_iters; ++it) {
      eval_gradient(w, z, g);
      const double gn2 = grad_norm2(g);
      if (gn2 < 1e-20) break;
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Vars cand = z;
        for (int m = 0; m < cfg.n_bands; ++m) {
          cand.th1[m] -= step * g.th1[m];
          cand.th2[m] -= step * g.th2[m];
        }
        for (int n = 0; n < cfg.n_subchannels; ++n) {
          cand.ps1[n] -= step * g.ps1[n];
          cand.ps2[n] -= step * g.ps2[n];
          cand.pr[n] -= step * g.pr[n];
        }
        project(w, cand);
        const double cand_al = augmented(w, cand, quad_tol);
        if (cand_al <= al - 1e-12) {
          z = cand;
          al = cand_al;
          step = std::min(step * 1.25, 10.0);
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }

    double r1w, r2w, ps, pr;
    eval_rates(w, z, r1w, r2w, ps, pr);
    const auto c = constraints(w, r1w, r2w, ps, pr);
    double violation = 0.0;
    for (int i = 0; i < 4; ++i) {
      w.v[i] = std::max(0.0, w.v[i] + w.rho * c[i]);
      violation = std::max(violation, c[i]);
    }
    if (violation <= 1e-8) break;
    if (violation > 0.25 * prev_violation) w.rho = std::min(w.rho * 2.0, 1e8);
    prev_violation = violation;
  }

  ReferenceSolution out;
  out.theta1 = z.th1;
  out.theta2 = z.th2;
  out.p_s1 = z.ps1;
  out.p_s2 = z.ps2;
  out.p_r = z.pr;
  double r1w, r2w, ps, pr;
  eval_rates(w, z, r1w, r2w, ps, pr);
  out.r1 = r1w * cfg.bandwidth;
  out.r2 = r2w * cfg.bandwidth;
  out.source_power = ps;
  out.relay_power = pr;
  out.objective = eval_objective(w, z, 1e-11);
  const auto c = constraints(w, r1w, r2w, ps, pr);
  out.feasible = c[0] <= 1e-6 && c[1] <= 1e-6 && c[2] <= 1e-6 && c[3] <= 1e-6;
  return out;
}

}  // namespace crn::oracle
