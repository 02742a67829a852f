#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "crn/access.hpp"
#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"
#include "crn/harness.hpp"
#include "crn/oracles.hpp"
#include "crn/rng.hpp"

using namespace crn;

namespace {

constexpr double kLn2 = std::numbers::ln2;

DualVars duals(double zeta, double sigma, double epsilon, double eta) {
  DualVars nu;
  nu.zeta = zeta;
  nu.sigma = sigma;
  nu.epsilon = epsilon;
  nu.eta = eta;
  return nu;
}

// Lagrangian of an allocation from public pieces only: model collision per
// unit t_f plus the multiplier-weighted constraint slacks.
double lagrangian(const Allocation& a, const DualVars& nu, const Nsi& nsi,
                  const SystemConfig& cfg) {
  const double interference =
      frame_interference(a.theta1_hat, a.theta2_hat, nsi.x, cfg);
  const std::array<double, 4> h = subgradient(a, nsi, cfg);
  return interference / cfg.timing.t_f + nu.zeta * h[0] + nu.sigma * h[1] +
         nu.epsilon * h[2] + nu.eta * h[3];
}

bool feasible_report(const SolverReport& rep, const SystemConfig& cfg,
                     double tol = 1e-6) {
  return rep.r1 >= cfg.r_min - tol * std::max(1.0, cfg.r_min) &&
         rep.r2 >= cfg.r_min - tol * std::max(1.0, cfg.r_min) &&
         rep.source_power <= cfg.p_s_max * (1.0 + tol) + 1e-12 &&
         rep.relay_power <= cfg.p_r_max * (1.0 + tol) + 1e-12;
}

}  // namespace

TEST_SUITE("frame_solver") {

TEST_CASE("rate slope is the fixed-power time derivative of the rate term") {
  CHECK(rate_slope(0.0) == 0.0);
  for (double u : {0.3, 1.0, 7.5}) {
    const double direct = std::log2(1.0 + u) - u / ((1.0 + u) * kLn2);
    CHECK(rate_slope(u) == doctest::Approx(direct).epsilon(1e-14));
  }
  // Against a finite difference of theta * log2(1 + P g / theta) at P g = u.
  const double u = 2.0, h = 1e-7;
  const auto f = [&](double t) { return t * std::log2(1.0 + u / t); };
  CHECK(rate_slope(u) ==
        doctest::Approx((f(1.0 + h) - f(1.0 - h)) / (2.0 * h)).epsilon(1e-6));
  CHECK(rate_slope(1.0) > rate_slope(0.5));
  CHECK_THROWS_AS(rate_slope(-0.1), std::domain_error);
}

TEST_CASE("phase-1 ratio satisfies its stationarity equation") {
  const std::vector<DualVars> nus = {
      duals(1.0, 1.0, 1.0, 1.0), duals(2.5, 0.3, 0.8, 0.1),
      duals(0.2, 1.7, 2.1, 0.5), duals(4.0, 0.0, 1.3, 1.0)};
  const std::vector<std::array<double, 2>> gains = {
      {1.3, 0.4}, {50.0, 3.0}, {0.2, 0.9}, {5.0, 5.0}};
  for (const DualVars& nu : nus) {
    for (const auto& g : gains) {
      const double a = std::max(g[0], g[1]);
      const double x = ratio_phase1(nu, g[0], g[1]);
      const auto lhs = [&](double v) {
        return nu.zeta * a / (1.0 + a * v) +
               nu.sigma * g[1] / (1.0 + g[1] * v);
      };
      if (x > 0.0) {
        CHECK(lhs(x) == doctest::Approx(nu.epsilon * kLn2).epsilon(1e-10));
        // Independent route: bisection on the same equation.
        const double root = oracle::find_root(
            [&](double v) { return lhs(v) - nu.epsilon * kLn2; }, 0.0,
            1e6, 1e-12);
        CHECK(x == doctest::Approx(root).epsilon(1e-8));
      } else {
        CHECK(lhs(0.0) <= nu.epsilon * kLn2 * (1.0 + 1e-12));
      }
    }
  }
  CHECK(ratio_phase1(duals(0.1, 0.1, 100.0, 1.0), 1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(ratio_phase1(duals(1.0, 0.0, 0.0, 1.0), 2.0, 1.0),
                  UnboundedInnerError);
}

TEST_CASE("phase-2 ratios satisfy the joint optimality conditions") {
  const std::vector<DualVars> nus = {
      duals(1.0, 1.0, 1.0, 1.0),   duals(0.4, 2.0, 0.7, 0.2),
      duals(2.0, 0.6, 1.5, 3.0),   duals(0.0, 1.2, 0.9, 0.05),
      duals(1.1, 0.9, 0.25, 0.35), duals(3.0, 3.0, 2.0, 1e-12)};
  const std::vector<std::array<double, 2>> gains = {
      {0.4, 1.3}, {3.0, 50.0}, {2.0, 0.0}, {0.0, 4.0}, {1.0, 1.0}};
  for (const DualVars& nu : nus) {
    for (const auto& g : gains) {
      const double gsd = g[0], grd = g[1];
      const PowerRatios r = ratios_phase2(nu, gsd, grd);
      CHECK(r.p2 >= 0.0);
      CHECK(r.q >= 0.0);
      const double combined = 1.0 + gsd * r.p2 + grd * r.q;
      const double own = 1.0 + gsd * r.p2;
      const double tol = 1e-8;
      if (r.q > 0.0) {
        CHECK(nu.sigma * grd / combined ==
              doctest::Approx(nu.eta * kLn2).epsilon(1e-8));
      } else if (grd > 0.0) {
        CHECK(nu.sigma * grd / own <= nu.eta * kLn2 * (1.0 + 1e-9) + tol);
      }
      if (gsd > 0.0) {
        const double pull =
            nu.zeta * gsd / own + nu.sigma * gsd / combined;
        if (r.p2 > 0.0) {
          CHECK(pull == doctest::Approx(nu.epsilon * kLn2).epsilon(1e-8));
        } else {
          CHECK(pull <= nu.epsilon * kLn2 * (1.0 + 1e-9) + tol);
        }
      }

      // Independent route: coarse grid plus refinement on the scalarized
      // phase-2 contribution per unit of transmission time.
      const auto cost = [&](double p2, double q) {
        return nu.epsilon * p2 + nu.eta * q -
               nu.zeta * std::log2(1.0 + gsd * p2) -
               nu.sigma * std::log2(1.0 + gsd * p2 + grd * q);
      };
      if (nu.eta >= 0.05 && nu.epsilon > 0.0) {
        double grid_best = cost(0.0, 0.0);
        for (int i = 0; i <= 140; ++i)
          for (int j = 0; j <= 140; ++j)
            grid_best = std::min(grid_best, cost(i * 0.05, j * 0.05));
        CHECK(cost(r.p2, r.q) <= grid_best + 1e-6);
      }
    }
  }
  CHECK_THROWS_AS(ratios_phase2(duals(0.0, 1.0, 1.0, 0.0), 0.0, 2.0),
                  UnboundedInnerError);
  CHECK_THROWS_AS(ratios_phase2(duals(1.0, 1.0, 0.0, 5.0), 1.0, 0.0),
                  UnboundedInnerError);
}

TEST_CASE("the inner solution minimizes the Lagrangian over perturbations") {
  const SystemConfig cfg = [] {
    SystemConfig c = default_frame_config();
    c.r_min = 0.6;
    return c;
  }();
  const Nsi nsi = default_frame_nsi();
  for (const DualVars& nu :
       {duals(1.0, 1.0, 1.0, 1.0), duals(0.6, 1.8, 0.9, 0.4),
        duals(2.2, 0.4, 1.4, 2.0)}) {
    const Allocation opt = inner_solution(nu, nsi, cfg);
    opt.validate(cfg);
    const double l_opt = lagrangian(opt, nu, nsi, cfg);

    // Scale one band's phase fraction with powers fixed.
    for (int m = 0; m < cfg.n_bands; ++m) {
      for (double factor : {0.6, 0.9, 1.1, 1.4}) {
        Allocation pert = opt;
        const double bound1 = cfg.timing.alpha - cfg.timing.delta;
        const double t1 = std::min(opt.theta1_hat[m] * factor, bound1);
        pert.theta1_hat[m] = t1;
        pert.intervals1[m] = place_phase1(t1, nsi.x[m], cfg.timing);
        if (t1 > 0.0 || opt.theta1_hat[m] == 0.0)
          CHECK(lagrangian(pert, nu, nsi, cfg) >= l_opt - 1e-9);

        pert = opt;
        const double bound2 = 1.0 - cfg.timing.alpha;
        const double t2 = std::min(opt.theta2_hat[m] * factor, bound2);
        pert.theta2_hat[m] = t2;
        pert.intervals2[m] = place_phase2(t2, nsi.x[m], cfg.timing);
        if (t2 > 0.0 || opt.theta2_hat[m] == 0.0)
          CHECK(lagrangian(pert, nu, nsi, cfg) >= l_opt - 1e-9);
      }
    }

    // Scale individual powers with fractions fixed.
    for (int n = 0; n < cfg.n_subchannels; ++n) {
      for (double factor : {0.7, 0.95, 1.05, 1.3}) {
        for (int field : {0, 1, 2}) {
          Allocation pert = opt;
          std::vector<double>& p =
              field == 0 ? pert.p_s1 : field == 1 ? pert.p_s2 : pert.p_r;
          p[n] *= factor;
          CHECK(lagrangian(pert, nu, nsi, cfg) >= l_opt - 1e-9);
        }
      }
    }

    // Random joint perturbations staying inside the windows.
    Rng rng(31, 0);
    for (int trial = 0; trial < 40; ++trial) {
      Allocation pert = opt;
      for (int m = 0; m < cfg.n_bands; ++m) {
        const double b1 = cfg.timing.alpha - cfg.timing.delta;
        const double b2 = 1.0 - cfg.timing.alpha;
        pert.theta1_hat[m] = std::min(
            b1, std::max(0.0, opt.theta1_hat[m] *
                                  (0.8 + 0.4 * rng.uniform01())));
        pert.theta2_hat[m] = std::min(
            b2, std::max(0.0, opt.theta2_hat[m] *
                                  (0.8 + 0.4 * rng.uniform01())));
        pert.intervals1[m] =
            place_phase1(pert.theta1_hat[m], nsi.x[m], cfg.timing);
        pert.intervals2[m] =
            place_phase2(pert.theta2_hat[m], nsi.x[m], cfg.timing);
      }
      for (int n = 0; n < cfg.n_subchannels; ++n) {
        pert.p_s1[n] *= 0.8 + 0.4 * rng.uniform01();
        pert.p_s2[n] *= 0.8 + 0.4 * rng.uniform01();
        pert.p_r[n] *= 0.8 + 0.4 * rng.uniform01();
      }
      CHECK(lagrangian(pert, nu, nsi, cfg) >= l_opt - 1e-9);
    }
  }
}

TEST_CASE("frame solve is feasible, near-optimal and deterministic") {
  SystemConfig cfg = default_frame_config();
  const Nsi nsi = default_frame_nsi();
  for (double r : {0.3, 0.8, 1.0}) {
    cfg.r_min = r;
    const SolverReport rep = solve_frame(nsi, cfg);
    CHECK(rep.status == SolveStatus::Optimal);
    CHECK(feasible_report(rep, cfg));
    CHECK(rep.kkt_residual <= 1e-6);
    CHECK(rep.objective >= rep.dual_bound - 1e-6);
    rep.allocation.validate(cfg);

    const SolverReport again = solve_frame(nsi, cfg);
    CHECK(rep.objective == again.objective);
    CHECK(rep.duals.zeta == again.duals.zeta);
    CHECK(rep.iterations == again.iterations);
  }
}

TEST_CASE("frame solve matches the generic reference on a scaled frame") {
  SystemConfig cfg = default_frame_config();
  cfg.timing.t_f = 2.0;  // pins the absolute-vs-fraction unit handling
  cfg.r_min = 0.5;
  const Nsi nsi = default_frame_nsi();
  const SolverReport rep = solve_frame(nsi, cfg);
  REQUIRE(rep.status == SolveStatus::Optimal);
  const oracle::ReferenceSolution ref = oracle::reference_solve(nsi, cfg, false);
  REQUIRE(ref.feasible);
  CHECK(rep.objective ==
        doctest::Approx(ref.objective).epsilon(2e-3).scale(1.0));
}

TEST_CASE("an unreachable rate target is reported infeasible") {
  SystemConfig cfg = default_frame_config();
  cfg.r_min = 10.0;
  SolveOptions opts;
  opts.infeasible_streak = 2000;
  const SolverReport rep = solve_frame(default_frame_nsi(), cfg, opts);
  CHECK(rep.status == SolveStatus::Infeasible);
  CHECK(std::isnan(rep.objective));
}

TEST_CASE("sensing-free recovery lands exactly on the rate target") {
  SystemConfig cfg = default_frame_config();
  const Nsi nsi = default_frame_nsi();
  for (double r : {0.4, 0.9}) {
    cfg.r_min = r;
    const SolverReport rep = solve_sensing_free(nsi, cfg);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(std::min(rep.r1, rep.r2) == doctest::Approx(r).epsilon(1e-9));
    rep.allocation.validate(cfg);
    // Canonical earliest-start placement whatever was sensed.
    for (int m = 0; m < cfg.n_bands; ++m) {
      if (rep.allocation.theta1_hat[m] > 0.0)
        CHECK(rep.allocation.intervals1[m].pieces()[0].lo ==
              doctest::Approx(cfg.timing.delta * cfg.timing.t_f)
                  .epsilon(1e-12));
      if (rep.allocation.theta2_hat[m] > 0.0)
        CHECK(rep.allocation.intervals2[m].pieces()[0].lo ==
              doctest::Approx(cfg.timing.alpha * cfg.timing.t_f)
                  .epsilon(1e-12));
    }
    // The sensing-adaptive solver can only do better on the true
    // conditional collision.
    const SolverReport adaptive = solve_frame(nsi, cfg);
    REQUIRE(adaptive.status == SolveStatus::Optimal);
    double adaptive_coll = 0.0, fixed_coll = 0.0;
    for (int m = 0; m < cfg.n_bands; ++m) {
      adaptive_coll += expected_active_time(
          unite(adaptive.allocation.intervals1[m],
                adaptive.allocation.intervals2[m]),
          nsi.x[m], cfg.band_traffic(m));
      fixed_coll += expected_active_time(
          unite(rep.allocation.intervals1[m], rep.allocation.intervals2[m]),
          nsi.x[m], cfg.band_traffic(m));
    }
    CHECK(adaptive_coll <= fixed_coll + 1e-8);
  }
  // A zero rate target makes silence optimal.
  cfg.r_min = 0.0;
  const SolverReport silent = solve_sensing_free(nsi, cfg);
  CHECK(silent.status == SolveStatus::Optimal);
  CHECK(silent.objective == 0.0);
  CHECK(silent.source_power == 0.0);
}

TEST_CASE("relay-free solving zeroes the relay and can only cost more") {
  // Direct transmission caps out near 0.59 total on the built-in links, so
  // the target must sit below that for the baseline to stay feasible.
  SystemConfig cfg = default_frame_config();
  cfg.r_min = 0.45;
  const Nsi nsi = default_frame_nsi();
  const SolverReport rf = solve_relay_free(nsi, cfg);
  REQUIRE(rf.status == SolveStatus::Optimal);
  for (double p : rf.allocation.p_r) CHECK(p == 0.0);
  const SolverReport full = solve_frame(nsi, cfg);
  REQUIRE(full.status == SolveStatus::Optimal);
  CHECK(full.objective <= rf.objective + 1e-8);
}

TEST_CASE("a one-sample training run retraces the frame solver bit for bit") {
  SystemConfig cfg = default_ergodic_config();
  cfg.r_min = 0.9 * cfg.n_subchannels * cfg.bandwidth;
  const std::uint64_t seed = 4242;
  const ChannelModel ch;
  Nsi nsi;
  sample_gains(ch, cfg, seed, 0, nsi);
  sample_sensing(cfg, seed, 0, nsi);

  TrainingOptions topts;
  topts.sample_count = 1;
  topts.max_iter = 1500;
  topts.channel = ch;
  std::vector<IterationInfo> trained;
  topts.on_iteration = [&](const IterationInfo& it) { trained.push_back(it); };

  SolveOptions sopts;
  sopts.step0 = 1.0 / (1.0 + cfg.r_min / cfg.bandwidth);
  sopts.max_iter = topts.max_iter;
  sopts.tol = topts.tol;
  sopts.gap_tol = topts.gap_tol;
  sopts.polyak = topts.polyak;
  sopts.warmup = topts.warmup;
  sopts.stall_iters = topts.stall_iters;
  sopts.dual_floor = topts.dual_floor;
  sopts.nu_bound = topts.nu_bound;
  sopts.infeasible_streak = topts.infeasible_streak;
  sopts.feas_tol = topts.feas_tol;
  std::vector<IterationInfo> solved;
  sopts.on_iteration = [&](const IterationInfo& it) { solved.push_back(it); };

  // Phase1Only keys phase 2 off the frame-start sensing, exactly like the
  // frame solver, so a K = 1 training run must retrace it.
  const TrainedPolicy policy =
      train_offline(cfg, Strategy::Phase1Only, seed, topts);
  const SolverReport rep = solve_frame(nsi, cfg, sopts);

  REQUIRE(trained.size() == solved.size());
  for (std::size_t i = 0; i < trained.size(); ++i) {
    CHECK(trained[i].k == solved[i].k);
    CHECK(trained[i].nu.zeta == solved[i].nu.zeta);
    CHECK(trained[i].nu.sigma == solved[i].nu.sigma);
    CHECK(trained[i].nu.epsilon == solved[i].nu.epsilon);
    CHECK(trained[i].nu.eta == solved[i].nu.eta);
    CHECK(trained[i].h == solved[i].h);
    CHECK(trained[i].dual_value == solved[i].dual_value);
    CHECK(trained[i].best_feasible_objective ==
          solved[i].best_feasible_objective);
    CHECK(trained[i].has_feasible == solved[i].has_feasible);
  }
  CHECK(policy.status == rep.status);
  if (policy.status == SolveStatus::Optimal)
    CHECK(policy.expected_objective == rep.objective);
}

}  // TEST_SUITE
