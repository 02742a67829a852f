// Acceptance gate: nine end-to-end checks, one summary line each. Every
// tolerance is pinned here in code; a failed line names the quantity and
// the margin that broke it. Exit status is nonzero when any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "crn/access.hpp"
#include "crn/config_json.hpp"
#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"
#include "crn/harness.hpp"
#include "crn/netmodel.hpp"
#include "crn/oracles.hpp"
#include "crn/rng.hpp"
#include "crn/traffic.hpp"

using namespace crn;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void require(Outcome& out, bool ok, const std::string& what) {
  if (ok) return;
  out.pass = false;
  if (!out.detail.empty()) out.detail += "; ";
  out.detail += what;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  const double n = static_cast<double>(v.size());
  s.mean = sum / n;
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(ss / ((n - 1.0) * n));
  return s;
}

std::vector<double> model_values(const TrainedPolicy& policy,
                                 const EvalFrames& data) {
  std::vector<double> out(data.nsi.size(), 0.0);
  for (std::size_t f = 0; f < data.nsi.size(); ++f) {
    const Allocation a = policy_allocation(policy, data.nsi[f]);
    out[f] = policy_model_collision(policy, data.nsi[f], a);
  }
  return out;
}

// The three window families share one test harness: placement, the matching
// closed form, the conditioning time and the conditioning state source.
struct Family {
  const char* name;
  double bound;  // admissible fraction of t_f
  double t0;     // conditioning time of the closed form
  IntervalSet (*place)(double, int, const FrameTiming&);
  double (*closed)(double, int, const TrafficParams&, const FrameTiming&);
};

FrameTiming default_timing() {
  FrameTiming tm;
  tm.t_f = 1.0;
  tm.alpha = 0.5;
  tm.delta = 0.1;
  return tm;
}

std::vector<Family> families(const FrameTiming& tm) {
  return {
      {"phase1", tm.alpha - tm.delta, 0.0, &place_phase1,
       &expected_collision_phase1},
      {"phase2", 1.0 - tm.alpha, 0.0, &place_phase2,
       &expected_collision_phase2},
      {"phase2-resensed", 1.0 - tm.alpha - tm.delta, tm.alpha * tm.t_f,
       &place_phase2_resensed, &expected_collision_phase2_resensed},
  };
}

// Criterion 1: the collision closed forms agree with direct quadrature of
// the occupancy probability to 1e-9 and with a one-million-path Monte Carlo
// run to three standard errors, over ten fractions and both sensed states
// for each of the three window families.
Outcome criterion1() {
  Outcome out;
  const TrafficParams tp{1.0, 1.0};
  const FrameTiming tm = default_timing();
  const std::uint64_t salt = 0xACC1;
  double worst_quad = 0.0;
  double worst_dev = 0.0;
  int fam_index = 0;
  for (const Family& fam : families(tm)) {
    for (int sensed : {0, 1}) {
      for (int i = 1; i <= 10; ++i) {
        const double theta = fam.bound * static_cast<double>(i) / 10.0;
        const double closed = fam.closed(theta, sensed, tp, tm);
        const IntervalSet spans = fam.place(theta, sensed, tm);
        const double quad =
            oracle::collision_by_quadrature(spans, sensed, fam.t0, tp, 1e-12);
        worst_quad = std::max(worst_quad, std::fabs(closed - quad));

        IntervalSet shifted;
        for (const auto& piece : spans.pieces())
          shifted.add(piece.lo - fam.t0, piece.hi - fam.t0);
        const oracle::McEstimate mc = oracle::mc_collision(
            shifted, sensed, tm.t_f - fam.t0, tp,
            derive_stream(salt, fam_index, sensed, i), 1000000);
        const double dev = mc.std_err > 0.0
                               ? std::fabs(closed - mc.mean) / mc.std_err
                               : (closed == mc.mean ? 0.0 : 1e9);
        worst_dev = std::max(worst_dev, dev);
      }
    }
    ++fam_index;
  }
  require(out, worst_quad <= 1e-9,
          "closed form vs quadrature off by " + num(worst_quad));
  require(out, worst_dev <= 3.0,
          "closed form vs Monte Carlo off by " + num(worst_dev) + " sigma");
  out.detail = "3 families x 10 fractions x 2 states: max |closed-quad| " +
               num(worst_quad) + " (tol 1e-9), max MC deviation " +
               num(worst_dev) + " sigma (tol 3, 1e6 paths); " + out.detail;
  return out;
}

// Criterion 2: no schedule from a 200-start exhaustive search, including
// the best equal-measure two-window split, undercuts the greedy analytic
// placement by more than 1e-6 * t_f in any family, fraction or state.
Outcome criterion2() {
  Outcome out;
  const TrafficParams tp{1.0, 1.0};
  const FrameTiming tm = default_timing();
  double worst = -1e300;
  for (const Family& fam : families(tm)) {
    double lo = 0.0, hi = 0.0;
    if (std::strcmp(fam.name, "phase1") == 0) {
      lo = tm.delta * tm.t_f;
      hi = tm.alpha * tm.t_f;
    } else if (std::strcmp(fam.name, "phase2") == 0) {
      lo = tm.alpha * tm.t_f;
      hi = tm.t_f;
    } else {
      lo = (tm.alpha + tm.delta) * tm.t_f;
      hi = tm.t_f;
    }
    for (int sensed : {0, 1}) {
      for (double theta : {0.1, 0.2, 0.3}) {
        const double greedy = fam.closed(theta, sensed, tp, tm);
        const oracle::PlacementSearch search = oracle::search_placement(
            theta, tm.t_f, lo, hi, sensed, fam.t0, tp, 200);
        const double best =
            std::min(search.best_cost, search.best_split_cost);
        worst = std::max(worst, greedy - best);
      }
    }
  }
  require(out, worst <= 1e-6,
          "a searched schedule beats the analytic placement by " + num(worst));
  out.detail = "18 searched cells: max (greedy - searched) " + num(worst) +
               " (tol 1e-6); " + out.detail;
  return out;
}

// Criterion 3: the closed-form frame solver matches the generic
// augmented-Lagrangian projected-gradient reference on twenty random
// two-band instances plus the built-in one: objective within 1e-4 relative,
// stationarity residual at most 1e-6, constraints met to 1e-6 relative.
Outcome criterion3() {
  Outcome out;
  SystemConfig cfg = default_frame_config();
  const double cap =
      static_cast<double>(cfg.n_subchannels) * cfg.bandwidth;
  double worst_rel = 0.0;
  double worst_kkt = 0.0;
  double worst_feas = -1e300;
  int compared = 0;
  for (int k = 0; k <= 20; ++k) {
    Nsi nsi;
    if (k == 20) {
      nsi = default_frame_nsi();
      cfg.r_min = 0.3 * cap;
    } else {
      sample_gains(ChannelModel{}, cfg, 20240707,
                   static_cast<std::uint64_t>(k), nsi);
      sample_sensing(cfg, 20240707, static_cast<std::uint64_t>(k), nsi);
      nsi.y.clear();
      const double v = 0.10 + 0.35 * static_cast<double>(k) / 19.0;
      cfg.r_min = v * cap;
    }
    const SolverReport rep = solve_frame(nsi, cfg);
    const oracle::ReferenceSolution ref =
        oracle::reference_solve(nsi, cfg, false, 90, 8000);
    if (rep.status != SolveStatus::Optimal) {
      require(out, false,
              "instance " + std::to_string(k) + " did not solve: " +
                  to_string(rep.status));
      continue;
    }
    if (!ref.feasible) {
      require(out, false,
              "reference failed to converge on instance " + std::to_string(k));
      continue;
    }
    ++compared;
    const double rel = std::fabs(rep.objective - ref.objective) /
                       std::max(std::fabs(ref.objective), 1e-9);
    worst_rel = std::max(worst_rel, rel);
    worst_kkt = std::max(worst_kkt, rep.kkt_residual);
    const double rate_tol = 1e-6 * std::max(1.0, cfg.r_min);
    worst_feas = std::max({worst_feas, cfg.r_min - rep.r1 - rate_tol,
                           cfg.r_min - rep.r2 - rate_tol,
                           rep.source_power - cfg.p_s_max * (1.0 + 1e-6),
                           rep.relay_power - cfg.p_r_max * (1.0 + 1e-6)});
  }
  require(out, compared == 21, "only " + std::to_string(compared) +
                                   " of 21 instances compared");
  require(out, worst_rel <= 1e-4,
          "objective off the reference by " + num(worst_rel) + " relative");
  require(out, worst_kkt <= 1e-6,
          "stationarity residual " + num(worst_kkt));
  require(out, worst_feas <= 0.0,
          "constraint violation " + num(worst_feas));
  out.detail = "21 instances: max |obj-ref|/|ref| " + num(worst_rel) +
               " (tol 1e-4), max KKT residual " + num(worst_kkt) +
               " (tol 1e-6), max constraint excess " + num(worst_feas) +
               " (tol 0); " + out.detail;
  return out;
}

// Criterion 4: on the built-in single-frame sweep the idle band's phase-1
// fraction saturates at exactly alpha - delta and stays there, the
// active-sensed band first activates at a per-sub-channel rate of
// 0.42 +/- 0.05 bit/s/Hz, and the adaptive solver never collides more than
// the sensing-free policy anywhere or the relay-free policy above 0.07.
Outcome criterion4() {
  Outcome out;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::FrameSweep;
  spec.frames = 2;  // only the analytic columns matter here
  const std::vector<ResultRow> rows = run_frame_sweep(spec);
  const SystemConfig cfg = default_frame_config();
  const double saturated = cfg.timing.alpha - cfg.timing.delta;

  double first_saturation = -1.0;
  bool stays_saturated = true;
  double first_activation = -1.0;
  double worst_vs_sf = -1e300;
  double worst_vs_rf = -1e300;
  int feasible_points = 0;
  for (std::size_t i = 0; i + 2 < rows.size(); i += 3) {
    const ResultRow& prop = rows[i];
    const ResultRow& rf = rows[i + 1];
    const ResultRow& sf = rows[i + 2];
    if (!prop.feasible) continue;
    ++feasible_points;
    if (prop.theta1[0] == saturated) {
      if (first_saturation < 0.0) first_saturation = prop.sweep_value;
    } else if (first_saturation >= 0.0) {
      stays_saturated = false;
    }
    if (first_activation < 0.0 &&
        (prop.theta1[1] > 1e-9 || prop.theta2[1] > 1e-9))
      first_activation = prop.sweep_value;
    if (sf.feasible)
      worst_vs_sf = std::max(worst_vs_sf, prop.collision - sf.collision);
    if (rf.feasible && prop.sweep_value >= 0.07 - 1e-12)
      worst_vs_rf = std::max(worst_vs_rf, prop.collision - rf.collision);
  }
  require(out, feasible_points > 0, "no feasible sweep point");
  require(out, first_saturation >= 0.0,
          "idle-band phase-1 fraction never reaches alpha - delta exactly");
  require(out, stays_saturated,
          "idle-band phase-1 fraction left the bound after saturating");
  require(out, first_activation >= 0.37 - 1e-12 &&
                   first_activation <= 0.47 + 1e-12,
          "active band switch-on at " + num(first_activation) +
              " (wanted 0.42 +/- 0.05)");
  require(out, worst_vs_sf <= 1e-8,
          "adaptive exceeds sensing-free by " + num(worst_vs_sf));
  require(out, worst_vs_rf <= 1e-8,
          "adaptive exceeds relay-free by " + num(worst_vs_rf) +
              " above 0.07");
  out.detail = "fraction saturates at " + num(saturated) + " from rate " +
               num(first_saturation) + "; active band on at " +
               num(first_activation) +
               " (window 0.37..0.47); max adaptive excess vs sensing-free " +
               num(worst_vs_sf) + ", vs relay-free " + num(worst_vs_rf) +
               " (tol 1e-8); " + out.detail;
  return out;
}

// Criterion 5: over 500 evaluation frames the mean collisions order as
// two-sensing <= phase-1-only <= sensing-free, each gap at least three
// paired standard errors, at per-sub-channel targets 0.6, 1.7 and 2.8;
// relay-free training reports the 2.8 target infeasible.
Outcome criterion5() {
  Outcome out;
  SystemConfig cfg = default_ergodic_config();
  const double cap =
      static_cast<double>(cfg.n_subchannels) * cfg.bandwidth;
  const ChannelModel ch;
  TrainingOptions topts;
  const EvalFrames data = draw_eval_frames(cfg, ch, 2024, 500);
  std::string gaps;
  for (double v : {0.6, 1.7, 2.8}) {
    cfg.r_min = v * cap;
    const TrainedPolicy ts =
        train_offline(cfg, Strategy::TwoSensing, 2024, topts);
    const TrainedPolicy p1 =
        train_offline(cfg, Strategy::Phase1Only, 2024, topts);
    const TrainedPolicy sf =
        train_offline(cfg, Strategy::SensingFree, 2024, topts);
    if (ts.status != SolveStatus::Optimal ||
        p1.status != SolveStatus::Optimal ||
        sf.status != SolveStatus::Optimal) {
      require(out, false, "training failed at target " + num(v));
      continue;
    }
    const std::vector<double> m_ts = model_values(ts, data);
    const std::vector<double> m_p1 = model_values(p1, data);
    const std::vector<double> m_sf = model_values(sf, data);
    std::vector<double> d1(m_ts.size()), d2(m_ts.size());
    for (std::size_t f = 0; f < m_ts.size(); ++f) {
      d1[f] = m_p1[f] - m_ts[f];
      d2[f] = m_sf[f] - m_p1[f];
    }
    const Stats s1 = stats(d1);
    const Stats s2 = stats(d2);
    require(out, s1.mean >= 3.0 * s1.se,
            "two-sensing vs phase-1-only gap " + num(s1.mean) + " +/- " +
                num(s1.se) + " not significant at target " + num(v));
    require(out, s2.mean >= 3.0 * s2.se,
            "phase-1-only vs sensing-free gap " + num(s2.mean) + " +/- " +
                num(s2.se) + " not significant at target " + num(v));
    if (!gaps.empty()) gaps += ", ";
    gaps += num(v) + ": " + num(s1.mean) + "/" + num(s1.se) + " and " +
            num(s2.mean) + "/" + num(s2.se);
  }
  cfg.r_min = 2.8 * cap;
  const TrainedPolicy rf =
      train_offline(cfg, Strategy::RelayFree, 2024, topts);
  require(out, rf.status == SolveStatus::Infeasible,
          std::string("relay-free at 2.8 reported ") + to_string(rf.status));
  out.detail = "ordering gaps (mean/se, need mean >= 3 se) at " + gaps +
               "; relay-free at 2.8: " + to_string(rf.status) + "; " +
               out.detail;
  return out;
}

// Criterion 6: the sensing-free mean collision is constant in the
// switching-rate multiplier to 1e-9, and the paired sensing-free minus
// two-sensing gap never grows from one multiplier to the next by more than
// three combined standard errors.
Outcome criterion6() {
  Outcome out;
  SystemConfig cfg = default_ergodic_config();
  cfg.r_min = 1.7 * static_cast<double>(cfg.n_subchannels) * cfg.bandwidth;
  const ChannelModel ch;
  TrainingOptions topts;
  std::vector<double> sf_mean, gap_mean, gap_se;
  for (double varsigma : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double rate = 2.0 * varsigma / cfg.timing.t_f;
    for (TrafficParams& tp : cfg.traffic) tp = TrafficParams{rate, rate};
    const TrainedPolicy ts =
        train_offline(cfg, Strategy::TwoSensing, 2024, topts);
    const TrainedPolicy sf =
        train_offline(cfg, Strategy::SensingFree, 2024, topts);
    if (ts.status != SolveStatus::Optimal ||
        sf.status != SolveStatus::Optimal) {
      require(out, false,
              "training failed at multiplier " + num(varsigma));
      continue;
    }
    const EvalFrames data = draw_eval_frames(cfg, ch, 2024, 500);
    const std::vector<double> m_ts = model_values(ts, data);
    const std::vector<double> m_sf = model_values(sf, data);
    std::vector<double> d(m_ts.size());
    for (std::size_t f = 0; f < m_ts.size(); ++f) d[f] = m_sf[f] - m_ts[f];
    const Stats sd = stats(d);
    sf_mean.push_back(stats(m_sf).mean);
    gap_mean.push_back(sd.mean);
    gap_se.push_back(sd.se);
  }
  require(out, sf_mean.size() == 5, "not every multiplier trained");
  double worst_const = 0.0;
  for (double m : sf_mean)
    worst_const = std::max(worst_const, std::fabs(m - sf_mean.front()));
  require(out, worst_const <= 1e-9,
          "sensing-free mean moved by " + num(worst_const) +
              " across multipliers");
  double worst_growth = -1e300;
  for (std::size_t i = 0; i + 1 < gap_mean.size(); ++i) {
    const double slack =
        3.0 * std::sqrt(gap_se[i] * gap_se[i] + gap_se[i + 1] * gap_se[i + 1]);
    worst_growth =
        std::max(worst_growth, gap_mean[i + 1] - gap_mean[i] - slack);
  }
  require(out, worst_growth <= 0.0,
          "the adaptive advantage grew with faster switching by " +
              num(worst_growth) + " beyond 3 sigma");
  out.detail = "sensing-free spread " + num(worst_const) +
               " (tol 1e-9); max significant gap growth " +
               num(worst_growth) + " (tol 0, 3 sigma slack); " + out.detail;
  return out;
}

// Criterion 7: a one-percent sensing error inflates the realized mean
// collision by less than ten percent at targets 0.6 and 1.7, and the
// zero-error run is bit-identical to the error-free evaluation pipeline.
Outcome criterion7() {
  Outcome out;
  for (double v : {0.6, 1.7}) {
    ExperimentSpec spec;
    spec.kind = ExperimentKind::SensingErrorSweep;
    spec.grid = {0.0, 0.01};
    spec.frames = 500;
    spec.rate_target = v;
    const std::vector<ResultRow> rows = run_sensing_error_sweep(spec);
    if (rows.size() != 2 || !rows[0].feasible || !rows[1].feasible) {
      require(out, false, "sweep did not produce two feasible rows at " +
                              num(v));
      continue;
    }
    const double inflation =
        rows[1].collision_realized / rows[0].collision_realized;
    require(out, inflation < 1.10,
            "one-percent flips inflate the realized mean by " +
                num((inflation - 1.0) * 100.0) + "% at target " + num(v));

    SystemConfig cfg = default_ergodic_config();
    cfg.r_min = v * static_cast<double>(cfg.n_subchannels) * cfg.bandwidth;
    TrainingOptions topts = spec.training;
    topts.channel = spec.channel;
    const TrainedPolicy policy =
        train_offline(cfg, Strategy::TwoSensing, spec.master_seed, topts);
    const EvalFrames data =
        draw_eval_frames(cfg, spec.channel, spec.master_seed, spec.frames);
    double realized_sum = 0.0;
    for (int f = 0; f < spec.frames; ++f) {
      const Allocation a = policy_allocation(policy, data.nsi[f]);
      double c = 0.0;
      for (int m = 0; m < cfg.n_bands; ++m)
        c += collision_time(data.paths[f][m],
                            unite(a.intervals1[m], a.intervals2[m]));
      realized_sum += c;
    }
    const double error_free = realized_sum /
                              static_cast<double>(spec.frames) /
                              cfg.timing.t_f;
    require(out, rows[0].collision_realized == error_free,
            "zero-error run is not bit-identical to the error-free "
            "pipeline at target " + num(v));
    if (!out.detail.empty() && out.pass) out.detail += ", ";
    if (out.pass)
      out.detail += "target " + num(v) + ": +" +
                    num((inflation - 1.0) * 100.0) + "% (tol +10%), p=0 exact";
  }
  return out;
}

// Criterion 8: the table-driven online update reproduces the full re-sensed
// inner solve bit for bit on a thousand fresh frames; the measured per-frame
// cost is reported against the informational 10 microsecond mark.
Outcome criterion8() {
  Outcome out;
  SystemConfig cfg = default_ergodic_config();
  cfg.r_min = 1.7 * static_cast<double>(cfg.n_subchannels) * cfg.bandwidth;
  TrainingOptions topts;
  const TrainedPolicy policy =
      train_offline(cfg, Strategy::TwoSensing, 2024, topts);
  require(out, policy.status == SolveStatus::Optimal,
          std::string("training reported ") + to_string(policy.status));
  if (!out.pass) return out;

  const EvalFrames data = draw_eval_frames(cfg, policy.channel, 4321, 1000);
  std::vector<ParameterPacket> packets;
  packets.reserve(data.nsi.size());
  for (const Nsi& nsi : data.nsi) packets.push_back(build_packet(policy, nsi));

  int mismatches = 0;
  for (std::size_t f = 0; f < data.nsi.size(); ++f) {
    const Nsi& nsi = data.nsi[f];
    const Allocation fast = online_update(packets[f], nsi.x, nsi.y, cfg);
    const Allocation full = inner_solution_resensed(policy.duals, nsi, cfg);
    const bool same = fast.p_s1 == full.p_s1 && fast.p_s2 == full.p_s2 &&
                      fast.p_r == full.p_r &&
                      fast.theta1_hat == full.theta1_hat &&
                      fast.theta2_hat == full.theta2_hat &&
                      fast.intervals1 == full.intervals1 &&
                      fast.intervals2 == full.intervals2;
    if (!same) ++mismatches;
  }
  require(out, mismatches == 0,
          std::to_string(mismatches) + " of 1000 frames differ");

  double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t f = 0; f < data.nsi.size(); ++f) {
    const Allocation fast =
        online_update(packets[f], data.nsi[f].x, data.nsi[f].y, cfg);
    sink += fast.theta1_hat[0];
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double micros =
      std::chrono::duration<double, std::micro>(t1 - t0).count() /
      static_cast<double>(data.nsi.size());
  out.detail = "1000 frames bit-identical to the inner solve; " +
               num(micros) + " us per update (informational mark 10 us, "
               "checksum " + num(sink) + "); " + out.detail;
  return out;
}

// Criterion 9: every experiment, run twice at reduced size with the same
// master seed, emits byte-identical CSV both as a string and through the
// file writer.
Outcome criterion9() {
  Outcome out;
  std::vector<ExperimentSpec> specs(4);
  specs[0].kind = ExperimentKind::FrameSweep;
  specs[0].grid = {0.2, 0.5};
  specs[0].frames = 60;
  specs[1].kind = ExperimentKind::ErgodicSweep;
  specs[1].grid = {0.6};
  specs[1].frames = 60;
  specs[1].training.sample_count = 150;
  specs[1].training.max_iter = 600;
  specs[2].kind = ExperimentKind::VarsigmaSweep;
  specs[2].grid = {0.5};
  specs[2].frames = 40;
  specs[2].rate_target = 0.8;
  specs[2].training.sample_count = 150;
  specs[2].training.max_iter = 600;
  specs[3].kind = ExperimentKind::SensingErrorSweep;
  specs[3].grid = {0.0, 0.05};
  specs[3].frames = 40;
  specs[3].rate_target = 0.8;
  specs[3].training.sample_count = 150;
  specs[3].training.max_iter = 600;

  for (const ExperimentSpec& spec : specs) {
    const std::string csv1 = rows_to_csv(run_experiment(spec));
    const std::string csv2 = rows_to_csv(run_experiment(spec));
    require(out, csv1 == csv2,
            std::string(to_string(spec.kind)) + " CSV changed between runs");
    const std::string path1 =
        std::string("acceptance_") + to_string(spec.kind) + "_1.csv";
    const std::string path2 =
        std::string("acceptance_") + to_string(spec.kind) + "_2.csv";
    write_rows(run_experiment(spec), path1, "csv");
    write_rows(run_experiment(spec), path2, "csv");
    std::string f1, f2;
    {
      std::FILE* fp = std::fopen(path1.c_str(), "rb");
      require(out, fp != nullptr, "cannot reopen " + path1);
      if (fp) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, fp)) > 0)
          f1.append(buf, n);
        std::fclose(fp);
      }
      fp = std::fopen(path2.c_str(), "rb");
      require(out, fp != nullptr, "cannot reopen " + path2);
      if (fp) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, fp)) > 0)
          f2.append(buf, n);
        std::fclose(fp);
      }
    }
    require(out, !f1.empty() && f1 == f2,
            std::string(to_string(spec.kind)) + " files differ on disk");
    require(out, f1 == csv1,
            std::string(to_string(spec.kind)) +
                " file bytes differ from the in-memory CSV");
    std::remove(path1.c_str());
    std::remove(path2.c_str());
  }
  if (out.pass)
    out.detail = "4 experiments x 2 runs: byte-identical CSV in memory and "
                 "on disk";
  return out;
}

struct Criterion {
  int id;
  Outcome (*run)();
  double budget_seconds;
};

const Criterion kCriteria[] = {
    {1, &criterion1, 60.0},    {2, &criterion2, 120.0},
    {3, &criterion3, 300.0},   {4, &criterion4, 600.0},
    {5, &criterion5, 1200.0},  {6, &criterion6, 1800.0},
    {7, &criterion7, 600.0},   {8, &criterion8, 300.0},
    {9, &criterion9, 900.0},
};

}  // namespace

int main(int argc, char** argv) {
  int selected = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }

  bool all_pass = true;
  for (const Criterion& c : kCriteria) {
    if (selected != 0 && c.id != selected) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    if (secs > c.budget_seconds) {
      out.pass = false;
      if (!out.detail.empty()) out.detail += "; ";
      out.detail += "exceeded the " + num(c.budget_seconds) +
                    " second budget";
    }
    std::printf("[%s] criterion %d: %s [%.1fs]\n",
                out.pass ? "PASS" : "FAIL", c.id, out.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
