#include "crn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "crn/access.hpp"
#include "crn/oracles.hpp"

namespace crn {

namespace {

constexpr std::uint64_t kEvalTag = 0x4556414c;     // evaluation draws
constexpr std::uint64_t kPathTag = 0x50415448;     // per-band traffic paths
constexpr std::uint64_t kFlipSrcTag = 0x464c5053;  // sensing flips, source
constexpr std::uint64_t kFlipRelTag = 0x464c5052;  // sensing flips, relay

const double kNan = std::numeric_limits<double>::quiet_NaN();

ResultRow base_row(double sweep, const std::string& strategy, int bands) {
  ResultRow row;
  row.sweep_value = sweep;
  row.strategy = strategy;
  row.collision = kNan;
  row.collision_realized = kNan;
  row.std_err = kNan;
  row.std_err_model = kNan;
  row.std_err_paired = kNan;
  row.objective = kNan;
  row.r1 = kNan;
  row.r2 = kNan;
  row.source_power = kNan;
  row.relay_power = kNan;
  row.theta1.assign(bands, kNan);
  row.theta2.assign(bands, kNan);
  return row;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  const double n = static_cast<double>(v.size());
  out.se = std::sqrt(ss / ((n - 1.0) * n));
  return out;
}

SystemConfig pick_config(const ExperimentSpec& spec, SystemConfig fallback) {
  if (spec.config.n_subchannels == 0) return fallback;
  SystemConfig cfg = spec.config;
  cfg.validate();
  return cfg;
}

std::vector<double> pick_grid(const ExperimentSpec& spec,
                              std::vector<double> fallback) {
  if (spec.grid.empty()) return fallback;
  return spec.grid;
}

double normalized_capacity(const SystemConfig& cfg) {
  return static_cast<double>(cfg.n_subchannels) * cfg.bandwidth;
}

bool report_feasible(const SolverReport& rep, const SystemConfig& cfg) {
  if (rep.status == SolveStatus::Infeasible) return false;
  const double rate_tol = 1e-6 * std::max(1.0, cfg.r_min);
  const double pow_tol = 1e-6;
  return rep.r1 >= cfg.r_min - rate_tol && rep.r2 >= cfg.r_min - rate_tol &&
         rep.source_power <= cfg.p_s_max * (1.0 + pow_tol) + 1e-12 &&
         rep.relay_power <= cfg.p_r_max * (1.0 + pow_tol) + 1e-12;
}

// Mean per-band collision of the realized paths against the per-frame
// phase-union windows, plus the paired statistics against a per-frame model
// value. Everything is normalized by t_f before it lands in the row.
void fill_realized(ResultRow& row, const std::vector<double>& model,
                   const std::vector<double>& realized, double t_f) {
  const MeanSe r = mean_se(realized);
  row.collision_realized = r.mean / t_f;
  row.std_err = r.se / t_f;
  const MeanSe m = mean_se(model);
  row.std_err_model = m.se / t_f;
  std::vector<double> diff(realized.size());
  for (std::size_t i = 0; i < realized.size(); ++i)
    diff[i] = realized[i] - model[i];
  row.std_err_paired = mean_se(diff).se / t_f;
}

void evaluate_policy(const TrainedPolicy& policy, const EvalFrames& data,
                     ResultRow& row) {
  const SystemConfig& cfg = policy.config;
  const int frames = static_cast<int>(data.nsi.size());
  const int bands = cfg.n_bands;
  const double t_f = cfg.timing.t_f;
  const double cap = normalized_capacity(cfg);

  std::vector<double> model(frames, 0.0);
  std::vector<double> realized(frames, 0.0);
  double r1_sum = 0.0, r2_sum = 0.0, ps_sum = 0.0, pr_sum = 0.0;
  std::vector<double> th1(bands, 0.0), th2(bands, 0.0);

  for (int f = 0; f < frames; ++f) {
    const Nsi& nsi = data.nsi[f];
    const Allocation a = policy_allocation(policy, nsi);
    model[f] = policy_model_collision(policy, nsi, a);
    double c = 0.0;
    for (int m = 0; m < bands; ++m)
      c += collision_time(data.paths[f][m],
                          unite(a.intervals1[m], a.intervals2[m]));
    realized[f] = c;
    r1_sum += rate_r1(a, nsi, cfg);
    r2_sum += rate_r2(a, nsi, cfg);
    ps_sum += a.source_power();
    pr_sum += a.relay_power();
    for (int m = 0; m < bands; ++m) {
      th1[m] += a.theta1_hat[m];
      th2[m] += a.theta2_hat[m];
    }
  }

  row.collision = mean_se(model).mean / t_f;
  fill_realized(row, model, realized, t_f);
  const double inv = 1.0 / static_cast<double>(frames);
  row.r1 = r1_sum * inv / cap;
  row.r2 = r2_sum * inv / cap;
  row.source_power = ps_sum * inv;
  row.relay_power = pr_sum * inv;
  for (int m = 0; m < bands; ++m) {
    row.theta1[m] = th1[m] * inv;
    row.theta2[m] = th2[m] * inv;
  }
}

constexpr Strategy kAllStrategies[] = {Strategy::TwoSensing,
                                       Strategy::Phase1Only,
                                       Strategy::SensingFree,
                                       Strategy::RelayFree};

ResultRow trained_row(const SystemConfig& cfg, Strategy strategy,
                      double sweep_value, const ExperimentSpec& spec,
                      const EvalFrames& data) {
  TrainingOptions topts = spec.training;
  topts.channel = spec.channel;
  const TrainedPolicy policy =
      train_offline(cfg, strategy, spec.master_seed, topts);
  ResultRow row = base_row(sweep_value, to_string(strategy), cfg.n_bands);
  row.status = to_string(policy.status);
  if (policy.status != SolveStatus::Optimal) return row;
  row.feasible = true;
  row.objective = policy.expected_objective;
  evaluate_policy(policy, data, row);
  return row;
}

}  // namespace

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::FrameSweep: return "frame-sweep";
    case ExperimentKind::ErgodicSweep: return "ergodic-sweep";
    case ExperimentKind::VarsigmaSweep: return "varsigma-sweep";
    case ExperimentKind::SensingErrorSweep: return "sensing-error-sweep";
  }
  return "unknown";
}

SystemConfig default_frame_config() {
  SystemConfig cfg;
  cfg.n_subchannels = 2;
  cfg.n_bands = 2;
  cfg.band_map = {{0}, {1}};
  cfg.bandwidth = 1.0;
  cfg.timing.t_f = 1.0;
  cfg.timing.alpha = 0.5;
  cfg.timing.delta = 0.1;
  cfg.p_s_max = 1.0;
  cfg.p_r_max = 1.0;
  cfg.r_min = 0.0;
  cfg.long_term_average = false;
  cfg.traffic = {TrafficParams{1.0, 1.0}, TrafficParams{1.0, 1.0}};
  return cfg;
}

Nsi default_frame_nsi() {
  Nsi nsi;
  nsi.g_sr = {1.3, 1.4};
  nsi.g_sd = {0.4, 0.5};
  nsi.g_rd = {1.3, 1.4};
  nsi.x = {0, 1};
  return nsi;
}

SystemConfig default_ergodic_config() {
  SystemConfig cfg;
  cfg.n_subchannels = 16;
  cfg.n_bands = 4;
  cfg.band_map.assign(4, {});
  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < 4; ++i) cfg.band_map[m].push_back(4 * m + i);
  cfg.bandwidth = 1.0;
  cfg.timing.t_f = 1.0;
  cfg.timing.alpha = 0.5;
  cfg.timing.delta = 0.0;
  cfg.p_s_max = 16.0;
  cfg.p_r_max = 16.0;
  cfg.r_min = 0.0;
  cfg.long_term_average = true;
  cfg.traffic.assign(4, TrafficParams{1.0, 1.0});
  return cfg;
}

EvalFrames draw_eval_frames(const SystemConfig& cfg, const ChannelModel& ch,
                            std::uint64_t master_seed, int frames) {
  cfg.validate();
  if (frames < 1)
    throw std::invalid_argument("draw_eval_frames: frames must be >= 1");
  const std::uint64_t eval_seed = derive_stream(master_seed, kEvalTag);
  const double t_f = cfg.timing.t_f;
  const double t_mid = cfg.timing.alpha * t_f;

  EvalFrames data;
  data.nsi.resize(frames);
  data.paths.resize(frames);
  for (int f = 0; f < frames; ++f) {
    Nsi& nsi = data.nsi[f];
    sample_gains(ch, cfg, eval_seed, static_cast<std::uint64_t>(f), nsi);
    nsi.x.resize(cfg.n_bands);
    nsi.y.resize(cfg.n_bands);
    auto& paths = data.paths[f];
    paths.reserve(cfg.n_bands);
    for (int m = 0; m < cfg.n_bands; ++m) {
      Rng rng(eval_seed,
              derive_stream(eval_seed, kPathTag, static_cast<std::uint64_t>(f),
                            static_cast<std::uint64_t>(m)));
      paths.push_back(sample_path(cfg.band_traffic(m), std::nullopt, t_f, rng));
      nsi.x[m] = paths.back().initial_state;
      nsi.y[m] = paths.back().state_at(t_mid);
    }
  }
  return data;
}

std::vector<ResultRow> run_frame_sweep(const ExperimentSpec& spec) {
  SystemConfig cfg = pick_config(spec, default_frame_config());
  std::vector<double> grid;
  if (spec.grid.empty()) {
    for (int i = 1; i <= 70; ++i) grid.push_back(0.01 * i);
  } else {
    grid = spec.grid;
  }

  Nsi nsi;
  if (spec.config.n_subchannels == 0) {
    nsi = default_frame_nsi();
  } else {
    const std::uint64_t eval_seed = derive_stream(spec.master_seed, kEvalTag);
    sample_gains(spec.channel, cfg, eval_seed, 0, nsi);
    sample_sensing(cfg, eval_seed, 0, nsi);
    nsi.y.clear();
  }

  const int frames = std::max(1, spec.frames);
  const double t_f = cfg.timing.t_f;
  const double cap = normalized_capacity(cfg);

  // One set of per-band paths conditioned on the sensed frame-start states,
  // shared by every grid point and strategy.
  std::vector<std::vector<SamplePath>> paths(frames);
  for (int f = 0; f < frames; ++f) {
    paths[f].reserve(cfg.n_bands);
    for (int m = 0; m < cfg.n_bands; ++m) {
      Rng rng(spec.master_seed,
              derive_stream(spec.master_seed, kPathTag,
                            static_cast<std::uint64_t>(f),
                            static_cast<std::uint64_t>(m)));
      paths[f].push_back(
          sample_path(cfg.band_traffic(m), nsi.x[m], t_f, rng));
    }
  }

  struct FrameStrategy {
    const char* label;
    SolverReport (*solve)(const Nsi&, const SystemConfig&,
                          const SolveOptions&);
  };
  const FrameStrategy kStrategies[] = {
      {"proposed", &solve_frame},
      {"relay-free", &solve_relay_free},
      {"sensing-free", &solve_sensing_free},
  };

  std::vector<ResultRow> rows;
  for (double r : grid) {
    cfg.r_min = r * cap;
    for (const FrameStrategy& strat : kStrategies) {
      const SolverReport rep = strat.solve(nsi, cfg, spec.frame_options);
      ResultRow row = base_row(r, strat.label, cfg.n_bands);
      row.status = to_string(rep.status);
      row.feasible = report_feasible(rep, cfg);
      if (!row.feasible) {
        rows.push_back(std::move(row));
        continue;
      }
      const Allocation& a = rep.allocation;
      // True conditional collision of the placed windows given the sensed
      // states, for every strategy alike; the solver's own model objective
      // (stationary for sensing-free) is kept in `objective`.
      std::vector<IntervalSet> spans(cfg.n_bands);
      double coll = 0.0;
      for (int m = 0; m < cfg.n_bands; ++m) {
        spans[m] = unite(a.intervals1[m], a.intervals2[m]);
        coll += expected_active_time(spans[m], nsi.x[m], cfg.band_traffic(m));
      }
      row.collision = coll / t_f;

      std::vector<double> model(frames, coll);
      std::vector<double> realized(frames, 0.0);
      for (int f = 0; f < frames; ++f) {
        double c = 0.0;
        for (int m = 0; m < cfg.n_bands; ++m)
          c += collision_time(paths[f][m], spans[m]);
        realized[f] = c;
      }
      fill_realized(row, model, realized, t_f);

      row.objective = rep.objective;
      row.r1 = rep.r1 / cap;
      row.r2 = rep.r2 / cap;
      row.source_power = rep.source_power;
      row.relay_power = rep.relay_power;
      row.theta1 = a.theta1_hat;
      row.theta2 = a.theta2_hat;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ResultRow> run_ergodic_sweep(const ExperimentSpec& spec) {
  SystemConfig cfg = pick_config(spec, default_ergodic_config());
  const std::vector<double> grid = pick_grid(spec, {0.6, 1.7, 2.8});
  const double cap = normalized_capacity(cfg);

  const EvalFrames data =
      draw_eval_frames(cfg, spec.channel, spec.master_seed, spec.frames);

  std::vector<ResultRow> rows;
  for (double r : grid) {
    cfg.r_min = r * cap;
    for (Strategy strategy : kAllStrategies)
      rows.push_back(trained_row(cfg, strategy, r, spec, data));
  }
  return rows;
}

std::vector<ResultRow> run_varsigma_sweep(const ExperimentSpec& spec) {
  SystemConfig cfg = pick_config(spec, default_ergodic_config());
  const std::vector<double> grid = pick_grid(spec, {0.25, 0.5, 1.0, 2.0, 4.0});
  cfg.r_min = spec.rate_target * normalized_capacity(cfg);

  std::vector<ResultRow> rows;
  for (double varsigma : grid) {
    if (!(varsigma > 0.0))
      throw std::invalid_argument("run_varsigma_sweep: varsigma must be > 0");
    const double rate = 2.0 * varsigma / cfg.timing.t_f;
    for (TrafficParams& tp : cfg.traffic) tp = TrafficParams{rate, rate};
    // Same derivation chain as the rate sweep: gains are identical across
    // varsigma points, only the traffic paths change.
    const EvalFrames data =
        draw_eval_frames(cfg, spec.channel, spec.master_seed, spec.frames);
    for (Strategy strategy : kAllStrategies)
      rows.push_back(trained_row(cfg, strategy, varsigma, spec, data));
  }
  return rows;
}

std::vector<ResultRow> run_sensing_error_sweep(const ExperimentSpec& spec) {
  SystemConfig cfg = pick_config(spec, default_ergodic_config());
  const std::vector<double> grid = pick_grid(spec, {0.0, 0.01, 0.05, 0.1, 0.2});
  cfg.r_min = spec.rate_target * normalized_capacity(cfg);
  const int bands = cfg.n_bands;
  const double t_f = cfg.timing.t_f;
  const double cap = normalized_capacity(cfg);

  TrainingOptions topts = spec.training;
  topts.channel = spec.channel;
  const TrainedPolicy policy =
      train_offline(cfg, Strategy::TwoSensing, spec.master_seed, topts);

  std::vector<ResultRow> rows;
  if (policy.status != SolveStatus::Optimal) {
    for (double p : grid) {
      ResultRow row = base_row(p, to_string(Strategy::TwoSensing), bands);
      row.status = to_string(policy.status);
      rows.push_back(std::move(row));
    }
    return rows;
  }

  const EvalFrames data =
      draw_eval_frames(cfg, spec.channel, spec.master_seed, spec.frames);
  const int frames = static_cast<int>(data.nsi.size());
  const std::uint64_t eval_seed = derive_stream(spec.master_seed, kEvalTag);

  // Flip uniforms drawn once and shared across the error grid, so the curve
  // is a paired comparison: at p = 0 no flip fires and the run reproduces
  // the error-free pipeline bit for bit.
  std::vector<std::vector<double>> ux(frames), uy(frames), ur(frames);
  for (int f = 0; f < frames; ++f) {
    ux[f].resize(bands);
    uy[f].resize(bands);
    ur[f].resize(bands);
    for (int m = 0; m < bands; ++m) {
      Rng src(eval_seed,
              derive_stream(eval_seed, kFlipSrcTag,
                            static_cast<std::uint64_t>(f),
                            static_cast<std::uint64_t>(m)));
      ux[f][m] = src.uniform01();
      uy[f][m] = src.uniform01();
      Rng rel(eval_seed,
              derive_stream(eval_seed, kFlipRelTag,
                            static_cast<std::uint64_t>(f),
                            static_cast<std::uint64_t>(m)));
      ur[f][m] = rel.uniform01();
    }
  }

  for (double p : grid) {
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument(
          "run_sensing_error_sweep: error probability outside [0, 1]");
    ResultRow row = base_row(p, to_string(Strategy::TwoSensing), bands);
    row.status = to_string(policy.status);
    row.feasible = true;
    row.objective = policy.expected_objective;

    std::vector<double> model(frames, 0.0);
    std::vector<double> realized(frames, 0.0);
    double r1_sum = 0.0, r2_sum = 0.0, ps_sum = 0.0, pr_sum = 0.0;
    std::vector<double> th1(bands, 0.0), th2(bands, 0.0);

    for (int f = 0; f < frames; ++f) {
      const Nsi& truth = data.nsi[f];
      Nsi view = truth;
      for (int m = 0; m < bands; ++m) {
        if (ux[f][m] < p) view.x[m] = 1 - view.x[m];
        if (uy[f][m] < p) view.y[m] = 1 - view.y[m];
      }
      // The source decides from its own (possibly flipped) outcomes; the
      // relay looks up its phase-2 candidate from its own re-sensing. When
      // they disagree the realized collision runs over the window union.
      const Allocation src = policy_allocation(policy, view);
      const ParameterPacket pkt = build_packet(policy, truth);
      double c = 0.0;
      for (int m = 0; m < bands; ++m) {
        IntervalSet spans = unite(src.intervals1[m], src.intervals2[m]);
        const int yr = ur[f][m] < p ? 1 - truth.y[m] : truth.y[m];
        const double th_r = pkt.theta2[m][yr];
        bool relay_on = false;
        for (int n : cfg.band_map[m])
          if (pkt.ratio_q[n] * th_r > 0.0) relay_on = true;
        if (relay_on)
          spans = unite(spans, place_phase2_resensed(th_r, yr, cfg.timing));
        c += collision_time(data.paths[f][m], spans);
      }
      realized[f] = c;
      model[f] = policy_model_collision(policy, truth,
                                        policy_allocation(policy, truth));
      r1_sum += rate_r1(src, truth, cfg);
      r2_sum += rate_r2(src, truth, cfg);
      ps_sum += src.source_power();
      pr_sum += src.relay_power();
      for (int m = 0; m < bands; ++m) {
        th1[m] += src.theta1_hat[m];
        th2[m] += src.theta2_hat[m];
      }
    }

    fill_realized(row, model, realized, t_f);
    // The analytic value only describes the error-free placement, so it is
    // reported on the p = 0 row alone.
    if (p == 0.0) row.collision = mean_se(model).mean / t_f;
    const double inv = 1.0 / static_cast<double>(frames);
    row.r1 = r1_sum * inv / cap;
    row.r2 = r2_sum * inv / cap;
    row.source_power = ps_sum * inv;
    row.relay_power = pr_sum * inv;
    for (int m = 0; m < bands; ++m) {
      row.theta1[m] = th1[m] * inv;
      row.theta2[m] = th2[m] * inv;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::FrameSweep: return run_frame_sweep(spec);
    case ExperimentKind::ErgodicSweep: return run_ergodic_sweep(spec);
    case ExperimentKind::VarsigmaSweep: return run_varsigma_sweep(spec);
    case ExperimentKind::SensingErrorSweep:
      return run_sensing_error_sweep(spec);
  }
  throw std::invalid_argument("run_experiment: unknown experiment kind");
}

namespace {

std::string fmt9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  const std::size_t bands = rows.empty() ? 0 : rows.front().theta1.size();
  for (const ResultRow& row : rows)
    if (row.theta1.size() != bands || row.theta2.size() != bands)
      throw std::invalid_argument("rows_to_csv: ragged theta columns");

  std::string out =
      "sweep,strategy,status,feasible,collision,collision_realized,"
      "std_err,std_err_model,std_err_paired,objective,r1,r2,"
      "source_power,relay_power";
  for (std::size_t m = 0; m < bands; ++m)
    out += ",theta1_b" + std::to_string(m);
  for (std::size_t m = 0; m < bands; ++m)
    out += ",theta2_b" + std::to_string(m);
  out += "\n";

  for (const ResultRow& row : rows) {
    out += fmt9(row.sweep_value);
    out += ',';
    out += row.strategy;
    out += ',';
    out += row.status;
    out += ',';
    out += row.feasible ? '1' : '0';
    for (double v : {row.collision, row.collision_realized, row.std_err,
                     row.std_err_model, row.std_err_paired, row.objective,
                     row.r1, row.r2, row.source_power, row.relay_power}) {
      out += ',';
      out += fmt9(v);
    }
    for (double v : row.theta1) {
      out += ',';
      out += fmt9(v);
    }
    for (double v : row.theta2) {
      out += ',';
      out += fmt9(v);
    }
    out += '\n';
  }
  return out;
}

std::string rows_to_json(const std::vector<ResultRow>& rows) {
  nlohmann::json doc = nlohmann::json::array();
  for (const ResultRow& row : rows) {
    nlohmann::json j;
    j["sweep"] = row.sweep_value;
    j["strategy"] = row.strategy;
    j["status"] = row.status;
    j["feasible"] = row.feasible;
    j["collision"] = row.collision;
    j["collision_realized"] = row.collision_realized;
    j["std_err"] = row.std_err;
    j["std_err_model"] = row.std_err_model;
    j["std_err_paired"] = row.std_err_paired;
    j["objective"] = row.objective;
    j["r1"] = row.r1;
    j["r2"] = row.r2;
    j["source_power"] = row.source_power;
    j["relay_power"] = row.relay_power;
    j["theta1"] = row.theta1;
    j["theta2"] = row.theta2;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_rows(const std::vector<ResultRow>& rows, const std::string& path,
                const std::string& format) {
  std::string body;
  if (format == "csv") {
    body = rows_to_csv(rows);
  } else if (format == "json") {
    body = rows_to_json(rows);
  } else {
    throw std::invalid_argument("write_rows: format must be csv or json");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_rows: cannot open " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("write_rows: short write to " + path);
}

std::vector<std::string> validate_deployment(std::uint64_t seed) {
  std::vector<std::string> failures;
  const auto fail = [&failures](const std::string& what) {
    failures.push_back(what);
  };

  // Collision closed forms against direct quadrature of the occupancy
  // probability, then one Monte Carlo cross-check per sensed state.
  const TrafficParams tp{1.0, 1.0};
  FrameTiming tm;
  tm.t_f = 1.0;
  tm.alpha = 0.5;
  tm.delta = 0.1;
  for (int sensed : {0, 1}) {
    for (double theta : {0.05, 0.2, 0.35}) {
      const double closed = expected_collision_phase1(theta, sensed, tp, tm);
      const double quad = oracle::collision_by_quadrature(
          place_phase1(theta, sensed, tm), sensed, 0.0, tp, 1e-12);
      if (std::fabs(closed - quad) > 1e-9)
        fail("phase-1 collision vs quadrature: theta=" + fmt9(theta) +
             " sensed=" + std::to_string(sensed) + " diff=" +
             fmt9(closed - quad));
    }
    const double theta = 0.2;
    const IntervalSet w = place_phase1(theta, sensed, tm);
    const oracle::McEstimate mc = oracle::mc_collision(
        w, sensed, tm.t_f, tp, derive_stream(seed, 0x76616c31, sensed), 200000);
    const double closed = expected_collision_phase1(theta, sensed, tp, tm);
    if (std::fabs(closed - mc.mean) > 4.0 * mc.std_err + 1e-12)
      fail("phase-1 collision vs Monte Carlo: sensed=" +
           std::to_string(sensed) + " diff=" + fmt9(closed - mc.mean) +
           " se=" + fmt9(mc.std_err));
  }

  // Greedy placement against an exhaustive start grid.
  for (int sensed : {0, 1}) {
    const double theta = 0.2;
    const oracle::PlacementSearch search = oracle::search_placement(
        theta, tm.t_f, tm.delta * tm.t_f, tm.alpha * tm.t_f, sensed, 0.0, tp);
    const double greedy = expected_collision_phase1(theta, sensed, tp, tm);
    if (search.best_cost < greedy - 1e-6 ||
        search.best_split_cost < greedy - 1e-6)
      fail("phase-1 placement not optimal: sensed=" + std::to_string(sensed) +
           " grid=" + fmt9(std::min(search.best_cost, search.best_split_cost)) +
           " greedy=" + fmt9(greedy));
  }

  // Frame solver against the generic augmented-Lagrangian reference.
  SystemConfig cfg = default_frame_config();
  cfg.r_min = 0.3 * normalized_capacity(cfg);
  const Nsi nsi = default_frame_nsi();
  const SolverReport rep = solve_frame(nsi, cfg);
  if (rep.status != SolveStatus::Optimal)
    fail(std::string("frame solve on the built-in instance: status ") +
         to_string(rep.status));
  if (rep.kkt_residual > 1e-5)
    fail("frame solve KKT residual " + fmt9(rep.kkt_residual));
  const oracle::ReferenceSolution ref = oracle::reference_solve(nsi, cfg, false);
  if (!ref.feasible) {
    fail("reference solve did not reach feasibility");
  } else {
    const double denom = std::max(1e-9, std::fabs(ref.objective));
    if ((rep.objective - ref.objective) / denom > 1e-3)
      fail("frame solve objective " + fmt9(rep.objective) +
           " vs reference " + fmt9(ref.objective));
  }

  // Packet round trip and the online lookup against the full inner solve.
  SystemConfig ecfg = default_ergodic_config();
  ecfg.r_min = 1.0 * normalized_capacity(ecfg);
  TrainingOptions topts;
  topts.sample_count = 200;
  topts.max_iter = 800;
  const TrainedPolicy policy =
      train_offline(ecfg, Strategy::TwoSensing, seed, topts);
  if (policy.status != SolveStatus::Optimal) {
    fail(std::string("training on the built-in instance: status ") +
         to_string(policy.status));
  } else {
    const EvalFrames data = draw_eval_frames(ecfg, topts.channel, seed, 16);
    for (int f = 0; f < 16; ++f) {
      const Nsi& frame = data.nsi[f];
      const ParameterPacket pkt = build_packet(policy, frame);
      const ParameterPacket back = ParameterPacket::deserialize(pkt.serialize());
      if (back.serialize() != pkt.serialize()) {
        fail("packet serialization round trip changed bytes at frame " +
             std::to_string(f));
        break;
      }
      const Allocation fast = online_update(pkt, frame.x, frame.y, ecfg);
      const Allocation full = inner_solution_resensed(policy.duals, frame, ecfg);
      const bool same = fast.p_s1 == full.p_s1 && fast.p_s2 == full.p_s2 &&
                        fast.p_r == full.p_r &&
                        fast.theta1_hat == full.theta1_hat &&
                        fast.theta2_hat == full.theta2_hat &&
                        fast.intervals1 == full.intervals1 &&
                        fast.intervals2 == full.intervals2;
      if (!same) {
        fail("online update differs from the inner solve at frame " +
             std::to_string(f));
        break;
      }
    }
  }

  return failures;
}

}  // namespace crn
