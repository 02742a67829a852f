#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crn/access.hpp"
#include "crn/config_json.hpp"
#include "crn/harness.hpp"

using namespace crn;

namespace {

SystemConfig small_ergodic_config() {
  SystemConfig cfg;
  cfg.n_subchannels = 4;
  cfg.n_bands = 2;
  cfg.band_map = {{0, 1}, {2, 3}};
  cfg.bandwidth = 1.0;
  cfg.timing.t_f = 1.0;
  cfg.timing.alpha = 0.5;
  cfg.timing.delta = 0.0;
  cfg.p_s_max = 4.0;
  cfg.p_r_max = 4.0;
  cfg.r_min = 0.0;
  cfg.long_term_average = true;
  cfg.traffic.assign(2, TrafficParams{1.0, 1.0});
  return cfg;
}

TrainingOptions fast_options() {
  TrainingOptions opts;
  opts.sample_count = 120;
  opts.max_iter = 800;
  return opts;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("evaluation draws are deterministic and sensing matches the paths") {
  const SystemConfig cfg = small_ergodic_config();
  const EvalFrames a = draw_eval_frames(cfg, ChannelModel{}, 42, 30);
  const EvalFrames b = draw_eval_frames(cfg, ChannelModel{}, 42, 30);
  REQUIRE(a.nsi.size() == 30);
  REQUIRE(a.paths.size() == 30);
  for (int f = 0; f < 30; ++f) {
    CHECK(a.nsi[f].g_sd == b.nsi[f].g_sd);
    CHECK(a.nsi[f].g_sr == b.nsi[f].g_sr);
    CHECK(a.nsi[f].g_rd == b.nsi[f].g_rd);
    CHECK(a.nsi[f].x == b.nsi[f].x);
    CHECK(a.nsi[f].y == b.nsi[f].y);
    REQUIRE(a.paths[f].size() == 2);
    for (int m = 0; m < 2; ++m) {
      CHECK(a.paths[f][m].transitions == b.paths[f][m].transitions);
      CHECK(a.nsi[f].x[m] == a.paths[f][m].initial_state);
      CHECK(a.nsi[f].y[m] ==
            a.paths[f][m].state_at(cfg.timing.alpha * cfg.timing.t_f));
    }
  }
  const EvalFrames c = draw_eval_frames(cfg, ChannelModel{}, 43, 30);
  bool any_diff = false;
  for (int f = 0; f < 30 && !any_diff; ++f)
    any_diff = c.nsi[f].g_sd != a.nsi[f].g_sd;
  CHECK(any_diff);
}

TEST_CASE("the single-frame sweep emits sane, repeatable rows") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::FrameSweep;
  spec.grid = {0.3, 0.6};
  spec.frames = 40;
  const std::vector<ResultRow> rows = run_frame_sweep(spec);
  REQUIRE(rows.size() == 6);
  const char* order[] = {"proposed", "relay-free", "sensing-free"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].strategy == order[i % 3]);
    CHECK(rows[i].sweep_value == doctest::Approx(i < 3 ? 0.3 : 0.6));
    REQUIRE(rows[i].theta1.size() == 2);
    REQUIRE(rows[i].theta2.size() == 2);
    if (rows[i].feasible) {
      CHECK(rows[i].status == "optimal");
      CHECK(rows[i].r1 >= rows[i].sweep_value - 1e-6);
      CHECK(rows[i].r2 >= rows[i].sweep_value - 1e-6);
      CHECK(rows[i].collision >= 0.0);
      CHECK(rows[i].collision_realized >= 0.0);
      CHECK(rows[i].std_err >= 0.0);
    } else {
      CHECK(std::isnan(rows[i].objective));
    }
  }
  // The adaptive frame solver never collides more than the sensing-free
  // fallback on the same realized sensing outcomes.
  for (std::size_t base = 0; base < rows.size(); base += 3)
    if (rows[base].feasible && rows[base + 2].feasible)
      CHECK(rows[base].collision <= rows[base + 2].collision + 1e-8);

  const std::vector<ResultRow> again = run_frame_sweep(spec);
  CHECK(rows_to_csv(rows) == rows_to_csv(again));
}

TEST_CASE("the long-run sweep aggregates exactly what the policy predicts") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::ErgodicSweep;
  spec.config = small_ergodic_config();
  spec.grid = {0.7};
  spec.frames = 25;
  spec.master_seed = 99;
  spec.training = fast_options();
  const std::vector<ResultRow> rows = run_ergodic_sweep(spec);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].strategy == "two-sensing");
  CHECK(rows[1].strategy == "phase1-only");
  CHECK(rows[2].strategy == "sensing-free");
  CHECK(rows[3].strategy == "relay-free");

  SystemConfig cfg = spec.config;
  cfg.r_min = 0.7 * 4.0;
  TrainingOptions topts = spec.training;
  topts.channel = spec.channel;
  const TrainedPolicy policy =
      train_offline(cfg, Strategy::TwoSensing, spec.master_seed, topts);
  REQUIRE(policy.status == SolveStatus::Optimal);
  const EvalFrames data =
      draw_eval_frames(cfg, spec.channel, spec.master_seed, spec.frames);

  double model_sum = 0.0;
  double realized_sum = 0.0;
  for (int f = 0; f < spec.frames; ++f) {
    const Allocation a = policy_allocation(policy, data.nsi[f]);
    model_sum += policy_model_collision(policy, data.nsi[f], a);
    double c = 0.0;
    for (int m = 0; m < cfg.n_bands; ++m)
      c += collision_time(data.paths[f][m],
                          unite(a.intervals1[m], a.intervals2[m]));
    realized_sum += c;
  }
  const double frames = static_cast<double>(spec.frames);
  CHECK(rows[0].collision == model_sum / frames / cfg.timing.t_f);
  CHECK(rows[0].collision_realized == realized_sum / frames / cfg.timing.t_f);
  CHECK(rows[0].objective == policy.expected_objective);
  CHECK(rows[0].feasible);
}

TEST_CASE("the switching-rate sweep keeps the blind baseline constant") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::VarsigmaSweep;
  spec.config = small_ergodic_config();
  spec.grid = {0.5, 2.0};
  spec.frames = 30;
  spec.rate_target = 0.5;
  spec.master_seed = 7;
  spec.training = fast_options();
  const std::vector<ResultRow> rows = run_varsigma_sweep(spec);
  REQUIRE(rows.size() == 8);
  const ResultRow& sf_slow = rows[2];
  const ResultRow& sf_fast = rows[6];
  REQUIRE(sf_slow.strategy == "sensing-free");
  REQUIRE(sf_fast.strategy == "sensing-free");
  REQUIRE(sf_slow.feasible);
  REQUIRE(sf_fast.feasible);
  // Symmetric on/off traffic keeps the stationary activity at one half for
  // every switching rate, and that is all the blind policy's expected
  // collision depends on.
  CHECK(std::fabs(sf_slow.collision - sf_fast.collision) <= 1e-12);
  CHECK(std::fabs(sf_slow.objective - sf_fast.objective) <= 1e-12);
  // The adaptive policy's realized collision must differ: the paths change.
  const ResultRow& ts_slow = rows[0];
  const ResultRow& ts_fast = rows[4];
  REQUIRE(ts_slow.feasible);
  REQUIRE(ts_fast.feasible);
  CHECK(ts_slow.collision_realized != ts_fast.collision_realized);
}

TEST_CASE("the sensing-error sweep reproduces the error-free run at p zero") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::SensingErrorSweep;
  spec.config = small_ergodic_config();
  spec.grid = {0.0, 0.3};
  spec.frames = 30;
  spec.rate_target = 0.5;
  spec.master_seed = 7;
  spec.training = fast_options();
  const std::vector<ResultRow> rows = run_sensing_error_sweep(spec);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].strategy == "two-sensing");
  CHECK(rows[0].feasible);
  CHECK(!std::isnan(rows[0].collision));
  CHECK(std::isnan(rows[1].collision));  // analytic value is error-free only
  CHECK(!std::isnan(rows[1].collision_realized));

  SystemConfig cfg = spec.config;
  cfg.r_min = 0.5 * 4.0;
  TrainingOptions topts = spec.training;
  topts.channel = spec.channel;
  const TrainedPolicy policy =
      train_offline(cfg, Strategy::TwoSensing, spec.master_seed, topts);
  REQUIRE(policy.status == SolveStatus::Optimal);
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
  // With no flips the relay's window is the one the source already placed,
  // so the union and hence every per-frame value matches bit for bit.
  CHECK(rows[0].collision_realized ==
        realized_sum / static_cast<double>(spec.frames) / cfg.timing.t_f);
}

TEST_CASE("rows serialize to CSV and JSON and back out through files") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::FrameSweep;
  spec.grid = {0.4};
  spec.frames = 10;
  const std::vector<ResultRow> rows = run_frame_sweep(spec);
  REQUIRE(rows.size() == 3);

  const std::string csv = rows_to_csv(rows);
  CHECK(csv.rfind("sweep,strategy,status,feasible,collision,", 0) == 0);
  CHECK(csv.find(",theta1_b0,theta1_b1,theta2_b0,theta2_b1\n") !=
        std::string::npos);
  std::size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 4);  // header + one line per row

  const std::string json_text = rows_to_json(rows);
  const nlohmann::json doc = nlohmann::json::parse(json_text);
  REQUIRE(doc.is_array());
  REQUIRE(doc.size() == 3);
  CHECK(doc[0].at("strategy") == "proposed");
  CHECK(doc[0].at("theta1").size() == 2);

  write_rows(rows, "harness_rows.csv", "csv");
  write_rows(rows, "harness_rows.json", "json");
  CHECK(read_file("harness_rows.csv") == csv);
  CHECK(read_file("harness_rows.json") == json_text);
  std::remove("harness_rows.csv");
  std::remove("harness_rows.json");
  CHECK_THROWS_AS(write_rows(rows, "harness_rows.tsv", "tsv"),
                  std::invalid_argument);

  // NaN fields must not corrupt either format.
  std::vector<ResultRow> nan_rows(1);
  nan_rows[0].strategy = "proposed";
  nan_rows[0].status = "infeasible";
  nan_rows[0].objective = std::numeric_limits<double>::quiet_NaN();
  const std::string nan_json = rows_to_json(nan_rows);
  CHECK(nan_json.find("null") != std::string::npos);
  CHECK(nlohmann::json::parse(nan_json)[0].at("objective").is_null());
  CHECK(rows_to_csv(nan_rows).find("nan") != std::string::npos);
}

TEST_CASE("configs round trip through JSON with their channel model") {
  const SystemConfig cfg = default_ergodic_config();
  ChannelModel ch;
  ch.sinr_sd_db = 8.0;
  const std::string text = config_to_json(cfg, ch);
  const LoadedConfig back = parse_config(text);
  CHECK(back.config.n_subchannels == cfg.n_subchannels);
  CHECK(back.config.n_bands == cfg.n_bands);
  CHECK(back.config.band_map == cfg.band_map);
  CHECK(back.config.p_s_max == cfg.p_s_max);
  CHECK(back.config.r_min == cfg.r_min);
  CHECK(back.config.long_term_average == cfg.long_term_average);
  CHECK(back.config.timing.alpha == cfg.timing.alpha);
  CHECK(back.channel.sinr_sd_db == 8.0);
  CHECK(config_fingerprint(back.config) == config_fingerprint(cfg));

  SystemConfig other = cfg;
  other.r_min = 1.0;
  CHECK(config_fingerprint(other) != config_fingerprint(cfg));

  CHECK_THROWS_AS(parse_config("{\"n_subchannels\": 4}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config("not json at all"), std::invalid_argument);
}

TEST_CASE("the deployment self-check passes on the shipped defaults") {
  const std::vector<std::string> failures = validate_deployment(2024);
  for (const std::string& f : failures) MESSAGE(f);
  CHECK(failures.empty());
}

}  // TEST_SUITE
