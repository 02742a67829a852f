#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crn/config_json.hpp"
#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"
#include "crn/harness.hpp"
#include "crn/netmodel.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitBadInput = 3;

// I/O problems and malformed documents; mapped to the bad-input exit code,
// as opposed to well-formed configs that violate an invariant.
class BadInput : public std::runtime_error {
 public:
  explicit BadInput(const std::string& what) : std::runtime_error(what) {}
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& body, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw BadInput("cannot open " + out_path);
  out << body;
  if (!out) throw BadInput("short write to " + out_path);
}

struct Inputs {
  crn::SystemConfig config;
  crn::ChannelModel channel;
  nlohmann::json doc;  // raw document, for optional extras such as "nsi"
  bool custom = false;
};

Inputs load_inputs(const std::string& config_path,
                   const crn::SystemConfig& fallback) {
  Inputs in;
  if (config_path.empty()) {
    in.config = fallback;
    return in;
  }
  const std::string text = slurp(config_path);
  try {
    in.doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(config_path + ": " + e.what());
  }
  const crn::LoadedConfig loaded = crn::parse_config(text);
  in.config = loaded.config;
  in.channel = loaded.channel;
  in.custom = true;
  return in;
}

std::vector<double> field_vector(const nlohmann::json& j, const char* key) {
  std::vector<double> out;
  for (const auto& v : j.at(key)) out.push_back(v.get<double>());
  return out;
}

crn::Nsi nsi_from_json(const nlohmann::json& j) {
  try {
    crn::Nsi nsi;
    nsi.g_sr = field_vector(j, "g_sr");
    nsi.g_sd = field_vector(j, "g_sd");
    nsi.g_rd = field_vector(j, "g_rd");
    for (const auto& v : j.at("x")) nsi.x.push_back(v.get<int>());
    if (j.contains("y"))
      for (const auto& v : j.at("y")) nsi.y.push_back(v.get<int>());
    return nsi;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("nsi: ") + e.what());
  }
}

void apply_rate(crn::SystemConfig& cfg, double normalized_rate) {
  if (normalized_rate >= 0.0)
    cfg.r_min = normalized_rate * cfg.n_subchannels * cfg.bandwidth;
}

crn::Strategy strategy_from_name(const std::string& name) {
  if (name == "two-sensing") return crn::Strategy::TwoSensing;
  if (name == "phase1-only") return crn::Strategy::Phase1Only;
  if (name == "sensing-free") return crn::Strategy::SensingFree;
  if (name == "relay-free") return crn::Strategy::RelayFree;
  throw std::invalid_argument("unknown strategy " + name);
}

crn::ExperimentKind kind_from_name(const std::string& name) {
  if (name == "frame") return crn::ExperimentKind::FrameSweep;
  if (name == "ergodic") return crn::ExperimentKind::ErgodicSweep;
  if (name == "varsigma") return crn::ExperimentKind::VarsigmaSweep;
  if (name == "sensing-error") return crn::ExperimentKind::SensingErrorSweep;
  throw std::invalid_argument("unknown experiment " + name);
}

int cmd_solve_frame(const std::string& config_path, double rate,
                    std::uint64_t seed, const std::string& out_path) {
  Inputs in = load_inputs(config_path, crn::default_frame_config());
  apply_rate(in.config, rate);
  in.config.validate();

  crn::Nsi nsi;
  if (!in.custom) {
    nsi = crn::default_frame_nsi();
  } else if (in.doc.contains("nsi")) {
    nsi = nsi_from_json(in.doc.at("nsi"));
  } else {
    crn::sample_gains(in.channel, in.config, seed, 0, nsi);
    crn::sample_sensing(in.config, seed, 0, nsi);
    nsi.y.clear();
  }

  const crn::SolverReport report = crn::solve_frame(nsi, in.config);
  emit(crn::report_to_json(report), out_path);
  return report.status == crn::SolveStatus::Infeasible ? kExitInfeasible
                                                       : kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& strategy,
              double rate, int samples, int iters, std::uint64_t seed,
              const std::string& out_path) {
  Inputs in = load_inputs(config_path, crn::default_ergodic_config());
  apply_rate(in.config, rate);
  in.config.validate();

  crn::TrainingOptions opts;
  if (samples > 0) opts.sample_count = samples;
  if (iters > 0) opts.max_iter = iters;
  opts.channel = in.channel;

  const crn::TrainedPolicy policy =
      crn::train_offline(in.config, strategy_from_name(strategy), seed, opts);
  emit(crn::policy_to_json(policy), out_path);
  std::cerr << "training status: " << crn::to_string(policy.status) << "\n";
  return policy.status == crn::SolveStatus::Infeasible ? kExitInfeasible
                                                       : kExitOk;
}

int cmd_run(const std::string& experiment, const std::string& config_path,
            const std::vector<double>& grid, int frames, std::uint64_t seed,
            double rate, const std::string& format,
            const std::string& out_path) {
  crn::ExperimentSpec spec;
  spec.kind = kind_from_name(experiment);
  if (!config_path.empty()) {
    Inputs in = load_inputs(config_path, crn::SystemConfig{});
    spec.config = in.config;
    spec.channel = in.channel;
  }
  spec.grid = grid;
  spec.frames = frames;
  spec.master_seed = seed;
  if (rate >= 0.0) spec.rate_target = rate;

  const std::vector<crn::ResultRow> rows = crn::run_experiment(spec);
  if (out_path.empty()) {
    emit(format == "json" ? crn::rows_to_json(rows) : crn::rows_to_csv(rows),
         "");
  } else {
    crn::write_rows(rows, out_path, format);
    std::cerr << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_validate(std::uint64_t seed) {
  const std::vector<std::string> failures = crn::validate_deployment(seed);
  if (failures.empty()) {
    std::cout << "validate: all checks passed\n";
    return kExitOk;
  }
  for (const std::string& f : failures) std::cout << "validate: " << f << "\n";
  return kExitValidation;
}

int cmd_template(const std::string& kind, const std::string& out_path) {
  const crn::SystemConfig cfg = kind == "ergodic"
                                    ? crn::default_ergodic_config()
                                    : crn::default_frame_config();
  emit(crn::config_to_json(cfg, crn::ChannelModel{}), out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrum sharing planner for a two-phase relay link that "
               "coexists with on/off ad-hoc traffic"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 2024;
  int frames = 500;
  double rate = -1.0;

  CLI::App* solve = app.add_subcommand(
      "solve-frame", "Solve one frame and print the solver report as JSON");
  solve->add_option("--config", config_path, "Deployment JSON (built-in two-band instance when omitted)");
  solve->add_option("--rate", rate, "Per-sub-channel rate target in bits/s/Hz; overrides the config's r_min")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("--seed", seed, "Seed for gain/sensing draws when the config has no nsi block");
  solve->add_option("--out", out_path, "Write the report here instead of stdout");

  std::string strategy = "two-sensing";
  int samples = -1;
  int iters = -1;
  CLI::App* train = app.add_subcommand(
      "train", "Train long-run multipliers and print the policy as JSON");
  train->add_option("--config", config_path, "Deployment JSON (built-in sixteen-sub-channel instance when omitted)");
  train->add_option("--strategy", strategy, "two-sensing | phase1-only | sensing-free | relay-free")
      ->check(CLI::IsMember({"two-sensing", "phase1-only", "sensing-free", "relay-free"}));
  train->add_option("--rate", rate, "Per-sub-channel rate target in bits/s/Hz; overrides the config's r_min")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--samples", samples, "Training sample count")->check(CLI::PositiveNumber);
  train->add_option("--iters", iters, "Subgradient iteration cap")->check(CLI::PositiveNumber);
  train->add_option("--seed", seed, "Training seed");
  train->add_option("--out", out_path, "Write the policy here instead of stdout");

  std::string experiment;
  std::vector<double> grid;
  CLI::App* run = app.add_subcommand(
      "run", "Run a sweep experiment and emit one row per (point, strategy)");
  run->add_option("--experiment", experiment, "frame | ergodic | varsigma | sensing-error")
      ->required()
      ->check(CLI::IsMember({"frame", "ergodic", "varsigma", "sensing-error"}));
  run->add_option("--config", config_path, "Deployment JSON (the experiment's built-in instance when omitted)");
  run->add_option("--grid", grid, "Sweep points (default grid when omitted)")
      ->delimiter(',');
  run->add_option("--frames", frames, "Evaluation frames per row")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Master seed; reruns with the same seed are byte-identical");
  run->add_option("--rate", rate, "Per-sub-channel rate target for the fixed-rate sweeps")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--format", format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--out", out_path, "Write rows here instead of stdout");

  CLI::App* validate = app.add_subcommand(
      "validate", "Run the built-in cross-checks (closed forms vs quadrature "
                  "and Monte Carlo, placement search, solver vs generic "
                  "solver, online/offline agreement)");
  validate->add_option("--seed", seed, "Seed for the checks");

  std::string template_kind = "frame";
  CLI::App* tmpl = app.add_subcommand(
      "emit-config-template", "Print a complete config document");
  tmpl->add_option("--kind", template_kind, "frame | ergodic")
      ->check(CLI::IsMember({"frame", "ergodic"}));
  tmpl->add_option("--out", out_path, "Write the template here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (app.got_subcommand(solve))
      return cmd_solve_frame(config_path, rate, seed, out_path);
    if (app.got_subcommand(train))
      return cmd_train(config_path, strategy, rate, samples, iters, seed,
                       out_path);
    if (app.got_subcommand(run))
      return cmd_run(experiment, config_path, grid, frames, seed, rate, format,
                     out_path);
    if (app.got_subcommand(validate)) return cmd_validate(seed);
    if (app.got_subcommand(tmpl)) return cmd_template(template_kind, out_path);
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
