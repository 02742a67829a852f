#include "crn/config_json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace crn {
namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
}

TrafficParams traffic_from(const json& j) {
  TrafficParams tp;
  tp.lambda = j.at("lambda").get<double>();
  tp.mu = j.at("mu").get<double>();
  return tp;
}

json traffic_json(const TrafficParams& tp) {
  return json{{"lambda", tp.lambda}, {"mu", tp.mu}};
}

json config_json_doc(const SystemConfig& cfg) {
  json j;
  j["n_subchannels"] = cfg.n_subchannels;
  j["n_bands"] = cfg.n_bands;
  j["band_map"] = cfg.band_map;
  j["bandwidth"] = cfg.bandwidth;
  j["timing"] = {{"t_f", cfg.timing.t_f},
                 {"alpha", cfg.timing.alpha},
                 {"delta", cfg.timing.delta}};
  j["p_s_max"] = cfg.p_s_max;
  j["p_r_max"] = cfg.p_r_max;
  j["r_min"] = cfg.r_min;
  j["long_term_average"] = cfg.long_term_average;
  json tr = json::array();
  for (const auto& tp : cfg.traffic) tr.push_back(traffic_json(tp));
  j["traffic"] = tr;
  return j;
}

SystemConfig config_from(const json& j) {
  SystemConfig cfg;
  cfg.n_subchannels = j.at("n_subchannels").get<int>();
  cfg.n_bands = j.at("n_bands").get<int>();
  cfg.band_map = j.at("band_map").get<std::vector<std::vector<int>>>();
  if (j.contains("bandwidth")) cfg.bandwidth = j.at("bandwidth").get<double>();
  const json& tm = j.at("timing");
  cfg.timing.t_f = tm.at("t_f").get<double>();
  cfg.timing.alpha = tm.at("alpha").get<double>();
  cfg.timing.delta = tm.value("delta", 0.0);
  cfg.p_s_max = j.at("p_s_max").get<double>();
  cfg.p_r_max = j.at("p_r_max").get<double>();
  cfg.r_min = j.at("r_min").get<double>();
  cfg.long_term_average = j.value("long_term_average", false);
  const json& tr = j.at("traffic");
  if (tr.is_object()) {
    // One description shared by every band.
    cfg.traffic.assign(cfg.n_bands, traffic_from(tr));
  } else {
    for (const auto& item : tr) cfg.traffic.push_back(traffic_from(item));
  }
  cfg.validate();
  return cfg;
}

ChannelModel channel_from(const json& j) {
  ChannelModel ch;
  ch.sinr_sd_db = j.value("sinr_sd_db", ch.sinr_sd_db);
  ch.sinr_sr_db = j.value("sinr_sr_db", ch.sinr_sr_db);
  ch.sinr_rd_db = j.value("sinr_rd_db", ch.sinr_rd_db);
  return ch;
}

json channel_json(const ChannelModel& ch) {
  return json{{"sinr_sd_db", ch.sinr_sd_db},
              {"sinr_sr_db", ch.sinr_sr_db},
              {"sinr_rd_db", ch.sinr_rd_db}};
}

json duals_json(const DualVars& nu) {
  return json{{"zeta", nu.zeta},
              {"sigma", nu.sigma},
              {"epsilon", nu.epsilon},
              {"eta", nu.eta}};
}

DualVars duals_from(const json& j) {
  DualVars nu;
  nu.zeta = j.at("zeta").get<double>();
  nu.sigma = j.at("sigma").get<double>();
  nu.epsilon = j.at("epsilon").get<double>();
  nu.eta = j.at("eta").get<double>();
  return nu;
}

Strategy strategy_from(const std::string& name) {
  for (Strategy s : {Strategy::TwoSensing, Strategy::Phase1Only,
                     Strategy::SensingFree, Strategy::RelayFree})
    if (name == to_string(s)) return s;
  throw std::invalid_argument("unknown strategy: " + name);
}

SolveStatus status_from(const std::string& name) {
  for (SolveStatus s : {SolveStatus::Optimal, SolveStatus::Infeasible,
                        SolveStatus::MaxIterations})
    if (name == to_string(s)) return s;
  throw std::invalid_argument("unknown status: " + name);
}

json intervals_json(const IntervalSet& set) {
  json arr = json::array();
  for (const auto& piece : set.pieces())
    arr.push_back(json::array({piece.lo, piece.hi}));
  return arr;
}

}  // namespace

LoadedConfig parse_config(const std::string& text) {
  try {
    const json j = json::parse(text);
    LoadedConfig out;
    out.config = config_from(j);
    if (j.contains("channel")) out.channel = channel_from(j.at("channel"));
    return out;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config parse: ") + e.what());
  }
}

LoadedConfig load_config(const std::string& path) {
  return parse_config(slurp(path));
}

std::string config_to_json(const SystemConfig& cfg, const ChannelModel& ch) {
  json j = config_json_doc(cfg);
  j["channel"] = channel_json(ch);
  return j.dump(2) + "\n";
}

std::uint64_t config_fingerprint(const SystemConfig& cfg) {
  const std::string canon = config_json_doc(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string policy_to_json(const TrainedPolicy& policy) {
  json j;
  j["strategy"] = to_string(policy.strategy);
  j["duals"] = duals_json(policy.duals);
  j["seed"] = policy.seed;
  j["sample_count"] = policy.sample_count;
  j["iterations"] = policy.iterations;
  j["status"] = to_string(policy.status);
  j["final_subgradient_norm"] = policy.final_subgradient_norm;
  j["theta_scale"] = policy.theta_scale;
  j["expected"] = {{"objective", policy.expected_objective},
                   {"r1", policy.expected_r1},
                   {"r2", policy.expected_r2},
                   {"source_power", policy.expected_source_power},
                   {"relay_power", policy.expected_relay_power}};
  j["config"] = config_json_doc(policy.config);
  j["channel"] = channel_json(policy.channel);
  j["config_fingerprint"] = config_fingerprint(policy.config);
  return j.dump(2) + "\n";
}

TrainedPolicy policy_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TrainedPolicy p;
    p.strategy = strategy_from(j.at("strategy").get<std::string>());
    p.duals = duals_from(j.at("duals"));
    p.seed = j.at("seed").get<std::uint64_t>();
    p.sample_count = j.at("sample_count").get<int>();
    p.iterations = j.at("iterations").get<int>();
    p.status = status_from(j.at("status").get<std::string>());
    p.final_subgradient_norm = j.at("final_subgradient_norm").get<double>();
    p.theta_scale = j.at("theta_scale").get<double>();
    const json& e = j.at("expected");
    p.expected_objective = e.at("objective").get<double>();
    p.expected_r1 = e.at("r1").get<double>();
    p.expected_r2 = e.at("r2").get<double>();
    p.expected_source_power = e.at("source_power").get<double>();
    p.expected_relay_power = e.at("relay_power").get<double>();
    p.config = config_from(j.at("config"));
    p.channel = channel_from(j.at("channel"));
    const auto stored = j.at("config_fingerprint").get<std::uint64_t>();
    if (stored != config_fingerprint(p.config))
      throw std::invalid_argument("policy fingerprint does not match config");
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("policy parse: ") + e.what());
  }
}

void save_policy(const TrainedPolicy& policy, const std::string& path) {
  spit(path, policy_to_json(policy));
}

TrainedPolicy load_policy(const std::string& path) {
  return policy_from_json(slurp(path));
}

std::string report_to_json(const SolverReport& report) {
  json j;
  j["status"] = to_string(report.status);
  j["iterations"] = report.iterations;
  j["objective"] = report.objective;
  j["dual_bound"] = report.dual_bound;
  j["kkt_residual"] = report.kkt_residual;
  j["r1"] = report.r1;
  j["r2"] = report.r2;
  j["source_power"] = report.source_power;
  j["relay_power"] = report.relay_power;
  j["duals"] = duals_json(report.duals);
  json alloc;
  alloc["theta1_hat"] = report.allocation.theta1_hat;
  alloc["theta2_hat"] = report.allocation.theta2_hat;
  alloc["p_s1"] = report.allocation.p_s1;
  alloc["p_s2"] = report.allocation.p_s2;
  alloc["p_r"] = report.allocation.p_r;
  json w1 = json::array();
  for (const auto& set : report.allocation.intervals1)
    w1.push_back(intervals_json(set));
  json w2 = json::array();
  for (const auto& set : report.allocation.intervals2)
    w2.push_back(intervals_json(set));
  alloc["windows1"] = w1;
  alloc["windows2"] = w2;
  j["allocation"] = alloc;
  return j.dump(2) + "\n";
}

}  // namespace crn
