#pragma once

#include <cstdint>
#include <string>

#include "crn/ergodic_solver.hpp"
#include "crn/frame_solver.hpp"
#include "crn/netmodel.hpp"

namespace crn {

// Textual (JSON) round-trips for the run inputs and outputs. Parsing
// failures and schema violations throw std::invalid_argument; the document
// layout is described in the README.

struct LoadedConfig {
  SystemConfig config;
  ChannelModel channel;  // defaults apply when the document omits it
};

LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config(const std::string& path);
std::string config_to_json(const SystemConfig& cfg, const ChannelModel& ch);

// FNV-1a over the canonical config serialization; stored inside saved
// policies so a policy cannot be replayed against a different deployment.
std::uint64_t config_fingerprint(const SystemConfig& cfg);

std::string policy_to_json(const TrainedPolicy& policy);
TrainedPolicy policy_from_json(const std::string& text);
void save_policy(const TrainedPolicy& policy, const std::string& path);
TrainedPolicy load_policy(const std::string& path);

std::string report_to_json(const SolverReport& report);

}  // namespace crn
