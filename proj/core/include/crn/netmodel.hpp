#pragma once

#include <cstdint>
#include <vector>

#include "crn/interval.hpp"
#include "crn/rng.hpp"
#include "crn/traffic.hpp"

namespace crn {

// Static description of one deployment: N sub-channels grouped into M
// licensed bands, frame timing, power budgets and the rate target. When
// `long_term_average` is set the budgets and the rate target are read as
// long-run expectations instead of per-frame requirements.
struct SystemConfig {
  int n_subchannels = 0;
  int n_bands = 0;
  std::vector<std::vector<int>> band_map;  // 0-based sub-channel ids per band
  double bandwidth = 1.0;                  // per sub-channel, Hz
  FrameTiming timing;
  double p_s_max = 1.0;
  double p_r_max = 1.0;
  double r_min = 0.0;
  bool long_term_average = false;
  std::vector<TrafficParams> traffic;  // one entry per band

  void validate() const;  // throws std::invalid_argument
  // Inverse of band_map: sub-channel -> band index.
  std::vector<int> subchannel_band() const;
  const TrafficParams& band_traffic(int band) const { return traffic.at(band); }
};

// Per-frame network state information: channel gains per sub-channel plus
// the sensing outcomes per band. `y` (the re-sensing at the phase boundary)
// may be empty when only the frame-start sensing is available.
struct Nsi {
  std::vector<double> g_sr;  // source -> relay
  std::vector<double> g_sd;  // source -> destination
  std::vector<double> g_rd;  // relay -> destination
  std::vector<int> x;        // per band, state sensed at t = 0
  std::vector<int> y;        // per band, state sensed at t = alpha*t_f

  bool has_resensing() const { return !y.empty(); }
  void validate(const SystemConfig& cfg) const;
};

// One frame's decisions: transmit powers per sub-channel, aligned
// transmission fractions per band and the placed transmission windows.
struct Allocation {
  std::vector<double> p_s1;  // source, phase 1
  std::vector<double> p_s2;  // source, phase 2
  std::vector<double> p_r;   // relay, phase 2
  std::vector<double> theta1_hat;         // per band
  std::vector<double> theta2_hat;         // per band
  std::vector<IntervalSet> intervals1;    // per band
  std::vector<IntervalSet> intervals2;    // per band

  static Allocation zero(const SystemConfig& cfg);
  // Checks sizes, window measures against theta*t_f and the "no power on a
  // zero-theta band" rule. Throws std::domain_error.
  void validate(const SystemConfig& cfg) const;

  double source_power() const;
  double relay_power() const;
};

// Per-term rate kernel theta * log2(1 + power*gain/theta), defined as 0 when
// theta == 0.
double rate_term(double theta, double power, double gain);

// Decode-and-forward two-phase rates. Phase 1 the relay and destination both
// listen (the binding gain is max(g_sr, g_sd)); phase 2 the source and relay
// transmit together and the destination combines.
double rate_r1(const Allocation& a, const Nsi& nsi, const SystemConfig& cfg);
double rate_r2(const Allocation& a, const Nsi& nsi, const SystemConfig& cfg);
double rate_crn(const Allocation& a, const Nsi& nsi, const SystemConfig& cfg);

// Rayleigh-fading channel: gains are exponential with the configured means
// (linear scale, derived from mean SINR in dB for a unit reference budget).
struct ChannelModel {
  double sinr_sd_db = 5.0;
  double sinr_sr_db = 17.0;
  double sinr_rd_db = 17.0;

  double mean_sd() const;
  double mean_sr() const;
  double mean_rd() const;
};

// Fills the gain vectors of `nsi` for one frame. Draw order is fixed (all
// s-r, then s-d, then r-d) from a substream derived as (seed, tag, frame).
void sample_gains(const ChannelModel& ch, const SystemConfig& cfg,
                  std::uint64_t seed, std::uint64_t frame, Nsi& nsi);

// Draws sensing outcomes per band: x from the stationary law, y given x via
// the transition kernel over alpha*t_f.
void sample_sensing(const SystemConfig& cfg, std::uint64_t seed,
                    std::uint64_t frame, Nsi& nsi);

}  // namespace crn
