#include "crn/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crn {
namespace {

// Stream tags for the sampling helpers; part of the reproducibility contract.
constexpr std::uint64_t kGainTag = 0x6741494e;     // "gAIN"
constexpr std::uint64_t kSensingTag = 0x73454e53;  // "sENS"

void require_sizes(const char* what, std::size_t got, std::size_t want) {
  if (got != want) throw std::domain_error(std::string(what) + " has wrong length");
}

}  // namespace

void SystemConfig::validate() const {
  try {
    timing.validate();
    if (n_subchannels <= 0) throw std::domain_error("need at least one sub-channel");
    if (n_bands <= 0) throw std::domain_error("need at least one band");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw std::domain_error("bandwidth must be positive");
    if (!(p_s_max >= 0.0) || !(p_r_max >= 0.0))
      throw std::domain_error("power budgets must be non-negative");
    if (!(r_min >= 0.0) || !std::isfinite(r_min))
      throw std::domain_error("rate target must be non-negative and finite");
    if (static_cast<int>(band_map.size()) != n_bands)
      throw std::domain_error("band_map must list every band");
    std::vector<int> seen(n_subchannels, 0);
    for (const auto& band : band_map) {
      if (band.empty()) throw std::domain_error("band without sub-channels");
      for (int n : band) {
        if (n < 0 || n >= n_subchannels)
          throw std::domain_error("band_map references an unknown sub-channel");
        if (seen[n]++) throw std::domain_error("sub-channel in two bands");
      }
    }
    for (int n = 0; n < n_subchannels; ++n)
      if (!seen[n]) throw std::domain_error("sub-channel not assigned to a band");
    if (static_cast<int>(traffic.size()) != n_bands)
      throw std::domain_error("need one traffic description per band");
    for (const auto& tp : traffic) tp.validate();
  } catch (const std::domain_error& e) {
    throw std::invalid_argument(std::string("invalid system config: ") + e.what());
  }
}

std::vector<int> SystemConfig::subchannel_band() const {
  std::vector<int> band(n_subchannels, -1);
  for (int m = 0; m < n_bands; ++m)
    for (int n : band_map[m]) band[n] = m;
  return band;
}

void Nsi::validate(const SystemConfig& cfg) const {
  const auto n = static_cast<std::size_t>(cfg.n_subchannels);
  const auto m = static_cast<std::size_t>(cfg.n_bands);
  require_sizes("g_sr", g_sr.size(), n);
  require_sizes("g_sd", g_sd.size(), n);
  require_sizes("g_rd", g_rd.size(), n);
  require_sizes("x", x.size(), m);
  if (!y.empty()) require_sizes("y", y.size(), m);
  for (std::size_t i = 0; i < n; ++i)
    if (!(g_sr[i] >= 0.0) || !(g_sd[i] >= 0.0) || !(g_rd[i] >= 0.0))
      throw std::domain_error("channel gains must be non-negative");
  for (int v : x)
    if (v != 0 && v != 1) throw std::domain_error("sensing outcome must be 0/1");
  for (int v : y)
    if (v != 0 && v != 1) throw std::domain_error("sensing outcome must be 0/1");
}

Allocation Allocation::zero(const SystemConfig& cfg) {
  Allocation a;
  a.p_s1.assign(cfg.n_subchannels, 0.0);
  a.p_s2.assign(cfg.n_subchannels, 0.0);
  a.p_r.assign(cfg.n_subchannels, 0.0);
  a.theta1_hat.assign(cfg.n_bands, 0.0);
  a.theta2_hat.assign(cfg.n_bands, 0.0);
  a.intervals1.assign(cfg.n_bands, IntervalSet{});
  a.intervals2.assign(cfg.n_bands, IntervalSet{});
  return a;
}

void Allocation::validate(const SystemConfig& cfg) const {
  const auto n = static_cast<std::size_t>(cfg.n_subchannels);
  const auto m = static_cast<std::size_t>(cfg.n_bands);
  require_sizes("p_s1", p_s1.size(), n);
  require_sizes("p_s2", p_s2.size(), n);
  require_sizes("p_r", p_r.size(), n);
  require_sizes("theta1_hat", theta1_hat.size(), m);
  require_sizes("theta2_hat", theta2_hat.size(), m);
  require_sizes("intervals1", intervals1.size(), m);
  require_sizes("intervals2", intervals2.size(), m);
  const double t_f = cfg.timing.t_f;
  const double tol = 1e-9 * std::max(1.0, t_f);
  const auto band_of = cfg.subchannel_band();
  for (std::size_t b = 0; b < m; ++b) {
    if (std::abs(intervals1[b].measure() - theta1_hat[b] * t_f) > tol)
      throw std::domain_error("phase-1 window measure disagrees with theta1_hat");
    if (std::abs(intervals2[b].measure() - theta2_hat[b] * t_f) > tol)
      throw std::domain_error("phase-2 window measure disagrees with theta2_hat");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int b = band_of[i];
    if (theta1_hat[b] == 0.0 && p_s1[i] != 0.0)
      throw std::domain_error("power assigned to a band with zero phase-1 time");
    if (theta2_hat[b] == 0.0 && (p_s2[i] != 0.0 || p_r[i] != 0.0))
      throw std::domain_error("power assigned to a band with zero phase-2 time");
    if (!(p_s1[i] >= 0.0) || !(p_s2[i] >= 0.0) || !(p_r[i] >= 0.0))
      throw std::domain_error("negative transmit power");
  }
}

double Allocation::source_power() const {
  double total = 0.0;
  for (double p : p_s1) total += p;
  for (double p : p_s2) total += p;
  return total;
}

double Allocation::relay_power() const {
  double total = 0.0;
  for (double p : p_r) total += p;
  return total;
}

double rate_term(double theta, double power, double gain) {
  if (theta <= 0.0) return 0.0;
  return theta * std::log2(1.0 + power * gain / theta);
}

double rate_r1(const Allocation& a, const Nsi& nsi, const SystemConfig& cfg) {
  const auto band_of = cfg.subchannel_band();
  double rate = 0.0;
  for (int n = 0; n < cfg.n_subchannels; ++n) {
    const int b = band_of[n];
    const double a1 = std::max(nsi.g_sr[n], nsi.g_sd[n]);
    rate += rate_term(a.theta1_hat[b], a.p_s1[n], a1);
    rate += rate_term(a.theta2_hat[b], a.p_s2[n], nsi.g_sd[n]);
  }
  return cfg.bandwidth * rate;
}

double rate_r2(const Allocation& a, const Nsi& nsi, const SystemConfig& cfg) {
  const auto band_of = cfg.subchannel_band();
  double rate = 0.0;
  for (int n = 0; n < cfg.n_subchannels; ++n) {
    const int b = band_of[n];
    rate += rate_term(a.theta1_hat[b], a.p_s1[n], nsi.g_sd[n]);
    const double theta2 = a.theta2_hat[b];
    if (theta2 > 0.0)
      rate += theta2 * std::log2(1.0 + (a.p_s2[n] * nsi.g_sd[n] +
                                        a.p_r[n] * nsi.g_rd[n]) /
                                           theta2);
  }
  return cfg.bandwidth * rate;
}

double rate_crn(const Allocation& a, const Nsi& nsi, const SystemConfig& cfg) {
  return std::min(rate_r1(a, nsi, cfg), rate_r2(a, nsi, cfg));
}

double ChannelModel::mean_sd() const { return std::pow(10.0, sinr_sd_db / 10.0); }
double ChannelModel::mean_sr() const { return std::pow(10.0, sinr_sr_db / 10.0); }
double ChannelModel::mean_rd() const { return std::pow(10.0, sinr_rd_db / 10.0); }

void sample_gains(const ChannelModel& ch, const SystemConfig& cfg,
                  std::uint64_t seed, std::uint64_t frame, Nsi& nsi) {
  Rng rng(seed, derive_stream(seed, kGainTag, frame));
  const int n = cfg.n_subchannels;
  nsi.g_sr.resize(n);
  nsi.g_sd.resize(n);
  nsi.g_rd.resize(n);
  for (int i = 0; i < n; ++i) nsi.g_sr[i] = ch.mean_sr() * rng.exponential(1.0);
  for (int i = 0; i < n; ++i) nsi.g_sd[i] = ch.mean_sd() * rng.exponential(1.0);
  for (int i = 0; i < n; ++i) nsi.g_rd[i] = ch.mean_rd() * rng.exponential(1.0);
}

void sample_sensing(const SystemConfig& cfg, std::uint64_t seed,
                    std::uint64_t frame, Nsi& nsi) {
  Rng rng(seed, derive_stream(seed, kSensingTag, frame));
  const double horizon = cfg.timing.alpha * cfg.timing.t_f;
  nsi.x.resize(cfg.n_bands);
  nsi.y.resize(cfg.n_bands);
  for (int m = 0; m < cfg.n_bands; ++m) {
    const TrafficParams& tp = cfg.band_traffic(m);
    nsi.x[m] = rng.bernoulli(tp.stationary_active()) ? 1 : 0;
    nsi.y[m] = rng.bernoulli(transition_prob(tp, horizon, nsi.x[m], 1)) ? 1 : 0;
  }
}

}  // namespace crn
