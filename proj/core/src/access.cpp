#include "crn/access.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crn {
namespace {

constexpr double kSlack = 1e-12;

double checked_theta(double theta, double bound, const char* what) {
  if (!(theta >= -kSlack) || !(theta <= bound + kSlack))
    throw std::domain_error(what);
  return std::clamp(theta, 0.0, bound);
}

IntervalSet window(double start_frac, double theta, double t_f) {
  if (theta <= 0.0) return IntervalSet{};
  return IntervalSet::single(start_frac * t_f, (start_frac + theta) * t_f);
}

void require_state(int s) {
  if (s != 0 && s != 1)
    throw std::domain_error("sensing outcome must be 0 or 1");
}

}  // namespace

IntervalSet place_phase1(double theta_hat, int sensed, const FrameTiming& tm) {
  tm.validate();
  require_state(sensed);
  theta_hat = checked_theta(theta_hat, tm.alpha - tm.delta,
                            "phase-1 theta outside [0, alpha-delta]");
  return sensed == 0 ? window(tm.delta, theta_hat, tm.t_f)
                     : window(tm.alpha - theta_hat, theta_hat, tm.t_f);
}

IntervalSet place_phase2(double theta_hat, int sensed, const FrameTiming& tm) {
  tm.validate();
  require_state(sensed);
  theta_hat = checked_theta(theta_hat, 1.0 - tm.alpha,
                            "phase-2 theta outside [0, 1-alpha]");
  return sensed == 0 ? window(tm.alpha, theta_hat, tm.t_f)
                     : window(1.0 - theta_hat, theta_hat, tm.t_f);
}

IntervalSet place_phase2_resensed(double theta_hat, int sensed,
                                  const FrameTiming& tm) {
  tm.validate();
  require_state(sensed);
  theta_hat = checked_theta(theta_hat, 1.0 - tm.alpha - tm.delta,
                            "re-sensed phase-2 theta outside [0, 1-alpha-delta]");
  return sensed == 0 ? window(tm.alpha + tm.delta, theta_hat, tm.t_f)
                     : window(1.0 - theta_hat, theta_hat, tm.t_f);
}

std::vector<double> align_band(const std::vector<double>& theta_per_subchannel,
                               const std::vector<std::vector<int>>& band_map) {
  std::vector<double> aligned(band_map.size(), 0.0);
  for (std::size_t m = 0; m < band_map.size(); ++m) {
    for (int n : band_map[m]) {
      if (n < 0 || n >= static_cast<int>(theta_per_subchannel.size()))
        throw std::domain_error("band_map references an unknown sub-channel");
      aligned[m] = std::max(aligned[m], theta_per_subchannel[n]);
    }
  }
  return aligned;
}

double frame_interference(const std::vector<double>& theta1_hat,
                          const std::vector<double>& theta2_hat,
                          const std::vector<int>& x, const SystemConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(cfg.n_bands);
  if (theta1_hat.size() != m || theta2_hat.size() != m || x.size() != m)
    throw std::domain_error("per-band inputs have wrong length");
  double total = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    const TrafficParams& tp = cfg.band_traffic(static_cast<int>(b));
    total += expected_collision_phase1(theta1_hat[b], x[b], tp, cfg.timing);
    total += expected_collision_phase2(theta2_hat[b], x[b], tp, cfg.timing);
  }
  return total;
}

double frame_interference_resensed(const std::vector<double>& theta1_hat,
                                   const std::vector<double>& theta2_hat,
                                   const std::vector<int>& x,
                                   const std::vector<int>& y,
                                   const SystemConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(cfg.n_bands);
  if (theta1_hat.size() != m || theta2_hat.size() != m || x.size() != m ||
      y.size() != m)
    throw std::domain_error("per-band inputs have wrong length");
  double total = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    const TrafficParams& tp = cfg.band_traffic(static_cast<int>(b));
    total += expected_collision_phase1(theta1_hat[b], x[b], tp, cfg.timing);
    total +=
        expected_collision_phase2_resensed(theta2_hat[b], y[b], tp, cfg.timing);
  }
  return total;
}

}  // namespace crn
