#include "crn/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crn {
namespace {

constexpr double kThetaSlack = 1e-12;

void require_state(int s) {
  if (s != 0 && s != 1) throw std::domain_error("traffic state must be 0 or 1");
}

double clamp_theta(double theta, double bound, const char* what) {
  if (!(theta >= -kThetaSlack) || !(theta <= bound + kThetaSlack))
    throw std::domain_error(what);
  return std::clamp(theta, 0.0, bound);
}

// Shared closed forms. Windows are measured in fractions of t_f, so only the
// product (lambda+mu)*t_f enters; `head` is the gap between the conditioning
// instant and the window start (IDLE sensed), `tail` the gap between the
// conditioning instant and the window end (ACTIVE sensed).
double collision_idle(double theta, double head, const TrafficParams& tp,
                      double t_f) {
  const double rt = tp.rate_sum() * t_f;
  return tp.stationary_active() * t_f *
         (theta + std::exp(-rt * head) * std::expm1(-rt * theta) / rt);
}

double collision_active(double theta, double tail, const TrafficParams& tp,
                        double t_f) {
  const double rt = tp.rate_sum() * t_f;
  return tp.stationary_active() * t_f *
         (theta +
          (tp.mu / tp.lambda) * std::exp(-rt * tail) * std::expm1(rt * theta) / rt);
}

double slope_idle(double theta, double head, const TrafficParams& tp,
                  double t_f) {
  const double rt = tp.rate_sum() * t_f;
  return tp.stationary_active() * t_f * (1.0 - std::exp(-rt * (head + theta)));
}

double slope_active(double theta, double tail, const TrafficParams& tp,
                    double t_f) {
  const double rt = tp.rate_sum() * t_f;
  return tp.stationary_active() * t_f *
         (1.0 + (tp.mu / tp.lambda) * std::exp(-rt * (tail - theta)));
}

}  // namespace

void TrafficParams::validate() const {
  if (!(lambda > 0.0) || !(mu > 0.0) || !std::isfinite(lambda) ||
      !std::isfinite(mu))
    throw std::domain_error("traffic rates must be positive and finite");
}

void FrameTiming::validate() const {
  if (!(t_f > 0.0) || !std::isfinite(t_f))
    throw std::domain_error("frame duration must be positive and finite");
  if (!(delta >= 0.0) || !(delta < 1.0))
    throw std::domain_error("delta must lie in [0, 1)");
  if (!(alpha > delta) || !(alpha < 1.0))
    throw std::domain_error("alpha must lie in (delta, 1)");
}

double transition_prob(const TrafficParams& tp, double t, int from, int to) {
  tp.validate();
  require_state(from);
  require_state(to);
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::domain_error("transition time must be non-negative and finite");
  const double r = tp.rate_sum();
  const double decay = std::exp(-r * t);
  double p_active;  // Pr{X(t)=1 | X(0)=from}
  if (from == 0)
    p_active = tp.lambda * (1.0 - decay) / r;
  else
    p_active = (tp.lambda + tp.mu * decay) / r;
  return to == 1 ? p_active : 1.0 - p_active;
}

double stationary_active_prob(const TrafficParams& tp) {
  tp.validate();
  return tp.stationary_active();
}

double expected_collision_phase1(double theta, int sensed,
                                 const TrafficParams& tp,
                                 const FrameTiming& tm) {
  tp.validate();
  tm.validate();
  require_state(sensed);
  theta = clamp_theta(theta, tm.alpha - tm.delta,
                      "phase-1 theta outside [0, alpha-delta]");
  if (theta == 0.0) return 0.0;
  return sensed == 0 ? collision_idle(theta, tm.delta, tp, tm.t_f)
                     : collision_active(theta, tm.alpha, tp, tm.t_f);
}

double expected_collision_phase2(double theta, int sensed,
                                 const TrafficParams& tp,
                                 const FrameTiming& tm) {
  tp.validate();
  tm.validate();
  require_state(sensed);
  theta = clamp_theta(theta, 1.0 - tm.alpha,
                      "phase-2 theta outside [0, 1-alpha]");
  if (theta == 0.0) return 0.0;
  return sensed == 0 ? collision_idle(theta, tm.alpha, tp, tm.t_f)
                     : collision_active(theta, 1.0, tp, tm.t_f);
}

double expected_collision_phase2_resensed(double theta, int sensed,
                                          const TrafficParams& tp,
                                          const FrameTiming& tm) {
  tp.validate();
  tm.validate();
  require_state(sensed);
  theta = clamp_theta(theta, 1.0 - tm.alpha - tm.delta,
                      "re-sensed phase-2 theta outside [0, 1-alpha-delta]");
  if (theta == 0.0) return 0.0;
  // Conditioning moves to the phase boundary: the window head gap is delta,
  // the window tail gap is 1-alpha.
  return sensed == 0 ? collision_idle(theta, tm.delta, tp, tm.t_f)
                     : collision_active(theta, 1.0 - tm.alpha, tp, tm.t_f);
}

double collision_slope_phase1(double theta, int sensed,
                              const TrafficParams& tp, const FrameTiming& tm) {
  tp.validate();
  tm.validate();
  require_state(sensed);
  theta = clamp_theta(theta, tm.alpha - tm.delta,
                      "phase-1 theta outside [0, alpha-delta]");
  return sensed == 0 ? slope_idle(theta, tm.delta, tp, tm.t_f)
                     : slope_active(theta, tm.alpha, tp, tm.t_f);
}

double collision_slope_phase2(double theta, int sensed,
                              const TrafficParams& tp, const FrameTiming& tm) {
  tp.validate();
  tm.validate();
  require_state(sensed);
  theta = clamp_theta(theta, 1.0 - tm.alpha,
                      "phase-2 theta outside [0, 1-alpha]");
  return sensed == 0 ? slope_idle(theta, tm.alpha, tp, tm.t_f)
                     : slope_active(theta, 1.0, tp, tm.t_f);
}

double collision_slope_phase2_resensed(double theta, int sensed,
                                       const TrafficParams& tp,
                                       const FrameTiming& tm) {
  tp.validate();
  tm.validate();
  require_state(sensed);
  theta = clamp_theta(theta, 1.0 - tm.alpha - tm.delta,
                      "re-sensed phase-2 theta outside [0, 1-alpha-delta]");
  return sensed == 0 ? slope_idle(theta, tm.delta, tp, tm.t_f)
                     : slope_active(theta, 1.0 - tm.alpha, tp, tm.t_f);
}

double expected_active_time(const IntervalSet& spans, int from,
                            const TrafficParams& tp, double t0) {
  tp.validate();
  require_state(from);
  const double r = tp.rate_sum();
  const double pia = tp.stationary_active();
  double total = 0.0;
  for (const auto& p : spans.pieces()) {
    const double u = p.lo - t0;
    const double v = p.hi - t0;
    if (u < -1e-9)
      throw std::domain_error("interval starts before the conditioning time");
    const double du = std::exp(-r * v) - std::exp(-r * std::max(u, 0.0));
    if (from == 0)
      total += pia * ((v - u) + du / r);
    else
      total += pia * (v - u) - (tp.mu / (r * r)) * du;
  }
  return total;
}

int SamplePath::state_at(double t) const {
  const auto it =
      std::upper_bound(transitions.begin(), transitions.end(), t);
  const auto flips = static_cast<std::size_t>(it - transitions.begin());
  return (flips % 2 == 0) ? initial_state : 1 - initial_state;
}

SamplePath sample_path(const TrafficParams& tp, std::optional<int> x0,
                       double duration, Rng& rng) {
  tp.validate();
  if (!(duration >= 0.0) || !std::isfinite(duration))
    throw std::domain_error("path duration must be non-negative and finite");
  SamplePath path;
  path.duration = duration;
  if (x0) {
    require_state(*x0);
    path.initial_state = *x0;
  } else {
    path.initial_state = rng.bernoulli(tp.stationary_active()) ? 1 : 0;
  }
  int state = path.initial_state;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(state == 1 ? tp.mu : tp.lambda);
    if (!(t <= duration)) break;
    path.transitions.push_back(t);
    state = 1 - state;
  }
  return path;
}

double collision_time(const SamplePath& path, const IntervalSet& spans) {
  spans.require_within(0.0, path.duration);
  double total = 0.0;
  int state = path.initial_state;
  double seg_lo = 0.0;
  for (std::size_t i = 0; i <= path.transitions.size(); ++i) {
    const double seg_hi =
        i < path.transitions.size() ? path.transitions[i] : path.duration;
    if (state == 1) total += spans.overlap(seg_lo, seg_hi);
    seg_lo = seg_hi;
    state = 1 - state;
  }
  return total;
}

}  // namespace crn
