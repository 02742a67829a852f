#include "crn/ergodic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "crn/access.hpp"
#include "solver_detail.hpp"

namespace crn {
namespace {

void require_nonneg_duals(const DualVars& nu) {
  if (!(nu.zeta >= 0.0) || !(nu.sigma >= 0.0) || !(nu.epsilon >= 0.0) ||
      !(nu.eta >= 0.0))
    throw std::domain_error("multipliers must be non-negative");
}

void zero_relay_links(Nsi& nsi) {
  std::fill(nsi.g_sr.begin(), nsi.g_sr.end(), 0.0);
  std::fill(nsi.g_rd.begin(), nsi.g_rd.end(), 0.0);
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::TwoSensing: return "two-sensing";
    case Strategy::Phase1Only: return "phase1-only";
    case Strategy::SensingFree: return "sensing-free";
    case Strategy::RelayFree: return "relay-free";
  }
  return "unknown";
}

double theta_phase2_resensed(const DualVars& nu,
                             const std::vector<PowerRatios>& ratios,
                             const Nsi& nsi, int sensed, int band,
                             const SystemConfig& cfg) {
  if (sensed != 0 && sensed != 1)
    throw std::domain_error("sensing outcome must be 0 or 1");
  if (band < 0 || band >= cfg.n_bands)
    throw std::domain_error("band index out of range");
  const double s =
      detail::band_slope_phase2(nu, ratios, nsi, cfg.band_map[band]);
  const TrafficParams& tp = cfg.band_traffic(band);
  const double bound = 1.0 - cfg.timing.alpha - cfg.timing.delta;
  return sensed == 0
             ? detail::theta_idle_rule(s, tp, cfg.timing.t_f, cfg.timing.delta,
                                       bound)
             : detail::theta_active_rule(s, tp, cfg.timing.t_f,
                                         1.0 - cfg.timing.alpha, bound);
}

Allocation inner_solution_resensed(const DualVars& nu, const Nsi& nsi,
                                   const SystemConfig& cfg) {
  cfg.validate();
  nsi.validate(cfg);
  require_nonneg_duals(nu);
  if (!nsi.has_resensing())
    throw std::domain_error("re-sensed inner solution requires nsi.y");
  const auto band_of = cfg.subchannel_band();
  return detail::inner_eval_adaptive(nu, nsi, cfg, band_of,
                                     detail::Phase2Mode::Resensed)
      .alloc;
}

namespace {

struct MeanEval {
  double r1 = 0.0;
  double r2 = 0.0;
  double ps = 0.0;
  double pr = 0.0;
  double obj = 0.0;
};

MeanEval sample_mean(const DualVars& nu, const std::vector<Nsi>& samples,
                     const SystemConfig& cfg, const std::vector<int>& band_of,
                     detail::Phase2Mode mode, bool stationary,
                     detail::LeanScratch& scratch) {
  MeanEval m;
  for (const Nsi& s : samples) {
    const detail::LeanEval ev =
        detail::inner_eval_lean(nu, s, cfg, band_of, mode, stationary, scratch);
    m.r1 += ev.r1;
    m.r2 += ev.r2;
    m.ps += ev.ps;
    m.pr += ev.pr;
    m.obj += ev.model_objective;
  }
  const double k = static_cast<double>(samples.size());
  m.r1 /= k;
  m.r2 /= k;
  m.ps /= k;
  m.pr /= k;
  m.obj /= k;
  return m;
}

}  // namespace

TrainedPolicy train_offline(const SystemConfig& cfg, Strategy strategy,
                            std::uint64_t seed, const TrainingOptions& opts) {
  cfg.validate();
  if (opts.sample_count <= 0 || opts.max_iter <= 0)
    throw std::invalid_argument(
        "training needs positive sample and iteration counts");
  const auto band_of = cfg.subchannel_band();
  const bool stationary = strategy == Strategy::SensingFree;
  const detail::Phase2Mode mode = strategy == Strategy::Phase1Only
                                      ? detail::Phase2Mode::FrameSensing
                                      : detail::Phase2Mode::Resensed;

  std::vector<Nsi> samples;
  samples.reserve(opts.sample_count);
  for (int k = 0; k < opts.sample_count; ++k) {
    Nsi s;
    sample_gains(opts.channel, cfg, seed, static_cast<std::uint64_t>(k), s);
    sample_sensing(cfg, seed, static_cast<std::uint64_t>(k), s);
    if (strategy == Strategy::RelayFree) zero_relay_links(s);
    samples.push_back(std::move(s));
  }

  const double step0 = opts.step0 > 0.0
                           ? opts.step0
                           : 1.0 / (1.0 + cfg.r_min / cfg.bandwidth);
  const double rate_scale = std::max(1.0, cfg.r_min / cfg.bandwidth);
  // No feasible frame can collide for more than one full window per phase
  // and band, so a dual value above this cap certifies an empty feasible
  // set by weak duality.
  const double obj_cap = 2.0 * static_cast<double>(cfg.n_bands) + 1.0;

  DualVars nu{1.0, 1.0, std::max(1.0, opts.dual_floor),
              std::max(1.0, opts.dual_floor)};
  detail::LeanScratch scratch;

  TrainedPolicy policy;
  policy.strategy = strategy;
  policy.config = cfg;
  policy.channel = opts.channel;
  policy.seed = seed;
  policy.sample_count = opts.sample_count;

  bool has_best = false;
  double best_obj = 0.0;
  DualVars best_nu = nu;
  MeanEval best_mean;
  double best_scale = 1.0;
  double best_dual = -std::numeric_limits<double>::infinity();
  DualVars best_dual_nu = nu;
  bool certified = false;
  double last_h_norm = 0.0;
  int streak = 0;
  int last_improve = 0;
  int iters = 0;

  for (int k = 1; k <= opts.max_iter; ++k) {
    iters = k;
    const MeanEval mean =
        sample_mean(nu, samples, cfg, band_of, mode, stationary, scratch);
    const auto h =
        detail::make_subgradient(mean.r1, mean.r2, mean.ps, mean.pr, cfg);
    last_h_norm = std::sqrt(detail::h_norm2(h));
    const double d = detail::dual_value(mean.obj, nu, h);
    if (d > best_dual) {
      best_dual = d;
      best_dual_nu = nu;
    }

    bool improved = false;
    if (stationary) {
      // Scale the thresholded policy onto the expected rate target; every
      // sample's fractions, powers and objective scale together.
      double scale = 1.0;
      bool ok = true;
      if (cfg.r_min > 0.0) {
        const double rate = std::min(mean.r1, mean.r2);
        ok = rate > 0.0 && cfg.r_min / rate <= 1.0 + 1e-12;
        if (ok) scale = cfg.r_min / rate;
      } else {
        scale = 0.0;
      }
      if (ok) {
        MeanEval cand;
        cand.r1 = scale * mean.r1;
        cand.r2 = scale * mean.r2;
        cand.ps = scale * mean.ps;
        cand.pr = scale * mean.pr;
        cand.obj = scale * mean.obj;
        if (detail::candidate_feasible(cand.r1, cand.r2, cand.ps, cand.pr,
                                       cfg, opts.feas_tol) &&
            (!has_best || cand.obj < best_obj)) {
          improved = !has_best || best_obj - cand.obj >
                                      1e-12 * std::max(1.0, std::abs(best_obj));
          has_best = true;
          best_obj = cand.obj;
          best_nu = nu;
          best_mean = cand;
          best_scale = scale;
        }
      }
    } else if (detail::candidate_feasible(mean.r1, mean.r2, mean.ps, mean.pr,
                                          cfg, opts.feas_tol) &&
               (!has_best || mean.obj < best_obj)) {
      improved = !has_best ||
                 best_obj - mean.obj > 1e-12 * std::max(1.0, std::abs(best_obj));
      has_best = true;
      best_obj = mean.obj;
      best_nu = nu;
      best_mean = mean;
      best_scale = 1.0;
    }
    if (improved) last_improve = k;

    if (opts.on_iteration)
      opts.on_iteration({k, nu, h, d, has_best ? best_obj : 0.0, has_best});

    if (has_best) {
      // A candidate whose objective sits below the dual bound is only
      // tolerance-feasible and understates the optimum; never certify on it.
      const double gap = best_obj - best_dual;
      if (!stationary && gap >= -1e-9 &&
          gap <= opts.gap_tol * std::max(1.0, std::abs(best_obj))) {
        certified = true;
        break;
      }
      if (k - last_improve >= opts.stall_iters && k > opts.warmup) break;
    }

    const bool rate_bad = h[0] > opts.feas_tol * rate_scale ||
                          h[1] > opts.feas_tol * rate_scale;
    streak = rate_bad ? streak + 1 : 0;
    if (!has_best && (streak >= opts.infeasible_streak ||
                      best_dual > obj_cap ||
                      detail::nu_norm(nu) > opts.nu_bound)) {
      policy.iterations = k;
      policy.status = SolveStatus::Infeasible;
      policy.final_subgradient_norm = last_h_norm;
      policy.expected_objective = std::numeric_limits<double>::quiet_NaN();
      policy.duals = nu;
      return policy;
    }

    // Polyak steps need the level above the current dual value; the best
    // candidate can sit below it (it is only tolerance-feasible), which
    // would freeze the iteration, so fall back to the diminishing rule.
    double s = 0.0;
    bool polyak_step = false;
    if (opts.polyak && !stationary && has_best && k > opts.warmup) {
      const double hn = detail::h_norm2(h);
      const double level = best_obj - d;
      if (hn > 0.0 && level > 0.0) {
        s = level / hn;
        polyak_step = true;
      }
    }
    if (!polyak_step) {
      // Normalized diminishing step: one floored multiplier meeting a huge
      // slack must not catapult the others.
      s = step0 / (std::sqrt(static_cast<double>(k)) *
                   std::max(1.0, last_h_norm));
    }
    const DualVars next = detail::project_step(nu, h, s, opts.dual_floor);
    const double moved = detail::nu_distance(next, nu);
    nu = next;
    // A vanishing Polyak step only means the level closed on the current
    // dual value, not that the iterate is stationary.
    if (!polyak_step && moved <= opts.tol) break;
  }

  // When several constraints bind at once, subgradient iterates straddle the
  // binding surface at the step amplitude and may never pass the feasibility
  // tolerance. A Newton polish on the active multipliers lands on the saddle
  // point directly; its inner solution then enters the usual candidate path.
  if (!stationary && !certified) {
    const auto h_at = [&](const DualVars& v) {
      const MeanEval e =
          sample_mean(v, samples, cfg, band_of, mode, stationary, scratch);
      return detail::make_subgradient(e.r1, e.r2, e.ps, e.pr, cfg);
    };
    detail::PolishResult po =
        detail::polish_duals(best_dual_nu, h_at, cfg, opts.dual_floor);
    if (!po.converged && has_best)
      po = detail::polish_duals(best_nu, h_at, cfg, opts.dual_floor);
    if (po.converged) {
      const MeanEval mean =
          sample_mean(po.nu, samples, cfg, band_of, mode, stationary, scratch);
      const auto h =
          detail::make_subgradient(mean.r1, mean.r2, mean.ps, mean.pr, cfg);
      last_h_norm = std::sqrt(detail::h_norm2(h));
      const double d = detail::dual_value(mean.obj, po.nu, h);
      if (d > best_dual) {
        best_dual = d;
        best_dual_nu = po.nu;
      }
      // An essentially exact candidate also displaces an incumbent whose
      // objective undercuts the polished dual value: that incumbent rode a
      // small constraint violation, not a genuinely better allocation.
      const bool exact = detail::candidate_feasible(mean.r1, mean.r2, mean.ps,
                                                    mean.pr, cfg, 1e-9);
      const bool replace =
          exact ? (!has_best || best_obj < d - 1e-9 || mean.obj < best_obj)
                : (detail::candidate_feasible(mean.r1, mean.r2, mean.ps,
                                              mean.pr, cfg, opts.feas_tol) &&
                   (!has_best || mean.obj < best_obj));
      if (replace) {
        has_best = true;
        best_obj = mean.obj;
        best_nu = po.nu;
        best_mean = mean;
        best_scale = 1.0;
      }
    }
  }

  policy.iterations = iters;
  policy.final_subgradient_norm = last_h_norm;
  if (!has_best) {
    policy.status = SolveStatus::MaxIterations;
    policy.duals = nu;
    policy.expected_objective = std::numeric_limits<double>::quiet_NaN();
    return policy;
  }
  policy.duals = best_nu;
  policy.theta_scale = best_scale;
  policy.expected_objective = best_obj;
  policy.expected_r1 = best_mean.r1;
  policy.expected_r2 = best_mean.r2;
  policy.expected_source_power = best_mean.ps;
  policy.expected_relay_power = best_mean.pr;
  if (stationary) {
    policy.status = SolveStatus::Optimal;
  } else {
    const double gap = best_obj - best_dual;
    policy.status = certified ||
                            (gap >= -1e-9 &&
                             gap <= 1e-4 * std::max(1.0, std::abs(best_obj)))
                        ? SolveStatus::Optimal
                        : SolveStatus::MaxIterations;
  }
  return policy;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

double get_f64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr std::array<std::uint8_t, 4> kPacketMagic = {'C', 'R', 'N', 'P'};
constexpr std::uint32_t kPacketVersion = 1;

}  // namespace

std::vector<std::uint8_t> ParameterPacket::serialize() const {
  const auto n = static_cast<std::size_t>(n_subchannels);
  const auto m = static_cast<std::size_t>(n_bands);
  if (n_subchannels < 0 || n_bands < 0 || ratio_p1.size() != n ||
      ratio_p2.size() != n || ratio_q.size() != n || theta1.size() != m ||
      theta2.size() != m)
    throw std::domain_error("packet fields disagree with its dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * (3 * n + 4 * m));
  out.insert(out.end(), kPacketMagic.begin(), kPacketMagic.end());
  put_u32(out, kPacketVersion);
  put_u32(out, static_cast<std::uint32_t>(n_subchannels));
  put_u32(out, static_cast<std::uint32_t>(n_bands));
  for (double v : ratio_p1) put_f64(out, v);
  for (double v : ratio_p2) put_f64(out, v);
  for (double v : ratio_q) put_f64(out, v);
  for (const auto& pair : theta1) {
    put_f64(out, pair[0]);
    put_f64(out, pair[1]);
  }
  for (const auto& pair : theta2) {
    put_f64(out, pair[0]);
    put_f64(out, pair[1]);
  }
  return out;
}

ParameterPacket ParameterPacket::deserialize(
    const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16)
    throw std::invalid_argument("packet record truncated");
  std::size_t pos = 0;
  for (std::uint8_t b : kPacketMagic)
    if (bytes[pos++] != b) throw std::invalid_argument("bad packet magic");
  if (get_u32(bytes, pos) != kPacketVersion)
    throw std::invalid_argument("unsupported packet version");
  const std::uint32_t n = get_u32(bytes, pos);
  const std::uint32_t m = get_u32(bytes, pos);
  if (n > (1u << 20) || m > (1u << 20))
    throw std::invalid_argument("unreasonable packet dimensions");
  const std::size_t want = 16 + 8 * (3 * static_cast<std::size_t>(n) +
                                     4 * static_cast<std::size_t>(m));
  if (bytes.size() != want)
    throw std::invalid_argument("packet length disagrees with its dimensions");
  ParameterPacket pkt;
  pkt.n_subchannels = static_cast<std::int32_t>(n);
  pkt.n_bands = static_cast<std::int32_t>(m);
  pkt.ratio_p1.resize(n);
  pkt.ratio_p2.resize(n);
  pkt.ratio_q.resize(n);
  pkt.theta1.resize(m);
  pkt.theta2.resize(m);
  for (auto& v : pkt.ratio_p1) v = get_f64(bytes, pos);
  for (auto& v : pkt.ratio_p2) v = get_f64(bytes, pos);
  for (auto& v : pkt.ratio_q) v = get_f64(bytes, pos);
  for (auto& pair : pkt.theta1) {
    pair[0] = get_f64(bytes, pos);
    pair[1] = get_f64(bytes, pos);
  }
  for (auto& pair : pkt.theta2) {
    pair[0] = get_f64(bytes, pos);
    pair[1] = get_f64(bytes, pos);
  }
  return pkt;
}

ParameterPacket build_packet(const TrainedPolicy& policy, const Nsi& gains) {
  if (policy.strategy != Strategy::TwoSensing &&
      policy.strategy != Strategy::RelayFree)
    throw std::domain_error(
        "parameter packets exist for the re-sensed policies only");
  const SystemConfig& cfg = policy.config;
  cfg.validate();
  require_nonneg_duals(policy.duals);
  const auto n = static_cast<std::size_t>(cfg.n_subchannels);
  if (gains.g_sr.size() != n || gains.g_sd.size() != n ||
      gains.g_rd.size() != n)
    throw std::domain_error("gain vectors do not match the config");
  Nsi nsi = gains;
  if (policy.strategy == Strategy::RelayFree) zero_relay_links(nsi);

  const auto ratios = detail::compute_ratios(policy.duals, nsi, cfg);
  ParameterPacket pkt;
  pkt.n_subchannels = cfg.n_subchannels;
  pkt.n_bands = cfg.n_bands;
  pkt.ratio_p1.resize(n);
  pkt.ratio_p2.resize(n);
  pkt.ratio_q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pkt.ratio_p1[i] = ratios[i].p1;
    pkt.ratio_p2[i] = ratios[i].p2;
    pkt.ratio_q[i] = ratios[i].q;
  }
  pkt.theta1.resize(cfg.n_bands);
  pkt.theta2.resize(cfg.n_bands);
  for (int m = 0; m < cfg.n_bands; ++m) {
    for (int s = 0; s < 2; ++s) {
      pkt.theta1[m][s] = theta_phase1(policy.duals, ratios, nsi, s, m, cfg);
      pkt.theta2[m][s] =
          theta_phase2_resensed(policy.duals, ratios, nsi, s, m, cfg);
    }
  }
  return pkt;
}

Allocation online_update(const ParameterPacket& packet,
                         const std::vector<int>& x, const std::vector<int>& y,
                         const SystemConfig& cfg) {
  if (packet.n_subchannels != cfg.n_subchannels ||
      packet.n_bands != cfg.n_bands)
    throw std::domain_error("packet shape does not match the config");
  const auto n = static_cast<std::size_t>(cfg.n_subchannels);
  const auto m = static_cast<std::size_t>(cfg.n_bands);
  if (packet.ratio_p1.size() != n || packet.ratio_p2.size() != n ||
      packet.ratio_q.size() != n || packet.theta1.size() != m ||
      packet.theta2.size() != m)
    throw std::domain_error("packet fields disagree with its dimensions");
  if (x.size() != m || y.size() != m)
    throw std::domain_error("sensing vectors do not match the band count");

  Allocation a = Allocation::zero(cfg);
  for (std::size_t b = 0; b < m; ++b) {
    if ((x[b] != 0 && x[b] != 1) || (y[b] != 0 && y[b] != 1))
      throw std::domain_error("sensing outcome must be 0 or 1");
    const double t1 = packet.theta1[b][x[b]];
    const double t2 = packet.theta2[b][y[b]];
    a.theta1_hat[b] = t1;
    a.theta2_hat[b] = t2;
    a.intervals1[b] = place_phase1(t1, x[b], cfg.timing);
    a.intervals2[b] = place_phase2_resensed(t2, y[b], cfg.timing);
  }
  const auto band_of = cfg.subchannel_band();
  for (std::size_t i = 0; i < n; ++i) {
    const int b = band_of[i];
    a.p_s1[i] = packet.ratio_p1[i] * a.theta1_hat[b];
    a.p_s2[i] = packet.ratio_p2[i] * a.theta2_hat[b];
    a.p_r[i] = packet.ratio_q[i] * a.theta2_hat[b];
  }
  return a;
}

Allocation policy_allocation(const TrainedPolicy& policy, const Nsi& nsi) {
  const SystemConfig& cfg = policy.config;
  cfg.validate();
  nsi.validate(cfg);
  require_nonneg_duals(policy.duals);
  const auto band_of = cfg.subchannel_band();
  switch (policy.strategy) {
    case Strategy::TwoSensing: {
      if (!nsi.has_resensing())
        throw std::domain_error("two-sensing policy requires nsi.y");
      return detail::inner_eval_adaptive(policy.duals, nsi, cfg, band_of,
                                         detail::Phase2Mode::Resensed)
          .alloc;
    }
    case Strategy::RelayFree: {
      if (!nsi.has_resensing())
        throw std::domain_error("relay-free policy requires nsi.y");
      Nsi cut = nsi;
      zero_relay_links(cut);
      return detail::inner_eval_adaptive(policy.duals, cut, cfg, band_of,
                                         detail::Phase2Mode::Resensed)
          .alloc;
    }
    case Strategy::Phase1Only:
      return detail::inner_eval_adaptive(policy.duals, nsi, cfg, band_of,
                                         detail::Phase2Mode::FrameSensing)
          .alloc;
    case Strategy::SensingFree: {
      Allocation a = detail::inner_eval_stationary(
                         policy.duals, nsi, cfg, band_of,
                         detail::Phase2Mode::Resensed)
                         .alloc;
      const double c = policy.theta_scale;
      for (auto& t : a.theta1_hat) t *= c;
      for (auto& t : a.theta2_hat) t *= c;
      for (auto& p : a.p_s1) p *= c;
      for (auto& p : a.p_s2) p *= c;
      for (auto& p : a.p_r) p *= c;
      for (int b = 0; b < cfg.n_bands; ++b) {
        a.intervals1[b] = place_phase1(a.theta1_hat[b], 0, cfg.timing);
        a.intervals2[b] =
            place_phase2_resensed(a.theta2_hat[b], 0, cfg.timing);
      }
      return a;
    }
  }
  throw std::domain_error("unknown strategy");
}

double policy_model_collision(const TrainedPolicy& policy, const Nsi& nsi,
                              const Allocation& a) {
  const SystemConfig& cfg = policy.config;
  switch (policy.strategy) {
    case Strategy::TwoSensing:
    case Strategy::RelayFree:
      return frame_interference_resensed(a.theta1_hat, a.theta2_hat, nsi.x,
                                         nsi.y, cfg);
    case Strategy::Phase1Only:
      return frame_interference(a.theta1_hat, a.theta2_hat, nsi.x, cfg);
    case Strategy::SensingFree: {
      cfg.validate();
      double total = 0.0;
      for (int m = 0; m < cfg.n_bands; ++m)
        total += cfg.band_traffic(m).stationary_active() *
                 (a.theta1_hat.at(m) + a.theta2_hat.at(m)) * cfg.timing.t_f;
      return total;
    }
  }
  throw std::domain_error("unknown strategy");
}

}  // namespace crn
