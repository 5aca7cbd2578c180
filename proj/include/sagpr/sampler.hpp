#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sagpr/alignment_model.hpp"
#include "sagpr/errors.hpp"
#include "sagpr/rng.hpp"

namespace sagpr {

template <class M>
concept ChainModel = requires(const M& m, std::size_t t, double c, int w) {
  { m.steps() } -> std::convertible_to<std::size_t>;
  { m.regimes() } -> std::convertible_to<std::size_t>;
  { m.log_initial(c, w) } -> std::convertible_to<double>;
  { m.log_regime_transition(t, w, w) } -> std::convertible_to<double>;
  { m.regime_of(t, c, c) } -> std::convertible_to<int>;
  { m.log_increment(t, c, c, w) } -> std::convertible_to<double>;
  { m.log_emission(t, c) } -> std::convertible_to<double>;
};

template <class M>
concept RefinableModel = ChainModel<M> && requires(const M& m) {
  { m.markov_order() } -> std::convertible_to<int>;
};

template <class P>
concept ChainProposal = requires(const P& p, std::size_t t, std::size_t k, double c, Rng& rng) {
  { p.sample(t, k, rng) } -> std::convertible_to<std::vector<double>>;
  { p.log_density(t, c) } -> std::convertible_to<double>;
};

struct ParticleSet {
  std::size_t K = 0;
  std::size_t R = 1;
  std::vector<std::vector<double>> particles;    // [t][k]
  std::vector<std::vector<double>> weights;      // [t][k * R + w], sums to 1
  std::vector<std::vector<double>> log_weights;  // log of weights
  std::vector<double> ess;
};

struct ChainState {
  std::vector<double> c;
  std::vector<int> w;
};

namespace detail {

struct StreamingLse {
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;
  void add(double x) {
    if (!(x > -std::numeric_limits<double>::infinity())) return;
    if (x <= m) {
      s += std::exp(x - m);
    } else {
      s = s * std::exp(m - x) + 1.0;
      m = x;
    }
  }
  double value() const { return s > 0.0 ? m + std::log(s) : -std::numeric_limits<double>::infinity(); }
};

// Normalizes log weights in place; returns ESS over the K*R cells.
inline double normalize(std::vector<double>& logw, std::vector<double>& w) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw Error(ErrorCode::DegenerateWeights, "all particle weights vanished");
  double s = 0.0;
  w.resize(logw.size());
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] = std::exp(logw[i] - mx);
    s += w[i];
  }
  const double ls = std::log(s);
  double sq = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] /= s;
    logw[i] = logw[i] - mx - ls;
    sq += w[i] * w[i];
  }
  return 1.0 / sq;
}

template <class Draw>
std::size_t draw_index(std::span<const double> logp, Draw&& u01) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logp) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw Error(ErrorCode::DegenerateWeights, "no admissible predecessor in backward pass");
  double total = 0.0;
  for (double v : logp) total += std::exp(v - mx);
  double target = u01() * total, acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    double p = std::exp(logp[i] - mx);
    if (p > 0.0) last = i;
    acc += p;
    if (target < acc) return i;
  }
  return last;
}

}  // namespace detail

// Unnormalized log weights at step t >= 1 for every (particle, regime) cell:
// log g - log q + logsumexp_{s,w'} [log w_{t-1}(s,w') + log pi(c_k, w | c_s, w')].
// The s-loop runs in a fixed order per k, so the serial and parallel versions
// produce identical bits.
template <ChainModel M>
void forward_step_serial(const M& m, std::size_t t, std::span<const double> prev_c, std::span<const double> prev_logw,
                         std::span<const double> cur_c, std::span<const double> cur_logq, std::vector<double>& out);

template <ChainModel M>
void forward_step_parallel(const M& m, std::size_t t, std::span<const double> prev_c,
                           std::span<const double> prev_logw, std::span<const double> cur_c,
                           std::span<const double> cur_logq, std::vector<double>& out);

namespace detail {

template <ChainModel M>
std::vector<double> mixed_predecessors(const M& m, std::size_t t, std::span<const double> prev_logw, std::size_t R) {
  const std::size_t S = prev_logw.size() / R;
  std::vector<double> logA(S * R);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t w = 0; w < R; ++w) {
      StreamingLse acc;
      for (std::size_t v = 0; v < R; ++v) {
        acc.add(prev_logw[s * R + v] + m.log_regime_transition(t, static_cast<int>(v), static_cast<int>(w)));
      }
      logA[s * R + w] = acc.value();
    }
  }
  return logA;
}

template <ChainModel M>
void weight_cell(const M& m, std::size_t t, std::size_t k, std::size_t R, std::span<const double> prev_c,
                 std::span<const double> logA, std::span<const std::size_t> active, std::span<const double> cur_c,
                 std::span<const double> cur_logq, std::vector<double>& out) {
  StreamingLse acc[3];
  const double ck = cur_c[k];
  for (std::size_t s : active) {
    const int w = m.regime_of(t, prev_c[s], ck);
    if (w < 0) continue;
    const double a = logA[s * R + static_cast<std::size_t>(w)];
    if (!(a > -std::numeric_limits<double>::infinity())) continue;
    acc[w].add(a + m.log_increment(t, prev_c[s], ck, w));
  }
  double base = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t w = 0; w < R; ++w) any = any || acc[w].s > 0.0;
  if (any) base = m.log_emission(t, ck) - cur_logq[k];
  for (std::size_t w = 0; w < R; ++w) out[k * R + w] = acc[w].s > 0.0 ? acc[w].value() + base : acc[w].value();
}

template <ChainModel M>
void forward_step_impl(const M& m, std::size_t t, std::span<const double> prev_c, std::span<const double> prev_logw,
                       std::span<const double> cur_c, std::span<const double> cur_logq, std::vector<double>& out,
                       bool parallel) {
  const std::size_t R = m.regimes();
  const std::size_t K = cur_c.size();
  auto logA = mixed_predecessors(m, t, prev_logw, R);
  std::vector<std::size_t> active;
  for (std::size_t s = 0; s < prev_c.size(); ++s) {
    for (std::size_t w = 0; w < R; ++w) {
      if (logA[s * R + w] > -std::numeric_limits<double>::infinity()) {
        active.push_back(s);
        break;
      }
    }
  }
  out.assign(K * R, -std::numeric_limits<double>::infinity());
  if (parallel) {
    const auto n = static_cast<std::ptrdiff_t>(K);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      weight_cell(m, t, static_cast<std::size_t>(k), R, prev_c, logA, active, cur_c, cur_logq, out);
    }
  } else {
    for (std::size_t k = 0; k < K; ++k) weight_cell(m, t, k, R, prev_c, logA, active, cur_c, cur_logq, out);
  }
}

}  // namespace detail

template <ChainModel M>
void forward_step_serial(const M& m, std::size_t t, std::span<const double> prev_c, std::span<const double> prev_logw,
                         std::span<const double> cur_c, std::span<const double> cur_logq, std::vector<double>& out) {
  detail::forward_step_impl(m, t, prev_c, prev_logw, cur_c, cur_logq, out, false);
}

template <ChainModel M>
void forward_step_parallel(const M& m, std::size_t t, std::span<const double> prev_c,
                           std::span<const double> prev_logw, std::span<const double> cur_c,
                           std::span<const double> cur_logq, std::vector<double>& out) {
  detail::forward_step_impl(m, t, prev_c, prev_logw, cur_c, cur_logq, out, true);
}

// Sequential importance weights without resampling.
template <ChainModel M, ChainProposal P>
ParticleSet smoother_forward(const M& m, const P& proposal, std::size_t K, Rng& rng, bool parallel = true) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "need at least one particle");
  const std::size_t T = m.steps(), R = m.regimes();
  ParticleSet ps;
  ps.K = K;
  ps.R = R;
  ps.particles.resize(T);
  ps.weights.resize(T);
  ps.log_weights.resize(T);
  ps.ess.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto c = proposal.sample(t, K, rng);
    std::vector<double> logq(K);
    for (std::size_t k = 0; k < K; ++k) logq[k] = proposal.log_density(t, c[k]);
    std::vector<double> logw;
    if (t == 0) {
      logw.assign(K * R, -std::numeric_limits<double>::infinity());
      for (std::size_t k = 0; k < K; ++k) {
        const double e = m.log_emission(0, c[k]) - logq[k];
        for (std::size_t w = 0; w < R; ++w) {
          const double li = m.log_initial(c[k], static_cast<int>(w));
          if (li > -std::numeric_limits<double>::infinity()) logw[k * R + w] = li + e;
        }
      }
    } else if (parallel) {
      forward_step_parallel(m, t, ps.particles[t - 1], ps.log_weights[t - 1], c, logq, logw);
    } else {
      forward_step_serial(m, t, ps.particles[t - 1], ps.log_weights[t - 1], c, logq, logw);
    }
    for (double& v : logw) {
      if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
    }
    ps.ess[t] = detail::normalize(logw, ps.weights[t]);
    if (K >= 2 && ps.ess[t] < 2.0) {
      throw Error(ErrorCode::DegenerateWeights, "effective sample size below 2 at step " + std::to_string(t));
    }
    ps.particles[t] = std::move(c);
    ps.log_weights[t] = std::move(logw);
  }
  return ps;
}

template <ChainModel M>
ChainState smoother_backward(const ParticleSet& ps, const M& m, Rng& rng) {
  const std::size_t T = ps.particles.size(), R = ps.R, K = ps.K;
  ChainState out{std::vector<double>(T), std::vector<int>(T)};
  auto u01 = [&] { return uniform01(rng); };
  std::size_t cell = detail::draw_index(ps.log_weights[T - 1], u01);
  out.c[T - 1] = ps.particles[T - 1][cell / R];
  out.w[T - 1] = static_cast<int>(cell % R);
  std::vector<double> logp(K * R);
  for (std::size_t t = T - 1; t >= 1; --t) {
    const double cn = out.c[t];
    const int wn = out.w[t];
    const auto& pc = ps.particles[t - 1];
    const auto& lw = ps.log_weights[t - 1];
    for (std::size_t s = 0; s < K; ++s) {
      const bool ok = m.regime_of(t, pc[s], cn) == wn;
      const double inc = ok ? m.log_increment(t, pc[s], cn, wn) : -std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < R; ++v) {
        logp[s * R + v] = ok ? lw[s * R + v] + m.log_regime_transition(t, static_cast<int>(v), wn) + inc
                             : -std::numeric_limits<double>::infinity();
      }
    }
    cell = detail::draw_index(logp, u01);
    out.c[t - 1] = pc[cell / R];
    out.w[t - 1] = static_cast<int>(cell % R);
  }
  return out;
}

struct MhStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

namespace detail {

// Log density terms touched by coordinate t when it takes the value ct.
// Regimes of steps t and t+1 follow the increments; step t+2 only changes
// through its regime-transition factor.
template <RefinableModel M>
double local_log_density(const M& m, const ChainState& s, std::size_t t, double ct, int& wt, int& wt1) {
  const std::size_t T = s.c.size();
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  double lp = 0.0;
  wt = s.w[t];
  if (t == 0) {
    lp += m.log_initial(ct, wt);
  } else {
    wt = m.regime_of(t, s.c[t - 1], ct);
    if (wt < 0) return ninf;
    lp += m.log_regime_transition(t, s.w[t - 1], wt) + m.log_increment(t, s.c[t - 1], ct, wt);
  }
  wt1 = -1;
  if (t + 1 < T) {
    wt1 = m.regime_of(t + 1, ct, s.c[t + 1]);
    if (wt1 < 0) return ninf;
    lp += m.log_regime_transition(t + 1, wt, wt1) + m.log_increment(t + 1, ct, s.c[t + 1], wt1);
    if (m.markov_order() >= 2 && t + 2 < T) lp += m.log_regime_transition(t + 2, wt1, s.w[t + 2]);
  }
  if (!(lp > ninf)) return ninf;
  return lp + m.log_emission(t, ct);
}

inline double normal_logpdf(double x, double mu, double var) {
  return -0.5 * std::log(2.0 * 3.14159265358979323846 * var) - 0.5 * (x - mu) * (x - mu) / var;
}

template <RefinableModel M>
void mh_coordinate(const M& m, ChainState& s, std::size_t t, Rng& rng, MhStats& stats) {
  const std::size_t T = s.c.size();
  const double cur = s.c[t];
  double prop, log_q_ratio = 0.0;
  if (t > 0 && t + 1 < T) {
    const double lo = s.c[t - 1], hi = s.c[t + 1];
    prop = lo + (hi - lo) * uniform01(rng);
    if (!(prop > lo && prop < hi)) return;
  } else if (T == 1) {
    return;
  } else {
    // End points: Gaussian step with variance gap/8, gap to the single neighbour.
    auto gap = [&](double v) { return t == 0 ? s.c[1] - v : v - s.c[T - 2]; };
    const double g = gap(cur);
    if (!(g > 0.0)) return;
    std::normal_distribution<double> nd(cur, std::sqrt(g / 8.0));
    prop = nd(rng);
    const double gp = gap(prop);
    ++stats.proposed;
    if (!(gp > 0.0)) return;  // leaves the ordered region
    log_q_ratio = normal_logpdf(cur, prop, gp / 8.0) - normal_logpdf(prop, cur, g / 8.0);
    int w0, w1, v0, v1;
    const double lnew = local_log_density(m, s, t, prop, w0, w1);
    const double lold = local_log_density(m, s, t, cur, v0, v1);
    if (!(lnew > -std::numeric_limits<double>::infinity())) return;
    const double a = lnew - lold + log_q_ratio;
    if (a >= 0.0 || std::log(uniform01(rng)) < a) {
      s.c[t] = prop;
      s.w[t] = w0;
      if (t + 1 < T) s.w[t + 1] = w1;
      ++stats.accepted;
    }
    return;
  }
  ++stats.proposed;
  int w0, w1, v0, v1;
  const double lnew = local_log_density(m, s, t, prop, w0, w1);
  if (!(lnew > -std::numeric_limits<double>::infinity())) return;
  const double lold = local_log_density(m, s, t, cur, v0, v1);
  const double a = lnew - lold;
  if (a >= 0.0 || std::log(uniform01(rng)) < a) {
    s.c[t] = prop;
    s.w[t] = w0;
    if (t + 1 < T) s.w[t + 1] = w1;
    ++stats.accepted;
  }
}

}  // namespace detail

// Odd/even sweeps of single-coordinate Metropolis-Hastings updates. For
// models with regimes the first regime (no increment of its own) gets a
// Gibbs update after every sweep.
template <RefinableModel M>
ChainState mh_refine(const M& m, ChainState s, std::size_t sweeps, Rng& rng, MhStats* stats_out = nullptr) {
  MhStats stats;
  const std::size_t T = s.c.size(), R = m.regimes();
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t parity = 0; parity < 2; ++parity) {
      for (std::size_t t = parity; t < T; t += 2) detail::mh_coordinate(m, s, t, rng, stats);
    }
    if (R > 1) {
      std::vector<double> lp(R);
      for (std::size_t w = 0; w < R; ++w) {
        lp[w] = m.log_initial(s.c[0], static_cast<int>(w));
        if (T > 1) lp[w] += m.log_regime_transition(1, static_cast<int>(w), s.w[1]);
      }
      s.w[0] = static_cast<int>(detail::draw_index(lp, [&] { return uniform01(rng); }));
    }
  }
  if (stats_out) {
    stats_out->proposed += stats.proposed;
    stats_out->accepted += stats.accepted;
  }
  return s;
}

// Round-one proposal: stratified uniform over a feasibility corridor built by
// pushing the initial support forward with the largest/smallest plausible
// increments, then pulling it back from the end.
class CorridorProposal {
 public:
  explicit CorridorProposal(const AlignmentModel& m);
  CorridorProposal(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {}
  std::vector<double> sample(std::size_t t, std::size_t K, Rng& rng) const;
  double log_density(std::size_t t, double c) const;
  Interval bounds(std::size_t t) const { return {lo_[t], hi_[t]}; }

 private:
  std::vector<double> lo_, hi_;
};

// Later rounds: equal mixture of uniforms of half-width d centred on the
// previous round's samples.
class BankProposal {
 public:
  BankProposal(std::vector<std::vector<double>> centres_per_step, double half_width);
  BankProposal(const AlignmentModel& m, const std::vector<AlignmentSample>& bank, double half_width);
  std::vector<double> sample(std::size_t t, std::size_t K, Rng& rng) const;
  double log_density(std::size_t t, double c) const;

 private:
  std::vector<std::vector<double>> centres_;  // sorted per step
  double d_;
};

struct SamplerConfig {
  std::size_t particles = 500;  // K
  std::size_t samples = 100;    // L
  std::size_t sweeps = 200;
  double bandwidth = 0.04;  // d, in age units
  int retries = 3;          // particle doublings after DegenerateWeights
  bool parallel = true;
};

struct SamplerDiagnostics {
  std::size_t particles_used = 0;
  double min_ess = 0.0;
  double acceptance_rate = 0.0;
  bool corridor_fallback = false;
};

// L alignment samples: one forward pass, then for each l an independent
// backward draw and MH refinement on its own stream (seed, tag, l).
std::vector<AlignmentSample> sample_alignments(const AlignmentModel& m, const SamplerConfig& cfg,
                                               const std::vector<AlignmentSample>& previous, std::uint64_t seed,
                                               std::uint64_t tag, SamplerDiagnostics* diag = nullptr);

}  // namespace sagpr
