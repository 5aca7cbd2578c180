#include "sagpr/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <spdlog/spdlog.h>

#include "sagpr/errors.hpp"
#include "sagpr/optimize.hpp"

namespace sagpr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double transition_prior(const TransitionParams& p, const FixedHyperparams& f) {
  switch (p.kind) {
    case TransitionKind::Gamma:
      return gamma_prior_logpdf(p.gamma.alpha, p.gamma.beta, f) - std::log(p.gamma.depth_scale);
    case TransitionKind::Cae: return -std::log(p.cae.depth_scale);
    default: return 0.0;
  }
}
}  // namespace

QEvaluator::QEvaluator(const std::vector<AlignmentSample>& bank, const Signal& signal, const ModelContext& ctx,
                       const SignalParams& reference)
    : ctx_(ctx), L_(bank.size()) {
  if (bank.empty()) throw Error(ErrorCode::InvalidArgument, "empty alignment bank");
  AlignmentModel m(signal, reference, ctx);
  T_ = m.steps();
  reversed_ = m.reversed();
  r_ref_ = reference_depth_scale(signal, ctx.domain);
  const auto& x = signal.positions();
  dx_.assign(T_, 0.0);
  for (std::size_t t = 1; t < T_; ++t) {
    const std::size_t n = m.position_of(t);
    dx_[t] = reversed_ ? x[n + 1] - x[n] : x[n] - x[n - 1];
  }

  ratio_.assign(L_, std::vector<double>(T_, 0.0));
  first_regime_.assign(L_, 0);
  y_.assign(L_, {});
  mu_.assign(L_, {});
  nu_.assign(L_, {});
  constant_per_sample_.assign(L_, 0.0);
  for (std::size_t l = 0; l < L_; ++l) {
    auto c = m.chain_values(bank[l]);
    auto w = m.chain_regimes(bank[l]);
    first_regime_[l] = w[0];
    for (std::size_t t = 1; t < T_; ++t) ratio_[l][t] = (c[t] - c[t - 1]) / dx_[t];
    for (std::size_t t = 0; t < T_; ++t) {
      const double z = m.to_age(c[t]);
      for (const auto& d : signal.observations()[m.position_of(t)]) {
        if (d.kind != ProxyKind::D18O) continue;
        y_[l].push_back(d.value);
        mu_[l].push_back(ctx.profile->mean(z));
        nu_[l].push_back(ctx.profile->variance(z));
      }
    }
    // Initial density and radiocarbon terms do not depend on the learned
    // parameters; take them from the model less its d18O part.
    const double ll = m.log_likelihood(c);
    constant_per_sample_[l] = m.log_initial(c[0], w[0]) + ll - emission_sample(l, reference.emission);
    constant_ += constant_per_sample_[l];
  }
  constant_ /= static_cast<double>(L_);
}

std::vector<int> QEvaluator::regimes_at(std::size_t l, double r) const {
  std::vector<int> w(T_, 0);
  w[0] = first_regime_[l];
  for (std::size_t t = 1; t < T_; ++t) w[t] = cae_regime(ratio_[l][t] / r, ctx_.fixed);
  return w;
}

GaussianWalkParams QEvaluator::walk_estimate() const {
  double sc = 0.0, sx = 0.0;
  for (std::size_t l = 0; l < L_; ++l) {
    for (std::size_t t = 1; t < T_; ++t) {
      sc += ratio_[l][t] * dx_[t];
      sx += dx_[t];
    }
  }
  GaussianWalkParams p;
  p.drift = sc / sx;
  double ss = 0.0, n = 0.0;
  for (std::size_t l = 0; l < L_; ++l) {
    for (std::size_t t = 1; t < T_; ++t) {
      const double e = (ratio_[l][t] - p.drift) * dx_[t];
      ss += e * e / dx_[t];
      n += 1.0;
    }
  }
  p.sd = std::sqrt(std::max(ss / n, 1e-300));
  return p;
}

double QEvaluator::transition_sample(std::size_t l, const TransitionParams& p) const {
  double s = 0.0;
  if (p.kind == TransitionKind::GaussianWalk) {
    const double var = p.walk.sd * p.walk.sd;
    for (std::size_t t = 1; t < T_; ++t) {
      const double e = (ratio_[l][t] - p.walk.drift) * dx_[t];
      s += -0.5 * std::log(2.0 * std::numbers::pi * var * dx_[t]) - 0.5 * e * e / (var * dx_[t]);
    }
    return s;
  }
  const bool cae = p.kind == TransitionKind::Cae;
  const double shape = cae ? p.cae.shape : p.gamma.alpha;
  const double rate = cae ? p.cae.rate : p.gamma.beta;
  const double r = p.depth_scale();
  const double gconst = shape * std::log(rate) - boost::math::lgamma(shape);
  double log_region[3] = {0, 0, 0};
  if (cae) {
    for (int w = 0; w < 3; ++w) log_region[w] = cae_log_region_mass(w, shape, rate, ctx_.fixed);
  }
  int w_prev = first_regime_[l];
  for (std::size_t t = 1; t < T_; ++t) {
    const double u = ratio_[l][t] / r;
    if (!(u > 0.0)) return kNegInf;
    s += gconst + (shape - 1.0) * std::log(u) - rate * u - std::log(r * dx_[t]);
    if (cae) {
      const int w = cae_regime(u, ctx_.fixed);
      s += std::log(p.cae.phi[w_prev][w]) - log_region[w];
      w_prev = w;
    }
  }
  return s;
}

double QEvaluator::emission_sample(std::size_t l, const EmissionParams& p) const {
  const double dof = 2.0 * ctx_.fixed.a2;
  const double ratio = ctx_.fixed.b2 / ctx_.fixed.a2;
  const double norm = t_log_normalizer(dof);
  const double sigma = ctx_.learn_scale ? p.scale : 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < y_[l].size(); ++i) {
    const double s2 = ratio * sigma * sigma * nu_[l][i];
    const double r = y_[l][i] - sigma * mu_[l][i] - p.shift;
    s += norm - 0.5 * std::log(s2) - 0.5 * (dof + 1.0) * std::log1p(r * r / (dof * s2));
  }
  return s;
}

double QEvaluator::transition_part(const TransitionParams& p) const {
  double s = 0.0;
  for (std::size_t l = 0; l < L_; ++l) s += transition_sample(l, p);
  return transition_prior(p, ctx_.fixed) + s / static_cast<double>(L_);
}

double QEvaluator::emission_part(const EmissionParams& p) const {
  double s = 0.0;
  for (std::size_t l = 0; l < L_; ++l) s += emission_sample(l, p);
  return emission_prior_logpdf(p, ctx_.fixed, ctx_.learn_scale) + s / static_cast<double>(L_);
}

double QEvaluator::total(const SignalParams& p) const {
  return transition_part(p.transition) + emission_part(p.emission) + constant_;
}

double QEvaluator::standard_error(const SignalParams& p) const {
  if (L_ < 2) return 0.0;
  std::vector<double> v(L_);
  for (std::size_t l = 0; l < L_; ++l) {
    v[l] = constant_per_sample_[l] + transition_sample(l, p.transition) + emission_sample(l, p.emission);
  }
  double m = 0.0;
  for (double a : v) m += a;
  m /= static_cast<double>(L_);
  double ss = 0.0;
  for (double a : v) ss += (a - m) * (a - m);
  return std::sqrt(ss / static_cast<double>(L_ - 1) / static_cast<double>(L_));
}

double QEvaluator::sigma_derivative(double log_sigma, double h) const {
  const double sigma = std::exp(log_sigma);
  const double dof = 2.0 * ctx_.fixed.a2;
  const double ratio = ctx_.fixed.b2 / ctx_.fixed.a2;
  double s = 0.0;
  for (std::size_t l = 0; l < L_; ++l) {
    for (std::size_t i = 0; i < y_[l].size(); ++i) {
      const double s0 = ratio * nu_[l][i];
      const double e = (y_[l][i] - h) / sigma;
      const double q = (e - mu_[l][i]) * (e - mu_[l][i]) / (dof * s0);
      s += -1.0 + (dof + 1.0) * e * (e - mu_[l][i]) / (dof * s0) / (1.0 + q);
    }
  }
  const auto& f = ctx_.fixed;
  return s / static_cast<double>(L_) - 2.0 * (f.alpha_bar + 1.0) + 2.0 * f.beta_bar / (sigma * sigma);
}

double QEvaluator::irls_shift(double h, double sigma) const {
  const double dof = 2.0 * ctx_.fixed.a2;
  const double ratio = ctx_.fixed.b2 / ctx_.fixed.a2;
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < L_; ++l) {
    for (std::size_t i = 0; i < y_[l].size(); ++i) {
      const double s2 = ratio * sigma * sigma * nu_[l][i];
      const double r = y_[l][i] - sigma * mu_[l][i] - h;
      const double w = (dof + 1.0) / (dof + r * r / s2);
      num += w * (y_[l][i] - sigma * mu_[l][i]) / s2;
      den += w / s2;
    }
  }
  const double L = static_cast<double>(L_);
  const auto& f = ctx_.fixed;
  const double pv = 1.0 / (f.sigma_bar * f.sigma_bar);
  return (num / L + f.h_bar * pv) / (den / L + pv);
}

namespace {

EmissionParams update_emission(const QEvaluator& q, EmissionParams p) {
  const bool learn_scale = q.context().learn_scale;
  if (!learn_scale) p.scale = 1.0;
  for (int round = 0; round < 20; ++round) {
    const EmissionParams before = p;
    for (int it = 0; it < 200; ++it) {
      const double h = q.irls_shift(p.shift, p.scale);
      const bool done = std::abs(h - p.shift) <= 1e-12 * (1.0 + std::abs(h));
      p.shift = h;
      if (done) break;
    }
    if (learn_scale) {
      auto g = [&](double x) { return q.sigma_derivative(x, p.shift); };
      const double x0 = std::log(p.scale);
      const double g0 = g(x0);
      if (g0 != 0.0 && std::isfinite(g0)) {
        double a = x0, b = x0, step = 0.25;
        double gb = g0;
        bool bracketed = false;
        for (int k = 0; k < 60; ++k) {
          b = g0 > 0 ? x0 + step : x0 - step;
          gb = g(b);
          if (!std::isfinite(gb)) break;
          if ((gb < 0) == (g0 > 0)) {
            bracketed = true;
            break;
          }
          a = b;
          step *= 2.0;
        }
        if (bracketed) {
          double lo = std::min(a, b), hi = std::max(a, b);
          boost::math::tools::eps_tolerance<double> tol(40);
          std::uintmax_t iters = 100;
          auto [r0, r1] = boost::math::tools::toms748_solve(g, lo, hi, tol, iters);
          p.scale = std::exp(0.5 * (r0 + r1));
        }
      }
    }
    if (std::abs(p.shift - before.shift) < 1e-10 && std::abs(p.scale - before.scale) < 1e-10) break;
  }
  return p;
}

double maximize_scale(const std::function<double(double)>& f, double r0, double lo, double hi) {
  const int grid = 41;
  const double a = std::log(lo), b = std::log(hi);
  double best_x = std::log(r0), best = f(r0);
  std::vector<double> xs(grid), vs(grid);
  int best_i = -1;
  for (int i = 0; i < grid; ++i) {
    xs[i] = a + (b - a) * i / (grid - 1);
    vs[i] = f(std::exp(xs[i]));
    if (vs[i] > best) {
      best = vs[i];
      best_x = xs[i];
      best_i = i;
    }
  }
  double left, right;
  if (best_i >= 0) {
    left = xs[std::max(best_i - 1, 0)];
    right = xs[std::min(best_i + 1, grid - 1)];
  } else {
    const double hstep = (b - a) / (grid - 1);
    left = std::max(a, best_x - hstep);
    right = std::min(b, best_x + hstep);
  }
  if (right > left) {
    auto neg = [&](double x) {
      const double v = f(std::exp(x));
      return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
    };
    auto [x, v] = boost::math::tools::brent_find_minima(neg, left, right, 40);
    if (-v > best) {
      best = -v;
      best_x = x;
    }
  }
  return std::exp(best_x);
}

}  // namespace

SignalParams m_step(const QEvaluator& q, const SignalParams& current, const MStepOptions& opts) {
  SignalParams out = current;
  if (opts.learn_emission) {
    const EmissionParams cand = update_emission(q, current.emission);
    if (q.emission_part(cand) >= q.emission_part(current.emission)) out.emission = cand;
  }
  if (!opts.learn_transition) return out;

  TransitionParams tp = current.transition;
  const double r_lo = opts.r_min > 0 ? opts.r_min : 0.1 * q.reference_scale();
  const double r_hi = opts.r_max > 0 ? opts.r_max : 10.0 * q.reference_scale();
  auto accept = [&](const TransitionParams& cand) {
    if (q.transition_part(cand) > q.transition_part(tp)) tp = cand;
  };
  auto update_r = [&] {
    if (!opts.learn_depth_scale) return;
    TransitionParams cand = tp;
    auto f = [&](double r) {
      TransitionParams c = tp;
      c.set_depth_scale(r);
      return q.transition_part(c);
    };
    cand.set_depth_scale(maximize_scale(f, tp.depth_scale(), r_lo, r_hi));
    accept(cand);
  };

  switch (tp.kind) {
    case TransitionKind::Gamma:
      for (int round = 0; round < 3; ++round) {
        auto f = [&](const std::vector<double>& v) {
          TransitionParams c = tp;
          c.gamma.alpha = std::exp(v[0]);
          c.gamma.beta = std::exp(v[1]);
          return q.transition_part(c);
        };
        auto res = coordinate_search(f, {std::log(tp.gamma.alpha), std::log(tp.gamma.beta)}, {0.5, 0.5},
                                     {std::log(1e-3), std::log(1e-3)}, {std::log(1e4), std::log(1e4)}, 1e-6, 400);
        TransitionParams cand = tp;
        cand.gamma.alpha = std::exp(res.x[0]);
        cand.gamma.beta = std::exp(res.x[1]);
        accept(cand);
        update_r();
      }
      break;
    case TransitionKind::Cae:
      for (int round = 0; round < 3; ++round) {
        double n[3][3] = {};
        for (std::size_t l = 0; l < q.samples(); ++l) {
          auto w = q.regimes_at(l, tp.cae.depth_scale);
          for (std::size_t t = 1; t < w.size(); ++t) n[w[t - 1]][w[t]] += 1.0;
        }
        TransitionParams cand = tp;
        for (int a = 0; a < 3; ++a) {
          double row = 0.0;
          for (int b = 0; b < 3; ++b) row += n[a][b] + opts.phi_pseudo_count;
          for (int b = 0; b < 3; ++b) cand.cae.phi[a][b] = (n[a][b] + opts.phi_pseudo_count) / row;
        }
        accept(cand);
        update_r();
      }
      break;
    default: {
      // Closed-form drift and spread of the linear-Gaussian walk.
      TransitionParams cand = tp;
      cand.walk = q.walk_estimate();
      accept(cand);
      break;
    }
  }
  out.transition = tp;
  return out;
}

EmResult run_em(const Signal& signal, const ModelContext& ctx, const SignalParams& init, const EmConfig& cfg,
                std::uint64_t seed, std::uint64_t tag, const std::vector<AlignmentSample>& previous) {
  EmResult res;
  res.params = init;
  std::vector<AlignmentSample> bank = previous;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    AlignmentModel m(signal, res.params, ctx);
    bank = sample_alignments(m, cfg.sampler, bank, seed, tag * 1000003ULL + it, &res.last_sampler);
    QEvaluator q(bank, signal, ctx, res.params);
    const double q0 = q.total(res.params);
    SignalParams next = m_step(q, res.params, cfg.mstep);
    const double q1 = q.total(next);
    res.q_start.push_back(q0);
    res.q_history.push_back(q1);
    res.q_se.push_back(q.standard_error(next));
    res.params = next;
    res.iterations = it + 1;
    spdlog::debug("signal {} EM {}: Q {:.6g} -> {:.6g}", signal.id(), it, q0, q1);
    if (it > 0) {
      const double prev = res.q_history[it - 1];
      if (std::abs(q1 - prev) < cfg.tolerance * std::abs(prev)) break;
    }
  }
  AlignmentModel m(signal, res.params, ctx);
  res.bank = sample_alignments(m, cfg.sampler, bank, seed, tag * 1000003ULL + 999999ULL, &res.last_sampler);
  return res;
}

}  // namespace sagpr
