#include "sagpr/transition.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sagpr/errors.hpp"

namespace sagpr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

double gamma_logpdf(double u, double shape, double rate) {
  return shape * std::log(rate) - boost::math::lgamma(shape) + (shape - 1.0) * std::log(u) - rate * u;
}
}  // namespace

namespace {

// Regularized incomplete gamma functions in log space. Deep tails that
// underflow double precision fall back to the power series (lower) and the
// Lentz continued fraction (upper).
double log_gamma_p(double a, double x) {
  if (!(x > 0.0)) return kNegInf;
  const double p = boost::math::gamma_p(a, x);
  if (p > 1e-280) return std::log(p);
  double term = 1.0, sum = 1.0;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return a * std::log(x) - x - boost::math::lgamma(a + 1.0) + std::log(sum);
}

double log_gamma_q(double a, double x) {
  if (!(x > 0.0)) return 0.0;
  const double q = boost::math::gamma_q(a, x);
  if (q > 1e-280) return std::log(q);
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return -x + a * std::log(x) - boost::math::lgamma(a) + std::log(h);
}

}  // namespace

void GammaTransitionParams::validate() const {
  if (!positive(alpha) || !positive(beta) || !positive(depth_scale)) {
    throw Error(ErrorCode::InvalidArgument, "Gamma transition parameters must be positive");
  }
}

void CaeTransitionParams::validate() const {
  if (!positive(depth_scale) || !positive(shape) || !positive(rate)) {
    throw Error(ErrorCode::InvalidArgument, "C/A/E depth scale and Gamma parameters must be positive");
  }
  for (const auto& row : phi) {
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "phi entries must be >= 0");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "phi rows must sum to 1");
  }
}

void GaussianWalkParams::validate() const {
  if (!std::isfinite(drift) || !positive(sd)) throw Error(ErrorCode::InvalidArgument, "invalid Gaussian walk");
}

int cae_regime(double u, const FixedHyperparams& fixed) {
  if (!(u > 0.0)) return -1;
  if (u < fixed.cae_lower) return Contraction;
  if (u < fixed.cae_upper) return Average;
  return Expansion;
}

Interval cae_interval(int regime, const FixedHyperparams& fixed) {
  switch (regime) {
    case Contraction: return {0.0, fixed.cae_lower};
    case Average: return {fixed.cae_lower, fixed.cae_upper};
    default: return {fixed.cae_upper, std::numeric_limits<double>::infinity()};
  }
}

double cae_log_region_mass(int regime, double shape, double rate, const FixedHyperparams& fixed) {
  const double a = rate * fixed.cae_lower, b = rate * fixed.cae_upper;
  switch (regime) {
    case Contraction: return log_gamma_p(shape, a);
    case Average: {
      // Difference taken on whichever tail is smaller to limit cancellation.
      if (b > shape) {
        const double qa = log_gamma_q(shape, a), qb = log_gamma_q(shape, b);
        return qa + std::log1p(-std::exp(qb - qa));
      }
      const double pa = log_gamma_p(shape, a), pb = log_gamma_p(shape, b);
      return pb + std::log1p(-std::exp(pa - pb));
    }
    default: return log_gamma_q(shape, b);
  }
}

double gamma_log_transition(double z_prev, double z, double x_prev, double x, const GammaTransitionParams& p) {
  if (!(z > z_prev)) return kNegInf;
  const double scale = p.depth_scale * (x - x_prev);
  return gamma_logpdf((z - z_prev) / scale, p.alpha, p.beta) - std::log(scale);
}

double gamma_prior_logpdf(double alpha, double beta, const FixedHyperparams& f) {
  return (alpha - 1.0) * std::log(f.p_bar) - f.r_bar * boost::math::lgamma(alpha) + alpha * f.s_bar * std::log(beta) -
         beta * f.q_bar;
}

double cae_log_transition(double z_next, int w_next, double z, int w, double x, double x_next,
                          const CaeTransitionParams& p, const FixedHyperparams& fixed) {
  if (!(z_next > z)) return kNegInf;
  const double scale = p.depth_scale * (x_next - x);
  const double u = (z_next - z) / scale;
  if (cae_regime(u, fixed) != w) return kNegInf;
  const double phi = p.phi[static_cast<std::size_t>(w_next)][static_cast<std::size_t>(w)];
  if (!(phi > 0.0)) return kNegInf;
  return std::log(phi) + gamma_logpdf(u, p.shape, p.rate) - cae_log_region_mass(w, p.shape, p.rate, fixed) -
         std::log(scale);
}

double gaussian_walk_log_transition(double z_prev, double z, double x_prev, double x, const GaussianWalkParams& p) {
  const double dx = x - x_prev;
  const double var = p.sd * p.sd * dx;
  const double r = z - z_prev - p.drift * dx;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
}

double sample_truncated_gamma(double shape, double rate, int regime, const FixedHyperparams& fixed, Rng& rng) {
  using boost::math::gamma_p;
  using boost::math::gamma_p_inv;
  using boost::math::gamma_q;
  using boost::math::gamma_q_inv;
  double v;
  do v = uniform01(rng);
  while (v <= 0.0);
  const Interval I = cae_interval(regime, fixed);
  double u = std::numeric_limits<double>::quiet_NaN();
  try {
    if (regime == Expansion) {
      const double q = gamma_q(shape, rate * I.lo);
      if (q > 1e-280) u = gamma_q_inv(shape, v * q) / rate;
    } else {
      const double fa = regime == Contraction ? 0.0 : gamma_p(shape, rate * I.lo);
      const double fb = gamma_p(shape, rate * I.hi);
      if (fb - fa > 1e-280 && fb - fa > 1e-12 * fb) u = gamma_p_inv(shape, fa + v * (fb - fa)) / rate;
    }
  } catch (const std::exception&) {
    u = std::numeric_limits<double>::quiet_NaN();
  }
  if (!std::isfinite(u)) {
    // Region mass below double precision: the density inside the region is
    // dominated by the edge nearest the mode, where it is close to exponential.
    const double mode = shape > 1.0 ? (shape - 1.0) / rate : 0.0;
    const bool from_lo = mode <= I.lo;
    const double edge = from_lo ? I.lo : I.hi;
    const double k = std::abs((shape - 1.0) / edge - rate);
    const double width = std::isfinite(I.hi) ? I.hi - I.lo : std::numeric_limits<double>::infinity();
    const double cap = std::isfinite(width) && k > 0.0 ? -std::expm1(-k * width) : 1.0;
    const double d = k > 0.0 ? -std::log1p(-v * cap) / k : v * width;
    u = from_lo ? I.lo + d : I.hi - d;
  }
  // Inverse-CDF round-off must not leak across a boundary.
  if (u < I.lo) u = I.lo;
  if (regime == Contraction && !(u > 0.0)) u = std::numeric_limits<double>::min();
  if (u >= I.hi) u = std::nextafter(I.hi, 0.0);
  return u;
}

double sample_gamma_step(double z_prev, double x_prev, double x, const GammaTransitionParams& p, Rng& rng) {
  std::gamma_distribution<double> g(p.alpha, 1.0 / p.beta);
  double u;
  do u = g(rng);
  while (!(u > 0.0));
  return z_prev + p.depth_scale * (x - x_prev) * u;
}

CaeDraw sample_cae_step(double z_next, int w_next, double x, double x_next, const CaeTransitionParams& p,
                        const FixedHyperparams& fixed, Rng& rng) {
  const auto& row = p.phi[static_cast<std::size_t>(w_next)];
  double v = uniform01(rng) * (row[0] + row[1] + row[2]);
  int w = 2;
  if (v < row[0]) w = 0;
  else if (v < row[0] + row[1]) w = 1;
  const double u = sample_truncated_gamma(p.shape, p.rate, w, fixed, rng);
  const double scale = p.depth_scale * (x_next - x);
  double z = z_next - scale * u;
  // The ratio recomputed from z must land in the same regime.
  for (int i = 0; i < 64 && cae_regime((z_next - z) / scale, fixed) != w; ++i) {
    z = cae_regime((z_next - z) / scale, fixed) < w ? std::nextafter(z, -INFINITY) : std::nextafter(z, INFINITY);
  }
  return {z, w};
}

}  // namespace sagpr
