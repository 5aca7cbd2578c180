#include "sagpr/emission.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include <spdlog/spdlog.h>

#include "sagpr/errors.hpp"

namespace sagpr {

void EmissionParams::validate() const {
  if (!std::isfinite(shift) || !(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::InvalidArgument, "emission scale must be positive");
  }
}

double t_log_normalizer(double dof) {
  return boost::math::lgamma(0.5 * (dof + 1.0)) - boost::math::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi);
}

double t_logpdf(double y, double loc, double scale, double dof) {
  const double r = (y - loc) / scale;
  return t_log_normalizer(dof) - std::log(scale) - 0.5 * (dof + 1.0) * std::log1p(r * r / dof);
}

double d18o_log_emission(double y, double z, const EmissionParams& p, const Profile& profile,
                         const FixedHyperparams& f) {
  if (!profile.contains(z)) throw Error(ErrorCode::DomainError, "alignment outside profile domain");
  const double loc = p.scale * profile.mean(z) + p.shift;
  const double scale = std::sqrt(f.b2 / f.a2 * p.scale * p.scale * profile.variance(z));
  return t_logpdf(y, loc, scale, 2.0 * f.a2);
}

double c14_log_emission(double y, double reservoir_offset, double extra_variance, double z,
                        const CalibrationCurve& curve, const FixedHyperparams& f) {
  const auto c = curve.at(z);
  const double scale = std::sqrt(f.b1 / f.a1 * (c.sigma * c.sigma + extra_variance));
  return t_logpdf(y, c.mean + reservoir_offset, scale, 2.0 * f.a1);
}

EmissionValue dual_log_emission(std::span<const ProxyDatum> data, double z, const EmissionParams& params,
                                const Profile* profile, const CalibrationCurve* curve, const FixedHyperparams& fixed) {
  EmissionValue out;
  for (const auto& d : data) {
    if (d.kind == ProxyKind::D18O) {
      if (!profile) throw Error(ErrorCode::InvalidArgument, "d18O datum without a profile");
      out.log_density += d18o_log_emission(d.value, z, params, *profile, fixed);
    } else {
      if (!curve) throw Error(ErrorCode::InvalidArgument, "radiocarbon datum without a calibration curve");
      try {
        out.log_density += c14_log_emission(d.value, d.reservoir_offset, d.extra_variance, z, *curve, fixed);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DomainError) throw;
        ++out.dropped;
      }
    }
  }
  if (out.dropped > 0) spdlog::warn("{} radiocarbon datum(s) outside the calibration curve treated as absent", out.dropped);
  return out;
}

double emission_prior_logpdf(const EmissionParams& p, const FixedHyperparams& f, bool learn_scale) {
  const double t = (p.shift - f.h_bar) / f.sigma_bar;
  double lp = -0.5 * t * t;
  if (learn_scale) lp += -2.0 * (f.alpha_bar + 1.0) * std::log(p.scale) - f.beta_bar / (p.scale * p.scale);
  return lp;
}

CalibratedAge calibrate_radiocarbon(const ProxyDatum& d, const CalibrationCurve& curve,
                                    const FixedHyperparams& fixed, std::size_t points) {
  const Interval r = curve.range();
  std::vector<double> z(points), lw(points);
  double mx = -INFINITY;
  for (std::size_t i = 0; i < points; ++i) {
    z[i] = r.lo + r.width() * static_cast<double>(i) / static_cast<double>(points - 1);
    lw[i] = c14_log_emission(d.value, d.reservoir_offset, d.extra_variance, z[i], curve, fixed);
    mx = std::max(mx, lw[i]);
  }
  double s0 = 0, s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < points; ++i) {
    double w = std::exp(lw[i] - mx) * ((i == 0 || i + 1 == points) ? 0.5 : 1.0);
    s0 += w;
    s1 += w * z[i];
    s2 += w * z[i] * z[i];
  }
  double m = s1 / s0;
  return {m, std::sqrt(std::max(s2 / s0 - m * m, 0.0))};
}

}  // namespace sagpr
