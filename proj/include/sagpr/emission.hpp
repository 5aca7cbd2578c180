#pragma once

#include <span>

#include "sagpr/data_model.hpp"
#include "sagpr/gpr.hpp"

namespace sagpr {

struct EmissionParams {
  double shift = 0.0;  // h
  double scale = 1.0;  // sigma
  void validate() const;
};

// log Gamma((dof+1)/2) - log Gamma(dof/2) - 0.5 log(dof pi)
double t_log_normalizer(double dof);
double t_logpdf(double y, double loc, double scale, double dof);

double d18o_log_emission(double y, double z, const EmissionParams& params, const Profile& profile,
                         const FixedHyperparams& fixed);
double c14_log_emission(double y, double reservoir_offset, double extra_variance, double z,
                        const CalibrationCurve& curve, const FixedHyperparams& fixed);

struct EmissionValue {
  double log_density = 0.0;
  std::size_t dropped = 0;  // radiocarbon data outside the curve range
};

EmissionValue dual_log_emission(std::span<const ProxyDatum> data, double z, const EmissionParams& params,
                                const Profile* profile, const CalibrationCurve* curve, const FixedHyperparams& fixed);

// With learn_scale = false only the shift term applies (sigma held at 1).
double emission_prior_logpdf(const EmissionParams& params, const FixedHyperparams& fixed, bool learn_scale = true);

struct CalibratedAge {
  double mean;
  double sd;
};
// Posterior moments of a single radiocarbon datum's calendar age under a flat
// prior over the curve range (trapezoid quadrature on `points` nodes).
CalibratedAge calibrate_radiocarbon(const ProxyDatum& datum, const CalibrationCurve& curve,
                                    const FixedHyperparams& fixed, std::size_t points = 8001);

}  // namespace sagpr
