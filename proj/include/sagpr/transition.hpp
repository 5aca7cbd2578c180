#pragma once

#include <array>

#include "sagpr/data_model.hpp"
#include "sagpr/rng.hpp"

namespace sagpr {

enum Regime : int { Contraction = 0, Average = 1, Expansion = 2 };

struct GammaTransitionParams {
  double alpha = 4.0;
  double beta = 4.0;
  double depth_scale = 1.0;
  void validate() const;
};

using Phi = std::array<std::array<double, 3>, 3>;

struct CaeTransitionParams {
  Phi phi = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}};
  double depth_scale = 1.0;
  double shape = 4.0;
  double rate = 4.0;
  void validate() const;
};

// Increments z - z_prev ~ N(drift * dx, sd^2 * dx). Linear-Gaussian reference model.
struct GaussianWalkParams {
  double drift = 1.0;
  double sd = 1.0;
  void validate() const;
};

// Ratio u -> regime index, -1 when u <= 0.
int cae_regime(double u, const FixedHyperparams& fixed);
Interval cae_interval(int regime, const FixedHyperparams& fixed);  // hi = +inf for E
// log P(u in I_w) for u ~ Gamma(shape, rate).
double cae_log_region_mass(int regime, double shape, double rate, const FixedHyperparams& fixed);

double gamma_log_transition(double z_prev, double z, double x_prev, double x, const GammaTransitionParams& p);
double gamma_prior_logpdf(double alpha, double beta, const FixedHyperparams& fixed);
// Deep-to-shallow step: from (z_next, w_next) at x_next to (z, w) at x, x < x_next.
double cae_log_transition(double z_next, int w_next, double z, int w, double x, double x_next,
                          const CaeTransitionParams& p, const FixedHyperparams& fixed);
double gaussian_walk_log_transition(double z_prev, double z, double x_prev, double x, const GaussianWalkParams& p);

// Gamma(shape, rate) truncated to [lo, hi) (open at 0), by inverse CDF.
double sample_truncated_gamma(double shape, double rate, int regime, const FixedHyperparams& fixed, Rng& rng);
double sample_gamma_step(double z_prev, double x_prev, double x, const GammaTransitionParams& p, Rng& rng);

struct CaeDraw {
  double z;
  int w;
};
CaeDraw sample_cae_step(double z_next, int w_next, double x, double x_next, const CaeTransitionParams& p,
                        const FixedHyperparams& fixed, Rng& rng);

}  // namespace sagpr
