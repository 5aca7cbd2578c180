#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "sagpr/stats.hpp"
#include "sagpr/transition.hpp"

using namespace sagpr;
using namespace oracle;

TEST_CASE("regime classification") {
  FixedHyperparams f;
  CHECK(cae_regime(0.0, f) == -1);
  CHECK(cae_regime(0.5, f) == Contraction);
  CHECK(cae_regime(0.9220, f) == Average);
  CHECK(cae_regime(std::nextafter(0.9220, 0.0), f) == Contraction);
  CHECK(cae_regime(1.0849, f) == Average);
  CHECK(cae_regime(1.0850, f) == Expansion);
  double s = 0.0;
  for (int w = 0; w < 3; ++w) s += std::exp(cae_log_region_mass(w, 4.0, 4.0, f));
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("region masses stay finite in the deep tails") {
  FixedHyperparams f;
  for (double shape : {0.3, 1.0, 50.0, 1e4}) {
    for (double rate : {1e-3, 1.0, 1e4}) {
      double lse = -INFINITY;
      for (int w = 0; w < 3; ++w) {
        const double lm = cae_log_region_mass(w, shape, rate, f);
        REQUIRE(lm <= 1e-12);
        REQUIRE(!std::isnan(lm));
        lse = std::max(lse, lm) + std::log1p(std::exp(std::min(lse, lm) - std::max(lse, lm)));
      }
      CHECK(lse == doctest::Approx(0.0).epsilon(1e-10));
    }
  }
  // Lower tail far below double range: log P(a, x) ~ a log x - x - lgamma(a + 1)
  const double lm = cae_log_region_mass(Contraction, 1e4, 1.0, f);
  CHECK(lm == doctest::Approx(1e4 * std::log(0.922) - 0.922 - std::lgamma(1e4 + 1.0)).epsilon(1e-3));
}

TEST_CASE("Gamma transition integrates to one") {
  Rng rng(2024);
  std::uniform_real_distribution<double> shape(1.05, 40.0), rate(0.3, 40.0), r(0.05, 20.0), dx(0.01, 2.0);
  for (int i = 0; i < 100; ++i) {
    GammaTransitionParams p{shape(rng), rate(rng), r(rng)};
    const double x0 = 1.0, x1 = 1.0 + dx(rng);
    CHECK(std::abs(gamma_integral(p, 0.3, x0, x1) - 1.0) < 1e-6);
  }
  CHECK(gamma_log_transition(1.0, 1.0, 0, 1, {}) == -INFINITY);
}

TEST_CASE("truncated C/A/E transition integrates to one for every previous regime") {
  Rng rng(77);
  FixedHyperparams f;
  std::uniform_real_distribution<double> shape(1.05, 60.0), rate(0.3, 60.0), r(0.05, 20.0), dx(0.01, 2.0),
      u01(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    CaeTransitionParams p;
    p.shape = shape(rng);
    p.rate = rate(rng);
    p.depth_scale = r(rng);
    for (auto& row : p.phi) {
      double a = u01(rng), b = u01(rng), c = u01(rng);
      row = {a / (a + b + c), b / (a + b + c), c / (a + b + c)};
    }
    const double xn = 2.0, x = xn - dx(rng);
    for (int wn = 0; wn < 3; ++wn) CHECK(std::abs(cae_integral(p, f, wn, 0.7, x, xn) - 1.0) < 1e-6);
  }
}

TEST_CASE("truncated sampler stays inside the regime intervals") {
  FixedHyperparams f;
  Rng rng(3);
  for (double shape : {0.7, 4.0, 40.0, 400.0}) {
    for (double rate : {0.5, 4.0, 400.0}) {
      for (int w = 0; w < 3; ++w) {
        for (int i = 0; i < 400; ++i) {
          const double u = sample_truncated_gamma(shape, rate, w, f, rng);
          REQUIRE(cae_regime(u, f) == w);
        }
      }
    }
  }
  CaeTransitionParams p;
  p.depth_scale = 1.3;
  for (int i = 0; i < 20000; ++i) {
    const double xn = 0.37, x = 0.21, zn = 0.113;
    auto d = sample_cae_step(zn, i % 3, x, xn, p, f, rng);
    REQUIRE(cae_regime((zn - d.z) / (p.depth_scale * (xn - x)), f) == d.w);
  }
}

TEST_CASE("samplers follow their laws") {
  FixedHyperparams f;
  Rng rng(12);
  const double shape = 3.0, rate = 2.5;
  boost::math::gamma_distribution<double> g(shape, 1.0 / rate);
  for (int w = 0; w < 3; ++w) {
    auto I = cae_interval(w, f);
    const double lo = cdf(g, I.lo), hi = std::isfinite(I.hi) ? cdf(g, I.hi) : 1.0;
    std::vector<double> u(4000);
    for (auto& v : u) v = sample_truncated_gamma(shape, rate, w, f, rng);
    const double d = ks_statistic(u, [&](double x) { return (cdf(g, x) - lo) / (hi - lo); });
    CHECK(kolmogorov_pvalue(d, u.size()) > 0.001);
  }
  GammaTransitionParams p{shape, rate, 2.0};
  std::vector<double> z(4000);
  for (auto& v : z) v = (sample_gamma_step(1.0, 0.0, 0.25, p, rng) - 1.0) / (2.0 * 0.25);
  CHECK(kolmogorov_pvalue(ks_statistic(z, [&](double x) { return cdf(g, x); }), z.size()) > 0.001);

  CaeTransitionParams c;
  c.phi = {{{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.3, 0.5}}};
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[sample_cae_step(0.0, 2, 0.0, 0.1, c, f, rng).w];
  CHECK(counts[0] / 20000.0 == doctest::Approx(0.2).epsilon(0.05));
  CHECK(counts[2] / 20000.0 == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("Gamma hyperprior and Gaussian walk") {
  FixedHyperparams f;
  const double a = 3.0, b = 2.0;
  CHECK(gamma_prior_logpdf(a, b, f) ==
        doctest::Approx((a - 1) * std::log(f.p_bar) - f.r_bar * std::lgamma(a) + a * f.s_bar * std::log(b) -
                        b * f.q_bar));
  GaussianWalkParams w{0.5, 0.2};
  const double var = 0.04 * 0.3;
  CHECK(gaussian_walk_log_transition(0.0, 0.2, 0.0, 0.3, w) ==
        doctest::Approx(-0.5 * std::log(2 * M_PI * var) - 0.5 * 0.05 * 0.05 / var));
  CHECK_THROWS(GammaTransitionParams{0.0, 1.0, 1.0}.validate());
  CaeTransitionParams bad;
  bad.phi[0] = {0.5, 0.5, 0.5};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("Kolmogorov tail probability") {
  // Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2)
  auto q = [](double l) {
    double s = 0;
    for (int k = 1; k < 100; ++k) s += 2 * ((k % 2) ? 1 : -1) * std::exp(-2.0 * k * k * l * l);
    return s;
  };
  const std::size_t n = 400;
  for (double d : {0.03, 0.05, 0.08}) {
    const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    CHECK(kolmogorov_pvalue(d, n) == doctest::Approx(q(lam)).epsilon(1e-8));
  }
}
