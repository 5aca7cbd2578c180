#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "sagpr/emission.hpp"
#include "sagpr/errors.hpp"

using namespace sagpr;

TEST_CASE("Student-t density") {
  boost::math::students_t t(6.0);
  for (double y : {-3.0, -0.2, 0.0, 1.7}) {
    CHECK(std::exp(t_logpdf(y, 0.5, 2.0, 6.0)) == doctest::Approx(pdf(t, (y - 0.5) / 2.0) / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("d18O emission uses the shifted, scaled profile") {
  Profile prof({0.0, 1.0}, {1.0, 3.0}, {0.5, 0.5});
  FixedHyperparams f;
  EmissionParams p{0.4, 1.5};
  const double loc = 1.5 * 2.0 + 0.4;
  const double scale = std::sqrt(f.b2 / f.a2 * 1.5 * 1.5 * 0.5);
  CHECK(d18o_log_emission(3.0, 0.5, p, prof, f) == doctest::Approx(t_logpdf(3.0, loc, scale, 2 * f.a2)));
  CHECK_THROWS_AS(d18o_log_emission(3.0, 1.5, p, prof, f), Error);
}

TEST_CASE("dual emission drops radiocarbon outside the curve") {
  CalibrationCurve c({0.0, 10.0}, {0.0, 10000.0}, {50.0, 50.0});
  Profile prof({0.0, 20.0}, {0.0, 0.0}, {1.0, 1.0});
  FixedHyperparams f;
  std::vector<ProxyDatum> d = {ProxyDatum::d18o(0.1), ProxyDatum::radiocarbon(5000, 0, 0)};
  auto in = dual_log_emission(d, 5.0, {}, &prof, &c, f);
  CHECK(in.dropped == 0);
  CHECK(in.log_density == doctest::Approx(d18o_log_emission(0.1, 5.0, {}, prof, f) +
                                          c14_log_emission(5000, 0, 0, 5.0, c, f)));
  auto out = dual_log_emission(d, 15.0, {}, &prof, &c, f);
  CHECK(out.dropped == 1);
  CHECK(out.log_density == doctest::Approx(d18o_log_emission(0.1, 15.0, {}, prof, f)));
  CHECK_THROWS_AS(dual_log_emission(d, 5.0, {}, nullptr, &c, f), Error);
}

TEST_CASE("emission prior maximizer") {
  FixedHyperparams f;
  f.alpha_bar = 2.0;
  f.beta_bar = 0.6;
  double best = 0, arg = 0;
  for (double s = 0.01; s < 3.0; s += 1e-5) {
    double v = emission_prior_logpdf({f.h_bar, s}, f);
    if (arg == 0 || v > best) best = v, arg = s;
  }
  CHECK(arg == doctest::Approx(std::sqrt(f.beta_bar / (f.alpha_bar + 1.0))).epsilon(1e-4));
  CHECK(emission_prior_logpdf({1.0, 7.0}, f, false) == doctest::Approx(-0.5));
}

TEST_CASE("single-datum calibration on a linear curve") {
  // mu(z) = a + b z: the posterior age is a location-scale t, so its moments are known.
  const double a = 500.0, b = 1000.0, sigma = 60.0, res = 400.0;
  CalibrationCurve c({0.0, 50.0}, {a, a + b * 50.0}, {sigma, sigma});
  FixedHyperparams f;
  for (double y : {9000.0, 23456.0}) {
    auto d = ProxyDatum::radiocarbon(y, res, 30.0 * 30.0);
    auto got = calibrate_radiocarbon(d, c, f);
    auto t = oracle::calibration_linear_t(y, res, 900.0, a, b, sigma, f);
    auto g = oracle::calibration_grid(y, res, 900.0, c, f, 0.0, 50.0);
    CHECK(got.mean == doctest::Approx(t.mean).epsilon(0.01));
    CHECK(got.sd == doctest::Approx(t.sd).epsilon(0.01));
    CHECK(got.mean == doctest::Approx(g.mean).epsilon(0.01));
    CHECK(got.sd == doctest::Approx(g.sd).epsilon(0.01));
  }
}
