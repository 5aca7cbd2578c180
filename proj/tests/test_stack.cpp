#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "sagpr/stack.hpp"

using namespace sagpr;

TEST_CASE("outlier posterior") {
  Profile p({0.0, 1.0}, {0.5, 0.5}, {0.04, 0.04});
  for (double delta : {0.01, 0.05, 0.2}) {
    const double a = delta * std::exp(-4.5);
    CHECK(std::abs(outlier_posterior(0.5, 0.3, p, delta) - a / (a + 1.0 - delta)) < 1e-12);
  }
  // three standard deviations away
  const double r = std::exp(-4.5) * std::cosh(9.0);
  CHECK(outlier_posterior(0.5 + 0.6, 0.3, p, 0.05) == doctest::Approx(0.05 * r / (0.05 * r + 0.95)).epsilon(1e-12));
  CHECK(outlier_posterior(0.5 + 0.6, 0.3, p, 0.05) == doctest::Approx(0.703).epsilon(1e-3));
  CHECK(outlier_posterior(0.5, 0.3, p, 0.05) == doctest::Approx(0.000584).epsilon(1e-3));
  CHECK(outlier_posterior(0.5 + 0.5, 0.3, p, 0.05) == doctest::Approx(outlier_posterior(0.5 - 0.5, 0.3, p, 0.05)));
  CHECK(outlier_posterior(9.0, 0.3, p, 0.05) > 0.999999);

  std::vector<double> one = {1.1};
  CHECK(position_outlier_posterior(one, 0.3, p, 0.05) == doctest::Approx(outlier_posterior(1.1, 0.3, p, 0.05)));
  std::vector<double> two = {1.1, 1.1};
  CHECK(position_outlier_posterior(two, 0.3, p, 0.05) > outlier_posterior(1.1, 0.3, p, 0.05));
  CHECK(position_outlier_posterior({}, 0.3, p, 0.05) == 0.0);
}

TEST_CASE("stack units and training sets") {
  EmissionParams e{0.3, 2.0};
  CHECK(to_stack_units(1.3, e, true) == doctest::Approx(0.5));
  CHECK(to_stack_units(1.3, e, false) == doctest::Approx(1.0));

  auto syn = fixture::signal(5, 0.0, 0.01, 1);
  AlignmentSample s;
  s.values = syn.ages;
  s.outlier_flags = {0, 1, 0, 0, 1};
  std::vector<std::vector<AlignmentSample>> banks = {{s}};
  std::vector<SignalParams> params(1);
  params[0].emission.shift = 0.25;
  auto ts = training_set(0, banks, {syn.signal}, params, false);
  REQUIRE(ts.inputs.size() == 3);
  CHECK(ts.inputs[1] == syn.ages[2]);
  CHECK(ts.outputs[1] == doctest::Approx(syn.signal.observations()[2][0].value - 0.25));
}

TEST_CASE("profile fitted at known ages reproduces the curve") {
  auto ctx = fixture::context();
  std::vector<Signal> sigs;
  std::vector<std::vector<double>> ages;
  for (std::uint64_t k = 0; k < 3; ++k) {
    auto syn = fixture::signal(80, 0.0, 0.05, 30 + k);
    sigs.push_back(syn.signal);
    ages.push_back(syn.ages);
  }
  ProfileConfig cfg;
  ProfileState state;
  auto prof = profile_from_ages(sigs, ages, ctx, cfg, state, 3);
  CHECK(state.kernel.variance > 0.0);
  double worst = 0.0;
  for (double z = -0.9; z <= 0.9; z += 0.01) worst = std::max(worst, std::abs(prof.mean(z) - fixture::curve(z)));
  CHECK(worst < 0.15);
  CHECK(prof.noise(0.0) == doctest::Approx(0.0025).epsilon(0.5));

  ProfileState again;
  auto prof2 = profile_from_ages(sigs, ages, ctx, cfg, again, 3);
  CHECK(prof2.mean_values() == prof.mean_values());
}

TEST_CASE("outlier classification writes flags into every sample") {
  auto ctx = fixture::context();
  auto syn = fixture::signal(20, 0.0, 0.01, 2);
  std::vector<std::vector<AlignmentSample>> banks(1, std::vector<AlignmentSample>(4));
  for (auto& s : banks[0]) s.values = syn.ages;
  std::vector<SignalParams> params(1);
  auto p = classify_outliers(banks, {syn.signal}, params, *ctx.profile, ctx, 1, 2);
  for (auto& s : banks[0]) CHECK(s.outlier_flags.size() == 20);
  for (double v : p[0]) CHECK(v < 0.01);
}
