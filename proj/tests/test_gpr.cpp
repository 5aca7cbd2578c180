#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "oracles.hpp"
#include "sagpr/gpr.hpp"

using namespace sagpr;
using namespace oracle;

TEST_CASE("kernels") {
  KernelParams p{2.0, 0.5};
  CHECK(ou_kernel(0.3, 0.3, p) == doctest::Approx(2.0));
  CHECK(ou_kernel(0.0, 0.5, p) == doctest::Approx(2.0 * std::exp(-1.0)));
  CHECK(se_kernel(0.0, 0.5, p) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK_THROWS(KernelParams{-1.0, 1.0}.validate());
}

TEST_CASE("kernel log-gradient matches finite differences") {
  for (auto kind : {KernelKind::OrnsteinUhlenbeck, KernelKind::SquaredExponential}) {
    Kernel k{kind, {1.3, 0.4}};
    auto g = k.log_gradient(0.1, 0.45);
    const double h = 1e-6;
    Kernel a = k, b = k;
    a.params.lengthscale *= std::exp(h);
    b.params.lengthscale *= std::exp(-h);
    CHECK(g[1] == doctest::Approx((a(0.1, 0.45) - b(0.1, 0.45)) / (2 * h)).epsilon(1e-6));
    CHECK(g[0] == doctest::Approx(k(0.1, 0.45)));
  }
}

TEST_CASE("sparse fit with pseudo-inputs at the data is the exact GP") {
  for (auto kind : {KernelKind::OrnsteinUhlenbeck, KernelKind::SquaredExponential}) {
    for (std::size_t n : {5u, 20u, 50u}) {
      auto d = noisy_sine(n, 7 + n);
      // SE Gram matrices on dense inputs are numerically singular; keep them well conditioned.
      Kernel k{kind, {0.8, kind == KernelKind::SquaredExponential ? 0.05 : 0.3}};
      const double noise = 0.01, prior = 0.2;
      auto fit = fit_on(d, k, d.x, noise, prior);
      ExactGpr ex(k, d, noise, prior);
      CHECK(std::abs(fit->trace_term()) < 1e-8);
      CHECK(fit->objective() == doctest::Approx(ex.lml).epsilon(1e-9));
      for (double z = -1.2; z <= 1.2; z += 0.07) {
        auto p = fit->predict(z);
        auto [m, v] = ex.predict(z);
        CHECK(std::abs(p.mean - m) < 1e-8);
        CHECK(std::abs(p.latent_variance - v) < 1e-8);
        CHECK(p.noise == doctest::Approx(noise));
      }
    }
  }
}

TEST_CASE("sparse objective is a lower bound on the exact evidence") {
  auto d = noisy_sine(60, 3);
  Kernel k{KernelKind::SquaredExponential, {1.0, 0.3}};
  ExactGpr ex(k, d, 0.01, 0.0);
  double prev = -INFINITY;
  for (std::size_t m : {4u, 8u, 16u, 32u}) {
    std::vector<double> z;
    for (std::size_t i = 0; i < m; ++i) z.push_back(-1.0 + 2.0 * (i + 0.5) / m);
    auto fit = fit_on(d, k, z, 0.01, 0.0);
    CHECK(fit->objective() <= ex.lml + 1e-9);
    CHECK(fit->trace_term() >= 0.0);
    CHECK(fit->objective() > prev - 1e-6);
    prev = fit->objective();
  }
}

TEST_CASE("objective gradient matches finite differences") {
  auto d = noisy_sine(30, 11);
  std::vector<double> z = {-0.9, -0.5, -0.1, 0.3, 0.7};
  for (auto kind : {KernelKind::OrnsteinUhlenbeck, KernelKind::SquaredExponential}) {
    Kernel k{kind, {0.9, 0.35}};
    auto g = fit_on(d, k, z, 0.02, 0.0)->objective_gradient();
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Kernel a = k, b = k;
      double& pa = i == 0 ? a.params.variance : a.params.lengthscale;
      double& pb = i == 0 ? b.params.variance : b.params.lengthscale;
      pa *= std::exp(h);
      pb *= std::exp(-h);
      const double fd = (fit_on(d, a, z, 0.02, 0.0)->objective() - fit_on(d, b, z, 0.02, 0.0)->objective()) / (2 * h);
      CHECK(g[static_cast<std::size_t>(i)] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("tuning never lowers the summed objective") {
  std::vector<TuneDataset> data;
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto d = noisy_sine(40, 100 + s);
    TuneDataset t;
    t.inputs = d.x;
    t.outputs = d.y;
    t.noise.assign(d.x.size(), 0.01);
    Rng rng(s);
    t.pseudo_inputs = stratified_pseudo_inputs({-1, 1}, 16, rng);
    data.push_back(t);
  }
  auto r = tune_hyperparameters(data, {0.1, 2.0}, KernelKind::SquaredExponential);
  CHECK(r.objective >= r.initial_objective);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1]);
  CHECK(r.objective == doctest::Approx(sum_objective(data, {KernelKind::SquaredExponential, r.params})));
  auto rn = tune_with_noise(data, {0.1, 2.0}, 0.5, KernelKind::SquaredExponential);
  CHECK(rn.objective >= rn.initial_objective);
  CHECK(rn.noise > 0.0);
  CHECK(rn.noise < 0.1);
}

TEST_CASE("stratified pseudo-inputs") {
  Rng rng(5);
  auto z = stratified_pseudo_inputs({-1, 1}, 10, rng);
  REQUIRE(z.size() == 10);
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(z[i] >= -1.0 + 0.2 * i);
    CHECK(z[i] <= -1.0 + 0.2 * (i + 1));
  }
  CHECK(default_pseudo_count(10) == 10);
  CHECK(default_pseudo_count(500) == 64);
}

TEST_CASE("tabulated interpolation and grid") {
  Tabulated t({0.0, 1.0, 2.0}, {0.0, 2.0, 1.0});
  CHECK(t(0.5) == doctest::Approx(1.0));
  CHECK(t(1.5) == doctest::Approx(1.5));
  CHECK(t(-3.0) == doctest::Approx(0.0));
  CHECK(t(9.0) == doctest::Approx(1.0));
  auto g = tabulation_grid({-1, 1}, 1.0, 20001);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == 1.0);
  CHECK(g[1] - g[0] <= 2.0 / 1000 + 1e-12);
  CHECK(tabulation_grid({-1, 1}, 1e-6, 2001).size() == 2001);
}

TEST_CASE("moment matching of the per-sample fits") {
  std::vector<std::shared_ptr<const GprFit>> fits;
  Kernel k{KernelKind::OrnsteinUhlenbeck, {1.0, 0.4}};
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto d = noisy_sine(15, 40 + s);
    fits.push_back(fit_on(d, k, d.x, 0.02 + 0.01 * s, 0.0));
  }
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-1.0 + i * 0.05);
  auto prof = combine_profile(fits, grid);
  auto ser = mixture_moments_serial(fits, grid);
  auto par = mixture_moments_parallel(fits, grid);
  CHECK(ser.mean == par.mean);
  CHECK(ser.variance == par.variance);
  for (double z : {-0.95, -0.3, 0.0, 0.55}) {
    double m = 0, m2 = 0, nz = 0;
    for (auto& f : fits) {
      auto p = f->predict(z);
      m += p.mean / 4;
      m2 += (p.variance() + p.mean * p.mean) / 4;
      nz += p.noise / 4;
    }
    auto i = static_cast<std::size_t>(std::lround((z + 1.0) / 0.05));
    CHECK(ser.mean[i] == doctest::Approx(m).epsilon(1e-12));
    CHECK(ser.variance[i] == doctest::Approx(m2 - m * m).epsilon(1e-10));
    CHECK(ser.noise[i] == doctest::Approx(nz).epsilon(1e-12));
    CHECK(prof.mean(z) == doctest::Approx(m).epsilon(1e-12));
  }
}

TEST_CASE("heteroscedastic fit tracks a rising noise level") {
  Rng rng(9);
  std::vector<double> x, y, z;
  for (int i = 0; i < 400; ++i) {
    double s = -1.0 + 2.0 * (i + 0.5) / 400;
    double sd = 0.03 + 0.3 * std::pow((s + 1) / 2, 2);
    x.push_back(s);
    y.push_back(std::sin(3 * s) + std::normal_distribution<double>(0, sd)(rng));
  }
  for (int i = 0; i < 32; ++i) z.push_back(-1.0 + 2.0 * (i + 0.5) / 32);
  auto h = fit_heteroscedastic(x, y, z, {KernelKind::SquaredExponential, {0.5, 0.3}}, PriorMean::constant(0.0));
  CHECK(h.iterations >= 1);
  CHECK(h.bandwidth == doctest::Approx(knn_bandwidth(x)));
  CHECK(h.fit->noise()(0.9) > 5.0 * h.fit->noise()(-0.9));
  auto d = NoiseFunction::nadaraya_watson({0.0, 1.0}, {1.0, 3.0}, 0.1);
  CHECK(d(0.5) == doctest::Approx(2.0));
  CHECK(d(0.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("profile text round trip") {
  Profile p({0.0, 0.5, 1.0}, {0.1, -0.2, 0.3}, {1.0, 0.5, 0.25}, {0.1, 0.1, 0.2});
  auto q = parse_profile_text(profile_to_text(p));
  CHECK(q.grid() == p.grid());
  CHECK(q.mean_values() == p.mean_values());
  for (std::size_t i = 0; i < 3; ++i) CHECK(q.variance_values()[i] == doctest::Approx(p.variance_values()[i]).epsilon(1e-8));
  CHECK(q.variance(0.25) == doctest::Approx(0.75));
}
