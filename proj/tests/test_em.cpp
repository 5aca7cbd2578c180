#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "fixtures.hpp"
#include "sagpr/em.hpp"

using namespace sagpr;
using namespace oracle;

TEST_CASE("Q evaluator agrees with the direct sum over the bank") {
  auto ctx = fixture::context();
  auto syn = fixture::signal(40, 0.3, 0.05, 1);
  auto ref = fixture::gamma_params(2.0);
  auto bank = gamma_bank(syn.signal, 30, 4.0, 4.0, 2.0, 2);
  QEvaluator q(bank, syn.signal, ctx, ref);
  for (double r : {1.2, 2.0, 3.1}) {
    for (double h : {0.0, 0.3}) {
      auto p = fixture::gamma_params(r, 2.5, 3.5);
      p.emission.shift = h;
      CHECK(std::abs(q.total(p) - naive_q(bank, syn.signal, ctx, p)) < 1e-10 * std::abs(q.total(p)) + 1e-10);
    }
  }

  SUBCASE("C/A/E regimes re-derived at the candidate scale") {
    SignalParams c;
    c.transition.kind = TransitionKind::Cae;
    c.transition.cae.depth_scale = 2.0;
    c.transition.cae.phi = {{{0.5, 0.3, 0.2}, {0.2, 0.6, 0.2}, {0.1, 0.3, 0.6}}};
    auto cb = gamma_bank(syn.signal, 20, 6.0, 6.0, 2.0, 3, true);
    QEvaluator qc(cb, syn.signal, ctx, c);
    for (double r : {1.7, 2.0, 2.4}) {
      auto p = c;
      p.transition.cae.depth_scale = r;
      CHECK(std::abs(qc.total(p) - naive_q(cb, syn.signal, ctx, p)) < 1e-10 * std::abs(qc.total(p)));
    }
  }

  SUBCASE("Gaussian walk") {
    SignalParams w;
    w.transition.kind = TransitionKind::GaussianWalk;
    w.transition.walk = {1.5, 0.7};
    QEvaluator qw(bank, syn.signal, ctx, w);
    CHECK(std::abs(qw.total(w) - naive_q(bank, syn.signal, ctx, w)) < 1e-10 * std::abs(qw.total(w)));
  }
}

TEST_CASE("M-step never lowers Q") {
  auto ctx = fixture::context();
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto syn = fixture::signal(30, 0.2 * seed, 0.05, 10 + seed);
    auto bank = gamma_bank(syn.signal, 25, 3.0 + seed, 3.0, 1.9, 20 + seed);
    for (auto kind : {TransitionKind::Gamma, TransitionKind::Cae, TransitionKind::GaussianWalk}) {
      SignalParams p = fixture::gamma_params(1.5);
      p.transition.kind = kind;
      p.transition.cae.depth_scale = 1.5;
      if (kind == TransitionKind::Cae)
        for (auto& b : bank) b.regimes.assign(b.values.size(), 1);
      for (bool ls : {false, true}) {
        ctx.learn_scale = ls;
        QEvaluator q(bank, syn.signal, ctx, p);
        auto next = m_step(q, p);
        CHECK(q.total(next) >= q.total(p));
        CHECK(q.emission_part(next.emission) >= q.emission_part(p.emission));
        CHECK(q.transition_part(next.transition) >= q.transition_part(p.transition));
      }
    }
  }
}

TEST_CASE("Gamma M-step satisfies the conjugate stationarity conditions") {
  auto ctx = fixture::context();
  auto syn = fixture::signal(60, 0.0, 0.05, 5);
  auto gap = conjugate_gamma_check(ctx, syn.signal, 1.9, 50, 6);
  CHECK(gap.alpha < 0.01);
  CHECK(gap.beta < 0.01);
}

TEST_CASE("closed-form updates") {
  auto ctx = fixture::context();
  auto syn = fixture::signal(30, 0.0, 0.05, 8);
  auto bank = gamma_bank(syn.signal, 10, 5.0, 5.0, 1.9, 9, true);

  SignalParams w;
  w.transition.kind = TransitionKind::GaussianWalk;
  QEvaluator qw(bank, syn.signal, ctx, w);
  auto est = m_step(qw, w).transition.walk;
  const double d = 1e-4;
  for (auto dv : {std::pair{d, 0.0}, {-d, 0.0}, {0.0, d}, {0.0, -d}}) {
    auto moved = w;
    moved.transition.walk = {est.drift + dv.first, est.sd + dv.second};
    auto at = w;
    at.transition.walk = est;
    CHECK(qw.transition_part(at.transition) >= qw.transition_part(moved.transition));
  }

  SignalParams c;
  c.transition.kind = TransitionKind::Cae;
  c.transition.cae.depth_scale = 1.9;
  QEvaluator qc(bank, syn.signal, ctx, c);
  MStepOptions o;
  o.learn_depth_scale = false;
  auto phi = m_step(qc, c, o).transition.cae.phi;
  for (const auto& row : phi) {
    double s = 0;
    for (double v : row) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("shift recovered by Monte-Carlo EM") {
  auto ctx = fixture::context();
  auto syn = fixture::signal(300, 0.7, 0.1, 42);
  EmConfig cfg;
  cfg.sampler.particles = 300;
  cfg.sampler.samples = 100;
  cfg.sampler.sweeps = 30;
  cfg.max_iterations = 14;
  cfg.tolerance = 0.0;
  auto init = fixture::gamma_params(reference_depth_scale(syn.signal, ctx.domain));
  auto res = run_em(syn.signal, ctx, init, cfg, 7, 1);
  CHECK(std::abs(res.params.emission.shift - 0.7) < 0.1);
  REQUIRE(res.q_history.size() == res.iterations);
  for (std::size_t i = 0; i < res.iterations; ++i) CHECK(res.q_history[i] >= res.q_start[i] - 2.0 * res.q_se[i]);
  CHECK(res.bank.size() == 100);
}

TEST_CASE("run_em is deterministic for a fixed seed") {
  auto ctx = fixture::context();
  auto syn = fixture::signal(80, 0.7, 0.1, 43);
  EmConfig cfg;
  cfg.sampler.particles = 100;
  cfg.sampler.samples = 20;
  cfg.sampler.sweeps = 5;
  cfg.max_iterations = 2;
  auto init = fixture::gamma_params(reference_depth_scale(syn.signal, ctx.domain));
  auto a = run_em(syn.signal, ctx, init, cfg, 7, 1);
  auto b = run_em(syn.signal, ctx, init, cfg, 7, 1);
  CHECK(a.params.emission.shift == b.params.emission.shift);
  CHECK(a.bank[17].values == b.bank[17].values);
}
