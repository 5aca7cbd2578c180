#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "sagpr/alignment_model.hpp"

namespace fixture {

inline double curve(double s) { return std::sin(3.0 * s) + 0.4 * std::cos(7.0 * s + 0.5); }

// Known profile on [-1, 1] with constant variance.
inline std::shared_ptr<const sagpr::Profile> profile(double var = 0.01) {
  std::vector<double> g, m, v;
  for (int i = 0; i <= 2000; ++i) {
    g.push_back(-1.0 + i * 0.001);
    m.push_back(curve(g.back()));
    v.push_back(var);
  }
  return std::make_shared<sagpr::Profile>(g, m, v);
}

struct Synthetic {
  sagpr::Signal signal;
  std::vector<double> ages;
};

// Evenly spaced depths in [0, 1] mapped to ages in [lo, hi] with a gentle warp.
inline Synthetic signal(std::size_t n, double shift, double noise, std::uint64_t seed, double lo = -0.95,
                        double hi = 0.95) {
  sagpr::Rng rng(seed);
  std::normal_distribution<double> nd(0.0, noise);
  std::vector<double> x, ages;
  std::vector<std::vector<sagpr::ProxyDatum>> data;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    x.push_back(u);
    ages.push_back(lo + (hi - lo) * (u + 0.2 * std::sin(M_PI * u) / M_PI));
    data.push_back({sagpr::ProxyDatum::d18o(curve(ages.back()) + shift + nd(rng))});
  }
  return {sagpr::Signal("s" + std::to_string(seed), x, data), ages};
}

inline sagpr::ModelContext context(double var = 0.01) {
  sagpr::ModelContext ctx;
  ctx.profile = profile(var);
  ctx.domain = {-1.0, 1.0};
  return ctx;
}

inline sagpr::SignalParams gamma_params(double r, double alpha = 4.0, double beta = 4.0) {
  sagpr::SignalParams p;
  p.transition.kind = sagpr::TransitionKind::Gamma;
  p.transition.gamma = {alpha, beta, r};
  return p;
}

}  // namespace fixture
