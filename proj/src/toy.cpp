#include "sagpr/toy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "sagpr/errors.hpp"
#include "sagpr/rng.hpp"

namespace sagpr {

namespace {

struct Defaults {
  std::size_t signals, points;
  double noise;
};

Defaults defaults_for(int example) {
  switch (example) {
    case 1: return {2, 0, 0.01};
    case 2: return {4, 60, 0.05};
    case 3: return {4, 80, 0.0};
    case 4: return {3, 40, 0.05};
    default: return {5, 60, 0.1};
  }
}

// Monotone warp of [0, 1] onto itself; a in (-1, 1).
double warp(double x, double a) { return x + a * std::sin(std::numbers::pi * x) / std::numbers::pi; }

const double kWarps[] = {0.0, 0.35, -0.3, 0.25, -0.2, 0.15, -0.1, 0.3};

}  // namespace

void ToySpec::validate() const {
  if (example < 1 || example > 5) throw Error(ErrorCode::InvalidArgument, "example must be 1..5");
  if (!(interval > 0.0)) throw Error(ErrorCode::InvalidArgument, "interval must be positive");
  if (outlier_fraction < 0.0 || outlier_fraction >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "outlier fraction must lie in [0, 1)");
  }
}

double toy_latent(int example, double s) {
  if (example == 1) return std::cos(std::numbers::pi * s);
  return std::sin(3.0 * s) + 0.4 * std::cos(7.0 * s + 0.5);
}

ToyData make_toy(const ToySpec& spec, std::uint64_t seed) {
  spec.validate();
  const Defaults def = defaults_for(spec.example);
  const std::size_t M = spec.signals ? spec.signals : def.signals;
  const std::size_t N = spec.points ? spec.points : def.points;
  const double base_sd = spec.noise_sd > 0.0 ? spec.noise_sd : def.noise;
  const int ex = spec.example;

  ToyData d;
  d.latent = [ex](double s) { return toy_latent(ex, s); };
  if (ex == 3) {
    d.noise_sd = [](double s) { return 0.03 + 0.3 * ((s + 1.0) / 2.0) * ((s + 1.0) / 2.0); };
  } else {
    d.noise_sd = [base_sd](double) { return base_sd; };
  }
  Rng rng = make_stream(seed, {0x7011ULL, static_cast<std::uint64_t>(ex)});
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto emit = [&](const std::string& id, std::vector<double> x, std::vector<double> s, std::vector<int> planted) {
    std::vector<std::vector<ProxyDatum>> obs(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double sd = d.noise_sd(s[n]);
      double y = d.latent(s[n]) + sd * gauss(rng);
      if (planted[n]) y = d.latent(s[n]) + (uniform01(rng) < 0.5 ? -1.0 : 1.0) * spec.outlier_sd * sd;
      obs[n].push_back(ProxyDatum::d18o(y));
    }
    d.signals.emplace_back(id, std::move(x), std::move(obs));
    d.true_ages.push_back(std::move(s));
    d.planted_outlier.push_back(std::move(planted));
  };

  if (ex == 1) {
    // Base grid at the sampling interval, origin shifted by the offset; points
    // are dealt alternately to the signals, so each signal is asynchronous
    // with the others.
    std::vector<double> grid;
    for (double s = d.domain.lo + spec.offset; s <= d.domain.hi + 1e-12; s += spec.interval) grid.push_back(s);
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> s;
      for (std::size_t i = m; i < grid.size(); i += M) s.push_back(grid[i]);
      emit(std::string(1, static_cast<char>('A' + m)), s, s, std::vector<int>(s.size(), 0));
    }
    return d;
  }

  for (std::size_t m = 0; m < M; ++m) {
    Interval seg = d.domain;
    if (ex == 4) {
      static const Interval segs[] = {{-1.0, 0.1}, {-0.55, 0.55}, {-0.1, 1.0}};
      seg = segs[m % 3];
    }
    // Example 4 segments are linear in depth: the part of a segment nobody
    // else covers is placed only by the accumulation-rate prior.
    const double a = ex == 4 ? 0.0 : kWarps[m % 8];
    std::vector<double> x(N), s(N);
    for (std::size_t n = 0; n < N; ++n) {
      x[n] = static_cast<double>(n) / static_cast<double>(N - 1);
      s[n] = seg.lo + seg.width() * warp(x[n], a);
    }
    std::vector<int> planted(N, 0);
    if (ex == 2) {
      const auto k = static_cast<std::size_t>(std::lround(spec.outlier_fraction * static_cast<double>(N)));
      std::vector<std::size_t> idx(N - 2);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i + 1;
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < std::min(k, idx.size()); ++i) planted[idx[i]] = 1;
    }
    emit("S" + std::to_string(m + 1), x, s, planted);
  }
  if (ex == 3) {
    for (std::size_t i = 0; i < spec.held_out; ++i) {
      const double s = d.domain.lo + d.domain.width() * uniform01(rng);
      d.held_out_ages.push_back(s);
      d.held_out_values.push_back(d.latent(s) + d.noise_sd(s) * gauss(rng));
    }
  }
  return d;
}

}  // namespace sagpr
